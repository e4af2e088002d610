#include "pppr/estimator.hpp"
#include "pppr/generators.hpp"
#include "pppr/selftest.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace pppr;

namespace {

ErrorIndicator indicator_of(std::vector<double> eta) {
  ErrorIndicator ind;
  ind.per_triangle = std::move(eta);
  return ind;
}

}  // namespace

TEST(Estimator, ConstantMismatchGivesSqrtArea) {
  // eta_T^2 = int_T |c|^2 = |c|^2 |T|.
  const auto mesh = projected_icosphere(1, highcurv_surface());
  const ScalarField u{std::vector<double>(mesh.num_vertices(), 1.5), mesh.generation()};
  const Vec3 c(0.3, -0.4, 1.2);
  const VectorField g{std::vector<Vec3>(mesh.num_vertices(), c), mesh.generation()};
  const auto ind = estimate(mesh, u, g);
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    EXPECT_NEAR(ind.per_triangle[t], c.norm() * std::sqrt(mesh.triangle_area(static_cast<int>(t))), 1e-14);
    total += ind.per_triangle[t] * ind.per_triangle[t];
  }
  EXPECT_NEAR(ind.global, std::sqrt(total), 1e-14);
  EXPECT_NEAR(ind.global, c.norm() * std::sqrt(mesh.area()), 1e-13);
  EXPECT_EQ(ind.generation, mesh.generation());
}

TEST(Estimator, HatFunctionMismatchIsIntegratedExactly) {
  // G = v at one vertex, 0 elsewhere; u_h = 0. On each triangle touching
  // that vertex the mismatch is lambda v, and int_T lambda^2 = |T| / 6.
  const auto mesh = tetrahedron_mesh();
  const ScalarField u{std::vector<double>(4, 0.0), mesh.generation()};
  const Vec3 v(2.0, -1.0, 0.5);
  VectorField g{std::vector<Vec3>(4, Vec3::Zero()), mesh.generation()};
  g.values[2] = v;
  const auto ind = estimate(mesh, u, g);
  for (int t = 0; t < 4; ++t) {
    const auto& tri = mesh.triangle(t);
    const bool touches = std::find(tri.begin(), tri.end(), 2) != tri.end();
    const double expected = touches ? std::sqrt(mesh.triangle_area(t) / 6.0) * v.norm() : 0.0;
    EXPECT_NEAR(ind.per_triangle[static_cast<std::size_t>(t)], expected, 1e-14) << t;
  }
}

TEST(Estimator, VanishesWhenRecoveryMatchesTheFeGradient) {
  // Constant data on the cube: grid coordinates are exact, so both
  // gradients are exactly zero and nothing gets marked.
  const auto mesh = cube_mesh(3);
  const ScalarField u{std::vector<double>(mesh.num_vertices(), 2.0), mesh.generation()};
  const VectorField g{std::vector<Vec3>(mesh.num_vertices(), Vec3::Zero()), mesh.generation()};
  const auto ind = estimate(mesh, u, g);
  EXPECT_EQ(ind.global, 0.0);
  EXPECT_TRUE(dorfler_mark(ind, 0.5).empty());
}

TEST(Dorfler, HandComputedCases) {
  // Squared total 15; theta 0.3 needs 4.5, reached by the largest alone.
  EXPECT_EQ(dorfler_mark(indicator_of({3, 2, 1, 1}), 0.3), (std::vector<int>{0}));
  // 9 + 4 = 13 < 0.9 * 15 = 13.5 needs a third; the tie goes to index 2.
  EXPECT_EQ(dorfler_mark(indicator_of({3, 2, 1, 1}), 0.9), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(dorfler_mark(indicator_of({1, 3, 2, 1}), 0.3), (std::vector<int>{1}));
  // Zero indicators are never marked.
  EXPECT_EQ(dorfler_mark(indicator_of({0, 0, 1}), 0.99), (std::vector<int>{2}));
}

TEST(Dorfler, ThetaNearOneMarksEveryPositiveIndicator) {
  std::vector<double> eta{0.5, 0.1, 0.0, 2.0, 0.3};
  const auto marked = dorfler_mark(indicator_of(eta), 1.0 - 1e-12);
  EXPECT_EQ(std::set<int>(marked.begin(), marked.end()), (std::set<int>{0, 1, 3, 4}));
}

TEST(Dorfler, EqualIndicatorsMarkCeilingOfThetaJ) {
  for (int j : {7, 10, 33}) {
    const auto marked = dorfler_mark(indicator_of(std::vector<double>(static_cast<std::size_t>(j), 0.25)), 0.3);
    ASSERT_EQ(static_cast<int>(marked.size()), static_cast<int>(std::ceil(0.3 * j - 1e-12)));
    for (std::size_t k = 0; k < marked.size(); ++k) EXPECT_EQ(marked[k], static_cast<int>(k));
  }
}

TEST(Dorfler, MatchesThresholdReferenceAndIsNestedInTheta) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> level(0, 4);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> eta(60);
    // Coarse levels produce many exact ties.
    for (auto& e : eta) e = trial % 2 ? u(rng) : 0.25 * level(rng);
    std::vector<int> previous;
    for (double theta : {0.1, 0.3, 0.5, 0.7, 0.9}) {
      auto marked = dorfler_mark(indicator_of(eta), theta);
      auto reference = detail::dorfler_reference(eta, theta);
      std::sort(marked.begin(), marked.end());
      std::sort(reference.begin(), reference.end());
      EXPECT_EQ(marked, reference) << "trial " << trial << " theta " << theta;
      EXPECT_TRUE(std::includes(marked.begin(), marked.end(), previous.begin(), previous.end()));
      previous = marked;
    }
  }
}

TEST(Dorfler, ThetaOutsideOpenIntervalIsRejected) {
  for (double theta : {0.0, 1.0, -0.2, 1.5}) {
    try {
      dorfler_mark(indicator_of({1, 2}), theta);
      FAIL() << theta;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::ParameterRange);
    }
  }
}

TEST(Effectivity, IsRatioOfEstimateToTrueError) {
  const auto p = make_problem("torus_xy");
  const auto mesh = chevron_torus_mesh(20, 10);
  const auto u = fe_solve(mesh, p).u;
  const auto g = recover_pppr(mesh, u);
  const auto ind = estimate(mesh, u, g);
  const double de = error_norms(mesh, p, u).De;
  EXPECT_NEAR(effectivity_index(mesh, p, u, ind), ind.global / de, 1e-14);
}

TEST(Effectivity, ZeroTrueErrorIsAPreconditionFailure) {
  // Zero data keeps the discrete gradient exactly zero (a nonzero constant
  // leaves rounding in the hat-gradient sum).
  const auto p = affine_problem(sphere_surface(), Vec3::Zero());
  const auto mesh = projected_icosphere(1, p.surface);
  const ScalarField u{std::vector<double>(mesh.num_vertices(), 0.0), mesh.generation()};
  const auto ind = estimate(mesh, u, VectorField{std::vector<Vec3>(mesh.num_vertices(), Vec3::Zero()), mesh.generation()});
  try {
    effectivity_index(mesh, p, u, ind);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Precondition);
  }
  auto stale = ind;
  stale.generation = 3;
  try {
    effectivity_index(mesh, p, u, stale);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MismatchedGeneration);
  }
}

TEST(Adaptive, MaxDofBelowInitialMeshGivesOneRecord) {
  const auto p = make_problem("sphere_singular");
  AdaptiveOptions opts;
  opts.max_dof = 10;
  const auto history = adaptive_solve(p, projected_icosphere(2, p.surface), opts);
  ASSERT_EQ(history.size(), 1u);
  EXPECT_TRUE(history[0].marked.empty());
  EXPECT_TRUE(history[0].De.has_value());
  EXPECT_TRUE(history[0].kappa.has_value());
}

TEST(Adaptive, RefinesUntilBudgetAndRecordsEachStep) {
  const auto p = make_problem("sphere_singular");
  AdaptiveOptions opts;
  opts.max_dof = 600;
  opts.compute_true_error = false;
  const auto history = adaptive_solve(p, projected_icosphere(2, p.surface), opts);
  ASSERT_GE(history.size(), 3u);
  for (std::size_t k = 0; k < history.size(); ++k) {
    const auto& s = history[k];
    EXPECT_EQ(s.iteration, static_cast<int>(k));
    EXPECT_EQ(s.indicator.generation, s.mesh.generation());
    EXPECT_FALSE(s.De.has_value());
    if (k + 1 < history.size()) {
      EXPECT_LE(s.dof(), opts.max_dof);
      EXPECT_FALSE(s.marked.empty());
      EXPECT_GT(history[k + 1].dof(), s.dof());
      EXPECT_EQ(history[k + 1].mesh.generation(), s.mesh.generation() + 1);
    }
  }
  EXPECT_GT(history.back().dof(), opts.max_dof);
  EXPECT_TRUE(history.back().marked.empty());
  EXPECT_LE(surface_residual(history.back().mesh, p.surface).max_abs_phi, 1e-12);
}

TEST(Adaptive, InvalidThetaIsRejectedBeforeAnyWork) {
  const auto p = make_problem("sphere_singular");
  AdaptiveOptions opts;
  opts.theta = 1.0;
  EXPECT_THROW(adaptive_solve(p, projected_icosphere(1, p.surface), opts), Error);
}
