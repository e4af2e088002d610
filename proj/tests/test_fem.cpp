#include "pppr/fem.hpp"
#include "pppr/generators.hpp"
#include "pppr/refine.hpp"

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <random>

using namespace pppr;

namespace {

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

/// Mean of l1^a l2^b l3^c over a triangle: 2 a! b! c! / (a + b + c + 2)!.
double barycentric_monomial_mean(int a, int b, int c) {
  return 2.0 * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
}

int local_index(const Triangle& tri, int v) { return static_cast<int>(std::find(tri.begin(), tri.end(), v) - tri.begin()); }

}  // namespace

TEST(Quadrature, ExactForDegreeFour) {
  double weight_sum = 0.0;
  for (const auto& q : triangle_rule()) weight_sum += q.weight;
  EXPECT_NEAR(weight_sum, 1.0, 1e-15);
  for (int a = 0; a <= 4; ++a) {
    for (int b = 0; a + b <= 4; ++b) {
      for (int c = 0; a + b + c <= 4; ++c) {
        double s = 0.0;
        for (const auto& q : triangle_rule()) {
          s += q.weight * std::pow(q.bary[0], a) * std::pow(q.bary[1], b) * std::pow(q.bary[2], c);
        }
        EXPECT_NEAR(s, barycentric_monomial_mean(a, b, c), 1e-15) << a << b << c;
      }
    }
  }
}

TEST(Fem, LocalMatricesOnRightTriangle) {
  // Face {origin, e1, e2} of the unit tetrahedron: right angle at the origin,
  // area 1/2.
  const auto mesh = build_mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}});
  int face = -1;
  for (int t = 0; t < 4; ++t) {
    const auto& tri = mesh.triangle(t);
    if (std::find(tri.begin(), tri.end(), 3) == tri.end()) face = t;
  }
  ASSERT_GE(face, 0);
  const double expected_k[3][3] = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
  const auto k = local_stiffness(mesh, face);
  const auto m = local_mass(mesh, face);
  const auto& tri = mesh.triangle(face);
  for (int a = 0; a < 3; ++a) {
    for (int b = 0; b < 3; ++b) {
      const int la = local_index(tri, a), lb = local_index(tri, b);
      EXPECT_NEAR(k(la, lb), expected_k[a][b], 1e-15);
      EXPECT_NEAR(m(la, lb), (a == b ? 2.0 : 1.0) / 24.0, 1e-15);
    }
  }
}

TEST(Fem, HatGradientsReproduceAffineFunctions) {
  // A P1 interpolant of an affine function has the tangential part of its
  // gradient on every face; cube face normals are the coordinate axes.
  const auto mesh = cube_mesh(3);
  const Vec3 a(0.3, -1.2, 2.0);
  ScalarField u{std::vector<double>(mesh.num_vertices()), mesh.generation()};
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) u.values[i] = a.dot(mesh.vertex(static_cast<int>(i))) + 0.7;
  const auto g = fe_gradient(mesh, u);
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const Vec3 n = mesh.triangle_normal(static_cast<int>(t));
    EXPECT_NEAR((g.values[t] - (a - a.dot(n) * n)).norm(), 0.0, 1e-14);
    for (int axis = 0; axis < 3; ++axis) {
      if (std::abs(n[axis]) > 0.5) EXPECT_NEAR(g.values[t][axis], 0.0, 1e-14);
    }
  }
}

TEST(Fem, GlobalStiffnessKernelAndMassTotal) {
  const auto mesh = projected_icosphere(3, highcurv_surface());
  const auto k = assemble_stiffness(mesh);
  const auto m = assemble_mass(mesh);
  const Vector ones = Vector::Ones(static_cast<Eigen::Index>(mesh.num_vertices()));
  EXPECT_LE(k.multiply(ones).lpNorm<Eigen::Infinity>(), 1e-12);
  EXPECT_NEAR(ones.dot(m.multiply(ones)), mesh.area(), 1e-12 * mesh.area());
  EXPECT_LE(k.symmetry_defect(), 1e-14);
  EXPECT_LE(m.symmetry_defect(), 1e-14);
}

TEST(Solver, CgMatchesDenseCholesky) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal;
  const int n = 40;
  Eigen::MatrixXd b(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) b(i, j) = normal(rng);
  const Eigen::MatrixXd a = b * b.transpose() + n * Eigen::MatrixXd::Identity(n, n);
  std::vector<Triplet> triplets;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) triplets.push_back({i, j, a(i, j)});
  const auto csr = CsrMatrix::from_triplets(n, triplets);
  Vector rhs(n);
  for (int i = 0; i < n; ++i) rhs[i] = normal(rng);
  const auto r = solve_spd(csr, rhs, {1e-13, 0});
  const Vector reference = a.llt().solve(rhs);
  EXPECT_LE((r.x - reference).norm(), 1e-10 * reference.norm());
  EXPECT_LE(r.relative_residual, 1e-13);
  EXPECT_GT(r.iterations, 0);
}

TEST(Solver, NonConvergenceIsReported) {
  const int n = 50;
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    t.push_back({i, i, 2.0});
    if (i + 1 < n) {
      t.push_back({i, i + 1, -1.0});
      t.push_back({i + 1, i, -1.0});
    }
  }
  const Vector rhs = Vector::Ones(n);
  try {
    solve_spd(CsrMatrix::from_triplets(n, t), rhs, {1e-14, 3});
    FAIL() << "expected non-convergence";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonConvergence);
  }
}

TEST(Solver, MeanZeroSolveRecoversManufacturedVector) {
  const auto mesh = projected_icosphere(3, sphere_surface());
  const auto k = assemble_stiffness(mesh);
  const auto m = assemble_mass(mesh);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1, 1);
  Vector w(static_cast<Eigen::Index>(mesh.num_vertices()));
  for (auto& x : w) x = u(rng);
  const Vector m1 = m.multiply(Vector::Ones(w.size()));
  w.array() -= m1.dot(w) / m1.sum();
  const auto r = solve_mean_zero(k, k.multiply(w), m, {1e-13, 0});
  EXPECT_LE((r.x - w).lpNorm<Eigen::Infinity>(), 1e-8);
  EXPECT_NEAR(m1.dot(r.x), 0.0, 1e-12);
}

TEST(Fem, InterpolantOfAffineDataHasZeroDistanceToItself) {
  const auto mesh = projected_icosphere(2, sphere_surface());
  const auto p = affine_problem(sphere_surface(), Vec3(0, 0, 1));
  const auto ui = interpolate(mesh, p);
  EXPECT_EQ(interpolant_gradient_distance(mesh, ui, ui), 0.0);
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) EXPECT_EQ(ui.values[i], mesh.vertex(static_cast<int>(i))[2]);
}

TEST(Fem, EnergyErrorIsFirstOrderInMeshSize) {
  // -Lap z = 2z on the unit sphere (mean-zero path); adding u to the
  // operator exercises the SPD path.
  for (double c : {0.0, 1.0}) {
    auto p = affine_problem(sphere_surface(), Vec3(0, 0, 1));
    p.zeroth_order_coefficient = c;
    std::vector<double> err, h;
    for (int level = 2; level <= 4; ++level) {
      const auto mesh = projected_icosphere(level, p.surface);
      const auto sol = fe_solve(mesh, p);
      EXPECT_LE(sol.relative_residual, 1e-10);
      err.push_back(error_norms(mesh, p, sol.u).De);
      h.push_back(mesh.h_max());
    }
    for (std::size_t l = 1; l < err.size(); ++l) {
      EXPECT_NEAR(std::log(err[l - 1] / err[l]) / std::log(h[l - 1] / h[l]), 1.0, 0.1) << "c = " << c;
    }
  }
}

TEST(Fem, SuperclosenessOnSmoothProblem) {
  // |grad(u_I - u_h)| decays faster than the energy error itself.
  const auto p = make_problem("torus_xy");
  std::vector<double> de, dei;
  for (int n : {20, 40}) {
    const auto mesh = chevron_torus_mesh(n, n / 2);
    const auto sol = fe_solve(mesh, p);
    const auto e = error_norms(mesh, p, sol.u);
    de.push_back(e.De);
    dei.push_back(e.De_I);
  }
  EXPECT_GT(std::log2(dei[0] / dei[1]), std::log2(de[0] / de[1]) + 0.5);
}

TEST(Fem, MismatchedGenerationIsRejected) {
  const auto coarse = projected_icosphere(1, sphere_surface());
  const auto fine = uniform_refine(coarse);
  const auto u = interpolate(coarse, affine_problem(sphere_surface(), Vec3(1, 0, 0)));
  ScalarField resized{std::vector<double>(fine.num_vertices(), 0.0), coarse.generation()};
  try {
    fe_gradient(fine, resized);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MismatchedGeneration);
  }
  EXPECT_THROW(fe_gradient(fine, u), Error);
}
