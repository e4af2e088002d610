#include "pppr/fem.hpp"
#include "pppr/generators.hpp"
#include "pppr/recovery.hpp"
#include "pppr/selftest.hpp"

#include <gtest/gtest.h>

#include <Eigen/Geometry>

#include <random>

using namespace pppr;

namespace {

ScalarField sample(const SurfaceMesh& mesh, const ScalarFn& f) {
  ScalarField u{std::vector<double>(mesh.num_vertices()), mesh.generation()};
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) u.values[i] = f(mesh.vertex(static_cast<int>(i)));
  return u;
}

Mat3 random_rotation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  return Eigen::Quaterniond(n(rng), n(rng), n(rng), n(rng)).normalized().toRotationMatrix();
}

}  // namespace

TEST(Frame, OrthonormalAndRightHanded) {
  const auto mesh = projected_icosphere(2, highcurv_surface());
  const auto s = highcurv_surface();
  for (auto mode : {NormalMode::Exact, NormalMode::SimpleAverage, NormalMode::AreaWeighted}) {
    for (int i = 0; i < static_cast<int>(mesh.num_vertices()); i += 7) {
      const auto f = build_frame(mesh, i, mode, &s);
      const Mat3 b = f.basis();
      EXPECT_LE((b.transpose() * b - Mat3::Identity()).norm(), 1e-14);
      EXPECT_NEAR(b.determinant(), 1.0, 1e-14);
      EXPECT_EQ(f.center, mesh.vertex(i));
      // Outward mesh orientation: averaged normals agree with the exact one.
      EXPECT_GT(f.normal.dot(unit_normal(s, mesh.vertex(i))), 0.9);
    }
  }
  EXPECT_THROW(build_frame(mesh, 0, NormalMode::Exact), Error);
}

TEST(Frame, AreaWeightedNormalOnFlatFaceIsFaceNormal) {
  const auto mesh = cube_mesh(4);
  for (int i = 0; i < static_cast<int>(mesh.num_vertices()); ++i) {
    const Vec3& x = mesh.vertex(i);
    int axis = -1, on_boundary = 0;
    for (int k = 0; k < 3; ++k) {
      if (std::abs(std::abs(x[k]) - 1.0) < 1e-15) {
        axis = k;
        ++on_boundary;
      }
    }
    if (on_boundary != 1) continue;  // face interior only
    const auto f = build_frame(mesh, i, NormalMode::AreaWeighted);
    EXPECT_NEAR((f.normal - std::copysign(1.0, x[axis]) * Vec3::Unit(axis)).norm(), 0.0, 1e-14);
  }
}

TEST(Fit, ValuePreservingQuadraticIsExactForQuadraticData) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(-1, 1);
  const std::array<double, 5> coeff{0.4, -1.3, 2.0, 0.7, -0.25};
  const double c0 = 0.9;
  auto q = [&](const Vec2& y) {
    return c0 + coeff[0] * y[0] + coeff[1] * y[1] + coeff[2] * y[0] * y[0] + coeff[3] * y[0] * y[1] + coeff[4] * y[1] * y[1];
  };
  for (double scale : {1e-3, 1.0, 50.0}) {
    std::vector<Vec2> zeta;
    std::vector<double> data;
    for (int j = 0; j < 9; ++j) {
      zeta.emplace_back(scale * u(rng), scale * u(rng));
      data.push_back(q(zeta.back()));
    }
    const auto fit = fit_quadratic_value_preserving(zeta, data, c0, scale);
    EXPECT_EQ(fit.c0, c0);
    for (int k = 0; k < 5; ++k) {
      EXPECT_NEAR(fit.a[static_cast<std::size_t>(k)], coeff[static_cast<std::size_t>(k)], 1e-9 * std::max(1.0, std::abs(coeff[static_cast<std::size_t>(k)])))
          << "scale " << scale << " k " << k;
    }
    EXPECT_LE(fit.residual_norm, 1e-10);
    const auto full = fit_quadratic_full(zeta, data, scale);
    EXPECT_NEAR(full.c0, c0, 1e-9);
  }
}

TEST(Fit, ValuePreservingFitPinsCenterEvenForNoisyData) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<Vec2> zeta;
  std::vector<double> data;
  for (int j = 0; j < 12; ++j) {
    zeta.emplace_back(u(rng), u(rng));
    data.push_back(u(rng));
  }
  const auto fit = fit_quadratic_value_preserving(zeta, data, 3.25, 1.0);
  EXPECT_EQ(fit(Vec2::Zero()), 3.25);
  EXPECT_GT(fit.residual_norm, 0.0);
}

TEST(Fit, CollinearPointsAreRankDeficient) {
  std::vector<Vec2> zeta;
  std::vector<double> data;
  for (int j = 1; j <= 8; ++j) {
    zeta.emplace_back(0.1 * j, -0.2 * j);
    data.push_back(j);
  }
  try {
    fit_quadratic_value_preserving(zeta, data, 0.0, 1.0);
    FAIL() << "expected rank deficiency";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RankDeficiency);
  }
  EXPECT_THROW(fit_quadratic_value_preserving(std::span(zeta).first(4), std::span(data).first(4), 0.0, 1.0), Error);
  EXPECT_THROW(fit_quadratic_value_preserving(zeta, std::span(data).first(3), 0.0, 1.0), Error);
}

TEST(ChartGradient, TiltedPlaneGivesTangentialProjection) {
  // On the plane zeta -> (zeta, s1 z1 + s2 z2), an ambient affine u = a . x
  // has parameter gradient (a1 + a3 s1, a2 + a3 s2) and surface gradient
  // a - (a . n) n.
  const Vec2 s(0.6, -1.7);
  const Vec3 a(0.2, 1.1, -0.8);
  const Vec2 p(a[0] + a[2] * s[0], a[1] + a[2] * s[1]);
  LocalFrame frame;
  const Vec3 n = Vec3(-s[0], -s[1], 1.0).normalized();
  EXPECT_NEAR((chart_gradient(p, s, frame) - (a - a.dot(n) * n)).norm(), 0.0, 1e-15);
  // Flat chart reduces to the parameter gradient.
  EXPECT_NEAR((chart_gradient(p, Vec2::Zero(), frame) - Vec3(p[0], p[1], 0)).norm(), 0.0, 1e-15);
}

TEST(Patch, GrowsUntilAdmissible) {
  const auto mesh = projected_icosphere(2, sphere_surface());
  const auto frame = build_frame(mesh, 0, NormalMode::AreaWeighted);
  const auto small = select_patch(mesh, 0, frame);
  EXPECT_GE(small.patch.member_vertices.size(), 7u);
  EXPECT_LE(small.condition, 1e8);
  PatchOptions big;
  big.min_members = 30;
  const auto grown = select_patch(mesh, 0, frame, big);
  EXPECT_GT(grown.patch.ring_parameter, small.patch.ring_parameter);
  EXPECT_GE(grown.patch.member_vertices.size(), 30u);
  EXPECT_EQ(grown.zeta.front(), Vec2::Zero());
  EXPECT_EQ(grown.height.front(), 0.0);
  PatchOptions impossible;
  impossible.min_members = 1000;
  impossible.max_ring = 2;
  try {
    select_patch(mesh, 0, frame, impossible);
    FAIL() << "expected growth failure";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::PatchGrowthFailure);
    EXPECT_EQ(e.index(), 0);
  }
}

TEST(Recovery, FlatPatchesReproduceQuadraticsAndAgreeWithPpr) {
  // Jittered cube: vertices whose whole patch lies in one face see planar
  // data, where every quadratic is reproduced and PPPR coincides with PPR.
  std::mt19937_64 rng(3);
  const auto mesh = detail::jittered_cube(8, 0.2, rng);
  const Mat3 q = (Mat3() << 1.0, 0.3, -0.2, 0.3, -0.5, 0.4, -0.2, 0.4, 0.8).finished();
  const Vec3 a(0.5, -0.7, 0.2);
  const auto problem = quadratic_problem(sphere_surface(), q, a);
  const auto u = sample(mesh, problem.u);
  const auto pppr = recover_pppr(mesh, u);
  const auto ppr = recover(RecoveryMethod::PprAverage, mesh, u);
  int flat = 0;
  for (int i = 0; i < static_cast<int>(mesh.num_vertices()); ++i) {
    const auto r = recover_pppr_at(mesh, u, i);
    const int axis = detail::flat_patch_axis(mesh, r.patch.patch.member_vertices);
    if (axis < 0) continue;
    ++flat;
    Vec3 g = q * mesh.vertex(i) + a;
    g[axis] = 0.0;
    EXPECT_NEAR((pppr[static_cast<std::size_t>(i)] - g).norm(), 0.0, 1e-9 * g.norm()) << i;
    EXPECT_NEAR((pppr[static_cast<std::size_t>(i)] - ppr[static_cast<std::size_t>(i)]).norm(), 0.0, 1e-12) << i;
  }
  EXPECT_GT(flat, 100);
}

TEST(Recovery, AveragingIsExactForAffineDataOnAFlatFace) {
  const auto mesh = cube_mesh(6);
  const Vec3 a(1.0, 2.0, -0.5);
  const auto u = sample(mesh, [&](const Vec3& x) { return a.dot(x); });
  for (auto m : {RecoveryMethod::SimpleAverage, RecoveryMethod::WeightedAverage}) {
    const auto g = recover(m, mesh, u);
    for (int i = 0; i < static_cast<int>(mesh.num_vertices()); ++i) {
      const Vec3& x = mesh.vertex(i);
      int on = 0, axis = -1;
      for (int k = 0; k < 3; ++k) {
        if (std::abs(std::abs(x[k]) - 1.0) < 1e-15) {
          ++on;
          axis = k;
        }
      }
      if (on != 1) continue;
      Vec3 expected = a;
      expected[axis] = 0.0;
      EXPECT_NEAR((g[static_cast<std::size_t>(i)] - expected).norm(), 0.0, 1e-13);
    }
  }
}

TEST(Recovery, RigidMotionCommutesWithRecovery) {
  const auto s = highcurv_surface();
  const auto mesh = projected_icosphere(3, s);
  const Mat3 r = random_rotation(17);
  const Vec3 shift(0.3, -2.0, 1.0);
  std::vector<Vec3> moved;
  for (const auto& v : mesh.vertices()) moved.push_back(r * v + shift);
  const auto moved_mesh = build_mesh(moved, mesh.triangles());
  const auto u = sample(mesh, [](const Vec3& x) { return std::sin(x[0]) * x[1] + x[2] * x[2]; });
  ScalarField moved_u = u;
  moved_u.generation = moved_mesh.generation();
  for (auto m : {RecoveryMethod::Pppr, RecoveryMethod::PprAverage, RecoveryMethod::SimpleAverage,
                 RecoveryMethod::WeightedAverage}) {
    const auto g = recover(m, mesh, u);
    const auto h = recover(m, moved_mesh, moved_u);
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) worst = std::max(worst, (r * g[i] - h[i]).norm());
    EXPECT_LE(worst, 1e-9) << method_name(m);
  }
}

TEST(Recovery, PpprIsIndependentOfTheTangentBasis) {
  const auto mesh = projected_icosphere(3, dziuk_surface());
  const auto u = sample(mesh, [](const Vec3& x) { return x[0] * x[1] + std::exp(x[2]); });
  for (int i = 0; i < static_cast<int>(mesh.num_vertices()); i += 11) {
    const auto base = build_frame(mesh, i, NormalMode::AreaWeighted);
    LocalFrame turned = base;
    const double c = std::cos(1.1), sn = std::sin(1.1);
    turned.t1 = c * base.t1 + sn * base.t2;
    turned.t2 = -sn * base.t1 + c * base.t2;
    const Vec3 g0 = recover_pppr_at(mesh, u, i, base).gradient;
    const Vec3 g1 = recover_pppr_at(mesh, u, i, turned).gradient;
    EXPECT_LE((g0 - g1).norm(), 1e-10 * std::max(1.0, g0.norm())) << i;
  }
}

TEST(Recovery, PpprGradientIsTangentToTheFittedSurface) {
  const auto mesh = projected_icosphere(3, highcurv_surface());
  const auto u = sample(mesh, [](const Vec3& x) { return x[0] + 2 * x[2]; });
  for (int i = 0; i < static_cast<int>(mesh.num_vertices()); i += 5) {
    const auto r = recover_pppr_at(mesh, u, i);
    const Vec2 s = r.surface_fit.gradient_at_origin();
    const Vec3 fitted_normal = (-s[0] * r.frame.t1 - s[1] * r.frame.t2 + r.frame.normal).normalized();
    EXPECT_NEAR(r.gradient.dot(fitted_normal), 0.0, 1e-13);
  }
}

TEST(Recovery, InterpolantRecoveryConvergesFasterThanFirstOrder) {
  // Recovered gradients of the interpolant of a smooth function on the
  // sphere: second order in h on these nearly uniform meshes.
  const auto p = affine_problem(sphere_surface(), Vec3(0.3, 0, 1));
  std::vector<double> err, h;
  for (int level = 3; level <= 5; ++level) {
    const auto mesh = projected_icosphere(level, p.surface);
    const auto g = recover_pppr(mesh, interpolate(mesh, p));
    err.push_back(error_norms(mesh, p, interpolate(mesh, p), &g).De_recovered.value());
    h.push_back(mesh.h_max());
  }
  for (std::size_t l = 1; l < err.size(); ++l) {
    EXPECT_GT(std::log(err[l - 1] / err[l]) / std::log(h[l - 1] / h[l]), 1.6);
  }
}

TEST(Recovery, MethodNamesRoundTrip) {
  for (auto m : {RecoveryMethod::Pppr, RecoveryMethod::PprExact, RecoveryMethod::PprAverage, RecoveryMethod::SimpleAverage,
                 RecoveryMethod::WeightedAverage}) {
    EXPECT_EQ(parse_method(method_name(m)), m);
  }
  try {
    parse_method("zz");
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Config);
  }
}

TEST(Recovery, PprExactNeedsTheSurface) {
  const auto mesh = projected_icosphere(1, sphere_surface());
  const auto u = sample(mesh, [](const Vec3& x) { return x[0]; });
  EXPECT_THROW(recover(RecoveryMethod::PprExact, mesh, u), Error);
  const auto s = sphere_surface();
  EXPECT_NO_THROW(recover(RecoveryMethod::PprExact, mesh, u, &s));
}

TEST(Recovery, StaleFieldIsRejected) {
  const auto mesh = projected_icosphere(1, sphere_surface());
  auto u = sample(mesh, [](const Vec3& x) { return x[0]; });
  u.generation = 4;
  try {
    recover_pppr(mesh, u);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MismatchedGeneration);
  }
}
