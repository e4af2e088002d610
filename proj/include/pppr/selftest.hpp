#ifndef PPPR_SELFTEST_HPP
#define PPPR_SELFTEST_HPP

// Invariant suite behind `pppr_cli selftest`: every check compares the
// library against an independent oracle and reports the measured value.

#include "pppr/estimator.hpp"
#include "pppr/generators.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <random>
#include <string>
#include <vector>

namespace pppr {

struct SelftestCheck {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct SelftestReport {
  std::vector<SelftestCheck> checks;

  bool all_passed() const {
    for (const auto& c : checks) {
      if (!c.passed) return false;
    }
    return !checks.empty();
  }

  void print(std::ostream& os) const {
    for (const auto& c : checks) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "measured=%.3e tol=%.1e", c.measured, c.tolerance);
      os << (c.passed ? "PASS " : "FAIL ") << c.name << "  " << buf;
      if (!c.detail.empty()) os << "  (" << c.detail << ")";
      os << '\n';
    }
  }
};

inline SelftestCheck make_check(std::string name, double measured, double tolerance, std::string detail = {}) {
  return {std::move(name), measured <= tolerance, measured, tolerance, std::move(detail)};
}

/// Largest |phi| over the vertices, with the worst vertex named.
inline SelftestCheck check_mesh_on_surface(const SurfaceMesh& mesh, const LevelSetSurface& surface, double tol = 1e-12) {
  const SurfaceResidual r = surface_residual(mesh, surface);
  return make_check("mesh vertices on " + surface.name, r.max_abs_phi, tol, "worst vertex " + std::to_string(r.worst_vertex));
}

/// Regular parametrization (s, t) -> r(s, t) with its partial derivatives.
struct Chart {
  std::function<Vec3(const Vec2&)> r;
  std::function<std::array<Vec3, 2>(const Vec2&)> dr;
};

inline Chart torus_chart() {
  return {[](const Vec2& p) -> Vec3 {
            return {(4 + std::cos(p[1])) * std::cos(p[0]), (4 + std::cos(p[1])) * std::sin(p[0]), std::sin(p[1])};
          },
          [](const Vec2& p) -> std::array<Vec3, 2> {
            const double cu = std::cos(p[0]), su = std::sin(p[0]), cv = std::cos(p[1]), sv = std::sin(p[1]);
            return {Vec3(-(4 + cv) * su, (4 + cv) * cu, 0), Vec3(-sv * cu, -sv * su, cv)};
          }};
}

/// Polar angle and azimuth on the unit sphere.
inline Chart sphere_chart() {
  return {[](const Vec2& p) -> Vec3 {
            return {std::sin(p[0]) * std::cos(p[1]), std::sin(p[0]) * std::sin(p[1]), std::cos(p[0])};
          },
          [](const Vec2& p) -> std::array<Vec3, 2> {
            const double ct = std::cos(p[0]), st = std::sin(p[0]), cp = std::cos(p[1]), sp = std::sin(p[1]);
            return {Vec3(ct * cp, ct * sp, -st), Vec3(-st * sp, st * cp, 0)};
          }};
}

/// Sphere chart pushed through d -> (2 d1, d2, w(2 d1) d3 / 2).
inline Chart highcurv_chart() {
  const Chart sphere = sphere_chart();
  return {[sphere](const Vec2& p) -> Vec3 {
            const Vec3 d = sphere.r(p);
            const double x = 2 * d[0];
            return {x, d[1], 0.5 * (1 + 0.5 * std::sin(std::numbers::pi * x)) * d[2]};
          },
          [sphere](const Vec2& p) -> std::array<Vec3, 2> {
            using std::numbers::pi;
            const Vec3 d = sphere.r(p);
            const auto dd = sphere.dr(p);
            const double x = 2 * d[0];
            const double w = 1 + 0.5 * std::sin(pi * x), dw = 0.5 * pi * std::cos(pi * x);
            std::array<Vec3, 2> out;
            for (int k = 0; k < 2; ++k) {
              const Vec3& e = dd[static_cast<std::size_t>(k)];
              out[static_cast<std::size_t>(k)] = Vec3(2 * e[0], e[1], dw * 2 * e[0] * d[2] / 2 + 0.5 * w * e[2]);
            }
            return out;
          }};
}

/// (cos^2 t + sin t cos p, sin t sin p, cos t) on (x - z^2)^2 + y^2 + z^2 = 1.
inline Chart dziuk_chart() {
  return {[](const Vec2& p) -> Vec3 {
            const double ct = std::cos(p[0]), st = std::sin(p[0]);
            return {ct * ct + st * std::cos(p[1]), st * std::sin(p[1]), ct};
          },
          [](const Vec2& p) -> std::array<Vec3, 2> {
            const double ct = std::cos(p[0]), st = std::sin(p[0]), cp = std::cos(p[1]), sp = std::sin(p[1]);
            return {Vec3(-2 * ct * st + ct * cp, ct * sp, -st), Vec3(-st * sp, st * cp, 0)};
          }};
}

namespace detail {

/// Fourth-order central difference of f at p along parameter k.
template <class F>
auto central_difference(F&& f, Vec2 p, int k, double h) {
  Vec2 e = Vec2::Zero();
  e[k] = h;
  return (-f(p + 2 * e) + 8.0 * f(p + e) - 8.0 * f(p - e) + f(p - 2 * e)) / (12.0 * h);
}

inline Eigen::Matrix2d metric(const std::array<Vec3, 2>& dr) {
  Eigen::Matrix2d g;
  g << dr[0].dot(dr[0]), dr[0].dot(dr[1]), dr[1].dot(dr[0]), dr[1].dot(dr[1]);
  return g;
}

}  // namespace detail

/// Surface gradient g^{ij} d_j(u o r) d_i r, with d_j by finite differences.
inline Vec3 chart_surface_gradient(const Chart& chart, const ScalarFn& u, const Vec2& p, double h = 1e-3) {
  auto uc = [&](const Vec2& q) { return u(chart.r(q)); };
  const Vec2 du(detail::central_difference(uc, p, 0, h), detail::central_difference(uc, p, 1, h));
  const auto dr = chart.dr(p);
  const Vec2 c = detail::metric(dr).inverse() * du;
  return c[0] * dr[0] + c[1] * dr[1];
}

/// (1/sqrt g) d_i(sqrt g g^{ij} d_j(u o r)), all derivatives of u by finite
/// differences.
inline double chart_laplacian(const Chart& chart, const ScalarFn& u, const Vec2& p, double h = 1e-3) {
  auto uc = [&](const Vec2& q) { return u(chart.r(q)); };
  auto flux = [&](const Vec2& q) -> Vec2 {
    const Vec2 du(detail::central_difference(uc, q, 0, h), detail::central_difference(uc, q, 1, h));
    const Eigen::Matrix2d g = detail::metric(chart.dr(q));
    return std::sqrt(g.determinant()) * (g.inverse() * du);
  };
  const double div = detail::central_difference([&](const Vec2& q) { return flux(q)[0]; }, p, 0, h) +
                     detail::central_difference([&](const Vec2& q) { return flux(q)[1]; }, p, 1, h);
  return div / std::sqrt(detail::metric(chart.dr(p)).determinant());
}

namespace detail {

struct ChartCase {
  ManufacturedProblem problem;
  Chart chart;
};

inline std::vector<ChartCase> chart_cases() {
  return {{make_problem("torus_xy"), torus_chart()},
          {make_problem("highcurv_x1x2"), highcurv_chart()},
          {make_problem("sphere_singular"), sphere_chart()},
          {make_problem("dziuk_peak"), dziuk_chart()}};
}

/// The cube mesh with every face-interior vertex moved randomly within its
/// face by up to `amplitude` grid spacings.
inline SurfaceMesh jittered_cube(int n, double amplitude, std::mt19937_64& rng) {
  SurfaceMesh cube = cube_mesh(n);
  std::uniform_real_distribution<double> jitter(-amplitude * 2.0 / n, amplitude * 2.0 / n);
  std::vector<Vec3> v = cube.vertices();
  for (auto& x : v) {
    int on_face = 0, axis = -1;
    for (int k = 0; k < 3; ++k) {
      if (std::abs(std::abs(x[k]) - 1.0) < 1e-14) {
        ++on_face;
        axis = k;
      }
    }
    if (on_face != 1) continue;
    for (int k = 0; k < 3; ++k) {
      if (k != axis) x[k] += jitter(rng);
    }
  }
  return build_mesh(std::move(v), cube.triangles());
}

/// Face axis when every member of the patch lies on one face, else -1.
inline int flat_patch_axis(const SurfaceMesh& mesh, const std::vector<int>& members) {
  for (int axis = 0; axis < 3; ++axis) {
    const double side = mesh.vertex(members.front())[axis];
    if (std::abs(std::abs(side) - 1.0) > 1e-14) continue;
    bool flat = true;
    for (int v : members) flat = flat && mesh.vertex(v)[axis] == side;
    if (flat) return axis;
  }
  return -1;
}

/// Reference Dörfler set: the smallest count m whose m largest indicators
/// reach theta of the squared total, then every index strictly above the
/// m-th largest value plus the lowest-indexed ties.
inline std::vector<int> dorfler_reference(const std::vector<double>& eta, double theta) {
  std::vector<double> sorted = eta;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double total = 0.0;
  for (double e : eta) total += e * e;
  std::size_t m = 0;
  double acc = 0.0;
  while (m < sorted.size() && (m == 0 || acc < theta * total) && sorted[m] > 0) {
    acc += sorted[m] * sorted[m];
    ++m;
  }
  if (m == 0) return {};
  const double cut = sorted[m - 1];
  std::size_t above = 0;
  for (double e : eta) above += e > cut ? 1 : 0;
  std::size_t ties_needed = m - above;
  std::vector<int> out;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    if (eta[i] > cut) {
      out.push_back(static_cast<int>(i));
    } else if (eta[i] == cut && ties_needed > 0) {
      out.push_back(static_cast<int>(i));
      --ties_needed;
    }
  }
  return out;
}

}  // namespace detail

/// Runs every invariant check. Randomized inputs derive from `seed`; the
/// outcome must not depend on it.
inline SelftestReport run_selftest(std::uint64_t seed = 1) {
  SelftestReport report;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto add = [&](SelftestCheck c) { report.checks.push_back(std::move(c)); };
  auto guarded = [&](const std::string& name, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      add({name, false, std::numeric_limits<double>::infinity(), 0.0, std::string("threw: ") + e.what()});
    }
  };

  guarded("torus mesh on surface", [&] {
    auto c = check_mesh_on_surface(chevron_torus_mesh(20, 10), torus_surface(), 1e-12);
    c.name = "torus mesh on surface";
    add(c);
  });

  guarded("value preservation", [&] {
    const auto s = highcurv_surface();
    const SurfaceMesh mesh = projected_icosphere(2, s);
    ScalarField u{std::vector<double>(mesh.num_vertices()), mesh.generation()};
    for (auto& v : u.values) v = 10.0 * unit(rng);
    double worst = 0.0;
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
      const auto r = recover_pppr_at(mesh, u, static_cast<int>(i));
      worst = std::max(worst, std::abs(r.data_fit(Vec2::Zero()) - u.values[i]) / std::max(1.0, std::abs(u.values[i])));
      worst = std::max(worst, std::abs(r.surface_fit(Vec2::Zero())));
    }
    add(make_check("value preservation", worst, 1e-14));
  });

  guarded("frame orthonormality", [&] {
    const SurfaceMesh mesh = projected_icosphere(2, highcurv_surface());
    double worst = 0.0;
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
      const Mat3 b = build_frame(mesh, static_cast<int>(i), NormalMode::AreaWeighted).basis();
      worst = std::max(worst, (b.transpose() * b - Mat3::Identity()).cwiseAbs().maxCoeff());
      worst = std::max(worst, std::abs(b.determinant() - 1.0));
    }
    add(make_check("frame orthonormality", worst, 1e-14));
  });

  // Flat patches on a jittered cube: PPPR and PPR share frames and fits.
  const SurfaceMesh cube = detail::jittered_cube(8, 0.25, rng);
  guarded("planar quadratic exactness", [&] {
    Mat3 q;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) q(r, c) = unit(rng);
    q = 0.5 * (q + q.transpose()).eval();
    const Vec3 a(unit(rng), unit(rng), unit(rng));
    ScalarField u{std::vector<double>(cube.num_vertices()), cube.generation()};
    for (std::size_t i = 0; i < cube.num_vertices(); ++i) {
      const Vec3& x = cube.vertex(static_cast<int>(i));
      u.values[i] = 0.5 * x.dot(q * x) + a.dot(x) + 0.3;
    }
    double worst = 0.0;
    int tested = 0;
    for (std::size_t i = 0; i < cube.num_vertices(); ++i) {
      const auto r = recover_pppr_at(cube, u, static_cast<int>(i));
      const int axis = detail::flat_patch_axis(cube, r.patch.patch.member_vertices);
      if (axis < 0) continue;
      const Vec3& x = cube.vertex(static_cast<int>(i));
      Vec3 exact = q * x + a;
      exact[axis] = 0.0;
      worst = std::max(worst, (r.gradient - exact).norm() / std::max(1.0, exact.norm()));
      ++tested;
    }
    add(make_check("planar quadratic exactness", worst, 1e-9, std::to_string(tested) + " flat patches"));
  });

  guarded("flat-mesh PPPR = PPR", [&] {
    ScalarField u{std::vector<double>(cube.num_vertices()), cube.generation()};
    for (auto& v : u.values) v = unit(rng);
    const VectorField pppr = recover_pppr(cube, u);
    const VectorField ppr = recover_ppr(cube, u, nullptr);
    double worst = 0.0;
    int tested = 0;
    for (std::size_t i = 0; i < cube.num_vertices(); ++i) {
      const auto r = recover_pppr_at(cube, u, static_cast<int>(i));
      if (detail::flat_patch_axis(cube, r.patch.patch.member_vertices) < 0) continue;
      worst = std::max(worst, (pppr[i] - ppr[i]).norm() / std::max(1.0, ppr[i].norm()));
      ++tested;
    }
    add(make_check("flat-mesh PPPR = PPR", worst, 1e-12, std::to_string(tested) + " flat patches"));
  });

  guarded("parametrization invariance", [&] {
    // Surface gradient from a chart equals the ambient tangential projection.
    std::uniform_real_distribution<double> polar(0.3, std::numbers::pi - 0.3), angle(0.0, 2 * std::numbers::pi);
    double worst = 0.0;
    for (const auto& c : detail::chart_cases()) {
      for (int k = 0; k < 8; ++k) {
        const Vec2 p(c.problem.name == "torus_xy" ? angle(rng) : polar(rng), angle(rng));
        const Vec3 x = c.chart.r(p);
        const Vec3 via_chart = chart_surface_gradient(c.chart, c.problem.u, p);
        const Vec3 ambient = tangential_gradient(c.problem, x);
        worst = std::max(worst, (via_chart - ambient).norm() / std::max(1.0, ambient.norm()));
      }
    }
    // PPPR does not depend on how the tangent plane is parametrized.
    const SurfaceMesh mesh = projected_icosphere(2, highcurv_surface());
    ScalarField u{std::vector<double>(mesh.num_vertices()), mesh.generation()};
    for (auto& v : u.values) v = unit(rng);
    for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
      const int vi = static_cast<int>(i);
      LocalFrame f = build_frame(mesh, vi, NormalMode::AreaWeighted);
      const Vec3 base = recover_pppr_at(mesh, u, vi, f).gradient;
      const double alpha = angle(rng);
      const Vec3 t1 = std::cos(alpha) * f.t1 + std::sin(alpha) * f.t2;
      f.t2 = f.normal.cross(t1);
      f.t1 = t1;
      const Vec3 rotated = recover_pppr_at(mesh, u, vi, f).gradient;
      worst = std::max(worst, (base - rotated).norm() / std::max(1.0, base.norm()));
    }
    add(make_check("parametrization invariance", worst, 1e-8));
  });

  guarded("tangential operators vs chart FD", [&] {
    std::uniform_real_distribution<double> polar(0.3, std::numbers::pi - 0.3), angle(0.0, 2 * std::numbers::pi);
    double worst = 0.0;
    std::string where;
    for (const auto& c : detail::chart_cases()) {
      for (int k = 0; k < 8; ++k) {
        const Vec2 p(c.problem.name == "torus_xy" ? angle(rng) : polar(rng), angle(rng));
        const Vec3 x = c.chart.r(p);
        const double fd = chart_laplacian(c.chart, c.problem.u, p);
        const double exact = tangential_laplacian(c.problem, x);
        const double rel = std::abs(fd - exact) / std::max(1.0, std::abs(exact));
        if (rel > worst) {
          worst = rel;
          where = c.problem.name;
        }
      }
    }
    add(make_check("tangential operators vs chart FD", worst, 1e-6, "worst on " + where));
  });

  guarded("local stiffness and mass", [&] {
    const SurfaceMesh tet = build_mesh({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1)},
                                       {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}});
    // Triangle 0 is the unit right triangle in the z = 0 plane.
    const auto k = local_stiffness(tet, 0);
    const auto m = local_mass(tet, 0);
    const double k_ref[3][3] = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
    double worst = 0.0;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        const double m_ref = (r == c ? 2.0 : 1.0) / 24.0;
        worst = std::max(worst, std::abs(k(r, c) - k_ref[r][c]));
        worst = std::max(worst, std::abs(m(r, c) - m_ref));
      }
    }
    add(make_check("local stiffness and mass", worst, 1e-12));
  });

  guarded("stiffness kernel and mass total", [&] {
    const SurfaceMesh mesh = projected_icosphere(2, highcurv_surface());
    const CsrMatrix k = assemble_stiffness(mesh);
    const CsrMatrix m = assemble_mass(mesh);
    const Vector ones = Vector::Ones(static_cast<Eigen::Index>(mesh.num_vertices()));
    double kmax = 0.0;
    for (double v : k.values()) kmax = std::max(kmax, std::abs(v));
    const double kernel = k.multiply(ones).cwiseAbs().maxCoeff() / kmax;
    const double total = std::abs(ones.dot(m.multiply(ones)) - mesh.area()) / mesh.area();
    add(make_check("stiffness kernel and mass total", std::max({kernel, total, k.symmetry_defect()}), 1e-12));
  });

  guarded("Dorfler greedy oracle", [&] {
    long mismatches = 0;
    {
      ErrorIndicator ind{{3, 2, 1, 1}, 0.0, 0};
      if (dorfler_mark(ind, 0.3) != std::vector<int>{0}) ++mismatches;
    }
    std::uniform_int_distribution<int> level(0, 5);
    for (int trial = 0; trial < 200; ++trial) {
      ErrorIndicator ind;
      ind.per_triangle.resize(1 + static_cast<std::size_t>(trial % 37));
      for (auto& e : ind.per_triangle) e = 0.5 * level(rng);
      const double theta = 0.05 + 0.9 * (0.5 + 0.5 * unit(rng));
      auto got = dorfler_mark(ind, theta);
      std::sort(got.begin(), got.end());
      if (got != detail::dorfler_reference(ind.per_triangle, theta)) ++mismatches;
    }
    add(make_check("Dorfler greedy oracle", static_cast<double>(mismatches), 0.0));
  });

  guarded("estimator consistency", [&] {
    const SurfaceMesh mesh = projected_icosphere(2, highcurv_surface());
    ScalarField u{std::vector<double>(mesh.num_vertices()), mesh.generation()};
    for (auto& v : u.values) v = unit(rng);
    const VectorField g = recover_pppr(mesh, u);
    const ErrorIndicator ind = estimate(mesh, u, g);
    double sum = 0.0;
    for (double e : ind.per_triangle) sum += e * e;
    // One pass with the degree-4 rule, exact for the quadratic integrand.
    double direct = 0.0;
    for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
      const int ti = static_cast<int>(t);
      const auto& tri = mesh.triangle(ti);
      const Vec3 grad = triangle_gradient(mesh, ti, u.values);
      for (const auto& qp : triangle_rule()) {
        Vec3 v = Vec3::Zero();
        for (int k = 0; k < 3; ++k) v += qp.bary[static_cast<std::size_t>(k)] * g[static_cast<std::size_t>(tri[static_cast<std::size_t>(k)])];
        direct += mesh.triangle_area(ti) * qp.weight * (v - grad).squaredNorm();
      }
    }
    const double err = std::max(std::abs(sum - ind.global * ind.global), std::abs(direct - ind.global * ind.global)) /
                       (ind.global * ind.global);
    add(make_check("estimator consistency", err, 1e-12));
  });

  return report;
}

}  // namespace pppr

#endif  // PPPR_SELFTEST_HPP
