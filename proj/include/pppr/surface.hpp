#ifndef PPPR_SURFACE_HPP
#define PPPR_SURFACE_HPP

// Analytic level-set surfaces, exact tangential calculus for manufactured
// solutions, and projections from the discrete mesh onto the surface.

#include "pppr/core.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace pppr {

using ScalarFn = std::function<double(const Vec3&)>;
using VectorFn = std::function<Vec3(const Vec3&)>;
using MatrixFn = std::function<Mat3(const Vec3&)>;

struct Box3 {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  double diagonal() const { return (hi - lo).norm(); }
};

/// Closed surface {phi = 0} with closed-form first and second derivatives.
struct LevelSetSurface {
  std::string name;
  ScalarFn phi;
  VectorFn grad_phi;
  MatrixFn hess_phi;
  Box3 bounding_box;
  /// Largest |phi|/|grad phi| accepted by the iterated projection.
  double tube_radius = 0.5;
  /// Point the surface is star-shaped about (used for ray casting).
  Vec3 star_center = Vec3::Zero();
  /// Optional exact map from the unit sphere onto the surface; preferred
  /// over ray casting when the surface is not star-shaped.
  VectorFn sphere_map;
};

/// Manufactured solution u on a surface with f = -Lap_g u + c u.
///
/// `u`, `grad_u`, `hess_u` describe an ambient extension. For solutions
/// whose extension is not smooth, `surface_gradient` and `surface_laplacian`
/// supply the tangential quantities in closed form and take precedence.
struct ManufacturedProblem {
  std::string name;
  LevelSetSurface surface;
  ScalarFn u;
  VectorFn grad_u;
  MatrixFn hess_u;
  double zeroth_order_coefficient = 0.0;
  VectorFn surface_gradient;
  ScalarFn surface_laplacian;
  /// Points where u is not smooth; adaptive runs report how close the
  /// marked triangles are to them.
  std::vector<Vec3> singular_points;
};

inline constexpr double kDegenerateGradient = 1e-12;

namespace detail {

inline Vec3 checked_gradient(const LevelSetSurface& s, const Vec3& x) {
  Vec3 g = s.grad_phi(x);
  if (!(g.norm() >= kDegenerateGradient)) {
    throw Error(ErrorKind::DegenerateGradient,
                "|grad phi| = " + std::to_string(g.norm()) + " on surface '" + s.name + "'");
  }
  return g;
}

}  // namespace detail

inline Vec3 unit_normal(const LevelSetSurface& s, const Vec3& x) {
  return detail::checked_gradient(s, x).normalized();
}

/// One step x - phi grad/|grad|^2. Not exact on the surface unless phi is
/// a distance function.
inline Vec3 project_first_order(const LevelSetSurface& s, const Vec3& x) {
  const Vec3 g = detail::checked_gradient(s, x);
  return x - s.phi(x) * g / g.squaredNorm();
}

/// Iterates project_first_order until |phi| <= tol (at most 50 steps).
inline Vec3 project_closest_point(const LevelSetSurface& s, const Vec3& x, double tol = 1e-12) {
  if (!(tol > 0)) throw Error(ErrorKind::Precondition, "projection tolerance must be positive");
  Vec3 y = x;
  {
    const Vec3 g = detail::checked_gradient(s, y);
    if (std::abs(s.phi(y)) / g.norm() > s.tube_radius) {
      throw Error(ErrorKind::NonConvergence, "point outside the tube of surface '" + s.name + "'");
    }
  }
  for (int it = 0; it < 50; ++it) {
    const double value = s.phi(y);
    if (std::abs(value) <= tol) return y;
    const Vec3 g = detail::checked_gradient(s, y);
    y -= value * g / g.squaredNorm();
  }
  if (std::abs(s.phi(y)) <= tol) return y;
  throw Error(ErrorKind::NonConvergence, "closest-point projection did not reach tolerance on '" + s.name + "'");
}

inline constexpr double kOnSurfaceTol = 1e-10;

namespace detail {

inline void require_on_surface(const ManufacturedProblem& p, const Vec3& x) {
  const double value = p.surface.phi(x);
  if (!(std::abs(value) <= kOnSurfaceTol)) {
    throw Error(ErrorKind::Precondition, "point is off the surface, |phi| = " + std::to_string(std::abs(value)));
  }
}

}  // namespace detail

/// (Id - n n^T) grad u at a surface point.
inline Vec3 tangential_gradient(const ManufacturedProblem& p, const Vec3& x) {
  detail::require_on_surface(p, x);
  if (p.surface_gradient) return p.surface_gradient(x);
  const Vec3 n = unit_normal(p.surface, x);
  const Vec3 g = p.grad_u(x);
  return g - n.dot(g) * n;
}

/// Divergence of the extended unit normal field grad phi / |grad phi|.
inline double normal_divergence(const LevelSetSurface& s, const Vec3& x) {
  const Vec3 g = detail::checked_gradient(s, x);
  const Mat3 h = s.hess_phi(x);
  const double gn = g.norm();
  return (h.trace() * g.squaredNorm() - g.dot(h * g)) / (gn * gn * gn);
}

/// Laplace-Beltrami of u at a surface point.
inline double tangential_laplacian(const ManufacturedProblem& p, const Vec3& x) {
  detail::require_on_surface(p, x);
  if (p.surface_laplacian) return p.surface_laplacian(x);
  const Vec3 n = unit_normal(p.surface, x);
  const Mat3 h = p.hess_u(x);
  return h.trace() - n.dot(h * n) - n.dot(p.grad_u(x)) * normal_divergence(p.surface, x);
}

/// Right-hand side f = -Lap_g u + c u at a surface point.
inline double rhs(const ManufacturedProblem& p, const Vec3& x) {
  double f = -tangential_laplacian(p, x);
  if (p.zeroth_order_coefficient != 0.0) f += p.zeroth_order_coefficient * p.u(x);
  return f;
}

// ---------------------------------------------------------------------------
// Benchmark surfaces

/// Sphere |x| - r = 0.
inline LevelSetSurface sphere_surface(double radius = 1.0) {
  LevelSetSurface s;
  s.name = "sphere";
  s.phi = [radius](const Vec3& x) { return x.norm() - radius; };
  s.grad_phi = [](const Vec3& x) -> Vec3 {
    const double r = x.norm();
    return r > 0 ? Vec3(x / r) : Vec3::Zero();
  };
  s.hess_phi = [](const Vec3& x) -> Mat3 {
    const double r = x.norm();
    if (r == 0) return Mat3::Zero();
    const Vec3 e = x / r;
    return (Mat3::Identity() - e * e.transpose()) / r;
  };
  s.bounding_box = {Vec3::Constant(-radius), Vec3::Constant(radius)};
  s.tube_radius = 0.5 * radius;
  s.sphere_map = [radius](const Vec3& d) -> Vec3 { return radius * d.normalized(); };
  return s;
}

/// Torus with major radius 4 and minor radius 1 given by its signed distance.
inline LevelSetSurface torus_surface() {
  constexpr double kMajor = 4.0;
  LevelSetSurface s;
  s.name = "torus";
  s.phi = [](const Vec3& x) {
    const double rho = std::hypot(x[0], x[1]);
    return std::hypot(rho - kMajor, x[2]) - 1.0;
  };
  s.grad_phi = [](const Vec3& x) -> Vec3 {
    const double rho = std::hypot(x[0], x[1]);
    const double d = std::hypot(rho - kMajor, x[2]);
    if (rho == 0.0 || d == 0.0) return Vec3::Zero();
    const double a = (rho - kMajor) / d;
    return {a * x[0] / rho, a * x[1] / rho, x[2] / d};
  };
  s.hess_phi = [](const Vec3& x) -> Mat3 {
    const double rho = std::hypot(x[0], x[1]);
    const double a = rho - kMajor;
    const double d = std::hypot(a, x[2]);
    if (rho == 0.0 || d == 0.0) return Mat3::Zero();
    const Vec3 grad_rho(x[0] / rho, x[1] / rho, 0.0);
    Mat3 hess_rho = Mat3::Zero();
    hess_rho.topLeftCorner<2, 2>() =
        (Eigen::Matrix2d::Identity() - grad_rho.head<2>() * grad_rho.head<2>().transpose()) / rho;
    const Vec3 e3 = Vec3::UnitZ();
    const Vec3 g = (a * grad_rho + x[2] * e3) / d;
    return (grad_rho * grad_rho.transpose() + a * hess_rho + e3 * e3.transpose()) / d - g * g.transpose() / d;
  };
  s.bounding_box = {Vec3(-5, -5, -1), Vec3(5, 5, 1)};
  s.tube_radius = 0.5;
  return s;
}

/// x^2/4 + y^2 + 4 z^2 / (1 + sin(pi x)/2)^2 - 1: an ellipsoid-like surface
/// with thin, strongly curved lobes.
inline LevelSetSurface highcurv_surface() {
  using std::numbers::pi;
  LevelSetSurface s;
  s.name = "highcurv";
  s.phi = [](const Vec3& x) {
    const double w = 1.0 + 0.5 * std::sin(pi * x[0]);
    return 0.25 * x[0] * x[0] + x[1] * x[1] + 4.0 * x[2] * x[2] / (w * w) - 1.0;
  };
  s.grad_phi = [](const Vec3& x) -> Vec3 {
    const double w = 1.0 + 0.5 * std::sin(pi * x[0]);
    const double dw = 0.5 * pi * std::cos(pi * x[0]);
    return {0.5 * x[0] - 8.0 * x[2] * x[2] * dw / (w * w * w), 2.0 * x[1], 8.0 * x[2] / (w * w)};
  };
  s.hess_phi = [](const Vec3& x) -> Mat3 {
    const double w = 1.0 + 0.5 * std::sin(pi * x[0]);
    const double dw = 0.5 * pi * std::cos(pi * x[0]);
    const double ddw = -0.5 * pi * pi * std::sin(pi * x[0]);
    const double w3 = w * w * w;
    Mat3 h = Mat3::Zero();
    h(0, 0) = 0.5 - 8.0 * x[2] * x[2] * (ddw / w3 - 3.0 * dw * dw / (w3 * w));
    h(0, 2) = h(2, 0) = -16.0 * x[2] * dw / w3;
    h(1, 1) = 2.0;
    h(2, 2) = 8.0 / (w * w);
    return h;
  };
  s.bounding_box = {Vec3(-2, -1, -0.75), Vec3(2, 1, 0.75)};
  s.tube_radius = 0.125;
  // phi(2 d1, d2, w(2 d1) d3 / 2) = |d|^2 - 1.
  s.sphere_map = [](const Vec3& d) -> Vec3 {
    const double x = 2.0 * d[0];
    return {x, d[1], 0.5 * (1.0 + 0.5 * std::sin(pi * x)) * d[2]};
  };
  return s;
}

/// Dziuk's surface (x - z^2)^2 + y^2 + z^2 = 1.
inline LevelSetSurface dziuk_surface() {
  LevelSetSurface s;
  s.name = "dziuk";
  s.phi = [](const Vec3& x) {
    const double a = x[0] - x[2] * x[2];
    return a * a + x[1] * x[1] + x[2] * x[2] - 1.0;
  };
  s.grad_phi = [](const Vec3& x) -> Vec3 {
    const double a = x[0] - x[2] * x[2];
    return {2.0 * a, 2.0 * x[1], -4.0 * x[2] * a + 2.0 * x[2]};
  };
  s.hess_phi = [](const Vec3& x) -> Mat3 {
    Mat3 h = Mat3::Zero();
    h(0, 0) = 2.0;
    h(0, 2) = h(2, 0) = -4.0 * x[2];
    h(1, 1) = 2.0;
    h(2, 2) = -4.0 * x[0] + 12.0 * x[2] * x[2] + 2.0;
    return h;
  };
  s.bounding_box = {Vec3(-1, -1, -1), Vec3(1.25, 1, 1)};
  s.tube_radius = 0.25;
  return s;
}

inline const std::vector<std::string>& surface_names() {
  static const std::vector<std::string> names{"torus", "highcurv", "sphere", "dziuk"};
  return names;
}

inline LevelSetSurface make_surface(const std::string& name) {
  if (name == "torus") return torus_surface();
  if (name == "highcurv") return highcurv_surface();
  if (name == "sphere") return sphere_surface();
  if (name == "dziuk") return dziuk_surface();
  throw Error(ErrorKind::Config, "unknown surface '" + name + "'");
}

// ---------------------------------------------------------------------------
// Manufactured problems

/// u = a . x + b, an affine function of the ambient coordinates.
inline ManufacturedProblem affine_problem(LevelSetSurface surface, const Vec3& a, double b = 0.0) {
  ManufacturedProblem p;
  p.name = surface.name + "_affine";
  p.surface = std::move(surface);
  p.u = [a, b](const Vec3& x) { return a.dot(x) + b; };
  p.grad_u = [a](const Vec3&) { return a; };
  p.hess_u = [](const Vec3&) -> Mat3 { return Mat3::Zero(); };
  return p;
}

/// u = x^T Q x / 2 + a . x + b with symmetric Q.
inline ManufacturedProblem quadratic_problem(LevelSetSurface surface, const Mat3& q, const Vec3& a, double b = 0.0) {
  ManufacturedProblem p;
  p.name = surface.name + "_quadratic";
  p.surface = std::move(surface);
  p.u = [q, a, b](const Vec3& x) { return 0.5 * x.dot(q * x) + a.dot(x) + b; };
  p.grad_u = [q, a](const Vec3& x) -> Vec3 { return q * x + a; };
  p.hess_u = [q](const Vec3&) { return q; };
  return p;
}

/// u = x1 x2 on the given surface.
inline ManufacturedProblem product_problem(LevelSetSurface surface) {
  Mat3 q = Mat3::Zero();
  q(0, 1) = q(1, 0) = 1.0;
  auto p = quadratic_problem(std::move(surface), q, Vec3::Zero());
  p.name = p.surface.name + "_x1x2";
  return p;
}

/// u = sin^lambda(theta) sin(psi) on the unit sphere (polar angle theta,
/// azimuth psi). Singular at the poles for lambda < 1; the tangential
/// gradient and Laplacian come from spherical coordinates and vanish at the
/// two singular points by convention.
inline ManufacturedProblem sphere_singular_problem(double lambda = 0.6) {
  ManufacturedProblem p;
  p.name = "sphere_singular";
  p.surface = sphere_surface();
  p.u = [lambda](const Vec3& x) {
    const double rho = std::hypot(x[0], x[1]);
    const double r = x.norm();
    if (rho == 0.0) return 0.0;
    return std::pow(rho / r, lambda) * x[1] / rho;
  };
  auto surface_gradient = [lambda](const Vec3& x_in) -> Vec3 {
    const Vec3 x = x_in.normalized();
    const double rho = std::hypot(x[0], x[1]);
    if (rho == 0.0) return Vec3::Zero();
    const double z = x[2];
    const Vec3 e_theta(z * x[0] / rho, z * x[1] / rho, -rho);
    const Vec3 e_psi(-x[1] / rho, x[0] / rho, 0.0);
    const double d_theta = lambda * std::pow(rho, lambda - 2.0) * z * x[1];
    const double d_psi = std::pow(rho, lambda - 2.0) * x[0];
    return d_theta * e_theta + d_psi * e_psi;
  };
  p.surface_gradient = surface_gradient;
  p.singular_points = {Vec3(0, 0, 1), Vec3(0, 0, -1)};
  // The extension is 0-homogeneous, so its ambient gradient is tangential.
  p.grad_u = [surface_gradient](const Vec3& x) -> Vec3 { return surface_gradient(x) / x.norm(); };
  p.surface_laplacian = [lambda](const Vec3& x_in) {
    const Vec3 x = x_in.normalized();
    const double rho = std::hypot(x[0], x[1]);
    if (rho == 0.0) return 0.0;
    const double sin_psi = x[1] / rho;
    return -sin_psi * std::pow(rho, lambda - 2.0) * ((1.0 - lambda * lambda) + lambda * (lambda + 1.0) * rho * rho);
  };
  return p;
}

/// u = exp(1 / (1.85 - (x - 0.2)^2)) sin(y) on Dziuk's surface with -Lap u + u = f.
inline ManufacturedProblem dziuk_peak_problem() {
  ManufacturedProblem p;
  p.name = "dziuk_peak";
  p.surface = dziuk_surface();
  p.zeroth_order_coefficient = 1.0;
  struct Parts {
    double e, de, dde;
  };
  auto parts = [](double x) {
    const double s = x - 0.2;
    const double w = 1.85 - s * s;
    const double e = std::exp(1.0 / w);
    const double g = 2.0 * s / (w * w);
    const double dg = 2.0 / (w * w) + 8.0 * s * s / (w * w * w);
    return Parts{e, e * g, e * (g * g + dg)};
  };
  p.u = [parts](const Vec3& x) { return parts(x[0]).e * std::sin(x[1]); };
  p.grad_u = [parts](const Vec3& x) -> Vec3 {
    const auto e = parts(x[0]);
    return {e.de * std::sin(x[1]), e.e * std::cos(x[1]), 0.0};
  };
  p.hess_u = [parts](const Vec3& x) -> Mat3 {
    const auto e = parts(x[0]);
    Mat3 h = Mat3::Zero();
    h(0, 0) = e.dde * std::sin(x[1]);
    h(0, 1) = h(1, 0) = e.de * std::cos(x[1]);
    h(1, 1) = -e.e * std::sin(x[1]);
    return h;
  };
  return p;
}

struct ProblemOptions {
  double lambda = 0.6;
};

inline const std::vector<std::string>& problem_names() {
  static const std::vector<std::string> names{"torus_xy", "highcurv_x1x2", "sphere_singular", "dziuk_peak"};
  return names;
}

inline ManufacturedProblem make_problem(const std::string& name, const ProblemOptions& options = {}) {
  if (name == "torus_xy") {
    auto p = affine_problem(torus_surface(), Vec3(1.0, -1.0, 0.0));
    p.name = name;
    return p;
  }
  if (name == "highcurv_x1x2") {
    auto p = product_problem(highcurv_surface());
    p.name = name;
    return p;
  }
  if (name == "sphere_singular") return sphere_singular_problem(options.lambda);
  if (name == "dziuk_peak") return dziuk_peak_problem();
  throw Error(ErrorKind::Config, "unknown problem '" + name + "'");
}

}  // namespace pppr

#endif  // PPPR_SURFACE_HPP
