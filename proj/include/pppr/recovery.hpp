#ifndef PPPR_RECOVERY_HPP
#define PPPR_RECOVERY_HPP

// Gradient recovery at mesh vertices.
//
// PPPR fits both the local surface and the data with value-preserving
// quadratics over a planar parameter domain oriented by averaged face
// normals, then maps the parametric gradient to 3-space through the
// pseudo-inverse of the fitted chart's Jacobian. PPR fits the data over the
// (exact or approximate) tangent plane only. Simple and area-weighted
// averaging of elementwise gradients serve as baselines.

#include "pppr/fem.hpp"
#include "pppr/mesh.hpp"
#include "pppr/surface.hpp"

#include <array>
#include <span>
#include <string>
#include <vector>

namespace pppr {

enum class NormalMode { Exact, SimpleAverage, AreaWeighted };

/// Orthonormal, right-handed frame (t1, t2, normal) at a vertex.
struct LocalFrame {
  Vec3 center = Vec3::Zero();
  Vec3 t1 = Vec3::UnitX();
  Vec3 t2 = Vec3::UnitY();
  Vec3 normal = Vec3::UnitZ();
  NormalMode source = NormalMode::Exact;

  /// Columns t1, t2, normal.
  Mat3 basis() const {
    Mat3 b;
    b << t1, t2, normal;
    return b;
  }

  /// Local coordinates of x relative to the center.
  Vec3 local(const Vec3& x) const {
    const Vec3 d = x - center;
    return {d.dot(t1), d.dot(t2), d.dot(normal)};
  }
};

/// Completes a unit normal to a right-handed frame: t1 comes from the
/// ambient axis least aligned with the normal.
inline LocalFrame frame_from_normal(const Vec3& center, const Vec3& normal, NormalMode source) {
  LocalFrame f;
  f.center = center;
  f.normal = normal.normalized();
  f.source = source;
  int axis = 0;
  f.normal.cwiseAbs().minCoeff(&axis);
  const Vec3 e = Vec3::Unit(axis);
  f.t1 = (e - e.dot(f.normal) * f.normal).normalized();
  f.t2 = f.normal.cross(f.t1);
  return f;
}

inline LocalFrame build_frame(const SurfaceMesh& mesh, int i, NormalMode mode, const LevelSetSurface* surface = nullptr) {
  const Vec3& x = mesh.vertex(i);
  if (mode == NormalMode::Exact) {
    if (!surface) throw Error(ErrorKind::Precondition, "exact normals need a surface", i);
    return frame_from_normal(x, unit_normal(*surface, x), mode);
  }
  Vec3 sum = Vec3::Zero();
  for (int t : mesh.vertex_triangles(i)) {
    const Vec3 cross = mesh.triangle_cross(t);
    sum += mode == NormalMode::AreaWeighted ? Vec3(0.5 * cross) : Vec3(cross.normalized());
  }
  // Compare against the scale of the summands so the test is unit-free.
  double scale = 0.0;
  for (int t : mesh.vertex_triangles(i)) {
    scale += mode == NormalMode::AreaWeighted ? mesh.triangle_area(t) : 1.0;
  }
  if (!(sum.norm() >= 1e-8 * scale)) {
    throw Error(ErrorKind::DegenerateAverage, "averaged normal vanishes at vertex " + std::to_string(i), i);
  }
  return frame_from_normal(x, sum, mode);
}

struct PatchOptions {
  int min_members = 7;
  double max_condition = 1e8;
  int max_ring = 10;
};

/// Patch members expressed in a local frame. Index 0 is the center, which
/// sits at the origin with zero height.
struct PatchCoordinates {
  VertexPatch patch;
  std::vector<Vec2> zeta;
  std::vector<double> height;
  /// k_i h_i, the length the design matrix is normalized by.
  double scale = 1.0;
  double condition = 0.0;
};

namespace detail {

using DesignMatrix = Eigen::Matrix<double, Eigen::Dynamic, 5>;

/// Rows (z1, z2, z1^2, z1 z2, z2^2) of the non-center members, with z = zeta / scale.
inline DesignMatrix value_preserving_design(std::span<const Vec2> zeta, double scale) {
  DesignMatrix a(static_cast<Eigen::Index>(zeta.size()), 5);
  for (std::size_t j = 0; j < zeta.size(); ++j) {
    const double z1 = zeta[j][0] / scale, z2 = zeta[j][1] / scale;
    a.row(static_cast<Eigen::Index>(j)) << z1, z2, z1 * z1, z1 * z2, z2 * z2;
  }
  return a;
}

inline double condition_number(const DesignMatrix& a) {
  if (a.rows() < 5) return std::numeric_limits<double>::infinity();
  const Eigen::JacobiSVD<DesignMatrix> svd(a);
  const auto& s = svd.singularValues();
  return s[4] > 0 ? s[0] / s[4] : std::numeric_limits<double>::infinity();
}

}  // namespace detail

/// Grows the ring parameter k from 1 until the scaled value-preserving
/// design matrix is well conditioned and the patch has enough members.
inline PatchCoordinates select_patch(const SurfaceMesh& mesh, int i, const LocalFrame& frame,
                                     const PatchOptions& options = {}) {
  for (int k = 1; k <= options.max_ring; ++k) {
    PatchCoordinates pc;
    pc.patch = vertex_patch(mesh, i, k);
    const auto& members = pc.patch.member_vertices;
    if (static_cast<int>(members.size()) < options.min_members) continue;
    pc.zeta.reserve(members.size());
    pc.height.reserve(members.size());
    for (int v : members) {
      const Vec3 y = frame.local(mesh.vertex(v));
      pc.zeta.emplace_back(y[0], y[1]);
      pc.height.push_back(y[2]);
    }
    pc.zeta.front() = Vec2::Zero();
    pc.height.front() = 0.0;
    pc.scale = k * pc.patch.h;
    pc.condition = detail::condition_number(
        detail::value_preserving_design(std::span<const Vec2>(pc.zeta).subspan(1), pc.scale));
    if (pc.condition <= options.max_condition) return pc;
  }
  throw Error(ErrorKind::PatchGrowthFailure,
              "no admissible patch within ring " + std::to_string(options.max_ring) + " of vertex " + std::to_string(i), i);
}

/// q(y) = c0 + a1 y1 + a2 y2 + a3 y1^2 + a4 y1 y2 + a5 y2^2 in physical
/// (unscaled) coordinates.
struct QuadraticFit {
  double c0 = 0.0;
  std::array<double, 5> a{};
  double scale = 1.0;
  double residual_norm = 0.0;

  double operator()(const Vec2& y) const {
    return c0 + a[0] * y[0] + a[1] * y[1] + a[2] * y[0] * y[0] + a[3] * y[0] * y[1] + a[4] * y[1] * y[1];
  }
  Vec2 gradient_at_origin() const { return {a[0], a[1]}; }
};

namespace detail {

inline QuadraticFit unscale(const Eigen::Matrix<double, 5, 1>& scaled, double c0, double scale, double residual) {
  QuadraticFit q;
  q.c0 = c0;
  q.scale = scale;
  q.a = {scaled[0] / scale, scaled[1] / scale, scaled[2] / (scale * scale), scaled[3] / (scale * scale),
         scaled[4] / (scale * scale)};
  q.residual_norm = residual;
  return q;
}

}  // namespace detail

/// Least-squares quadratic through the center datum at the origin:
/// minimizes sum_j |q(zeta_j) - data_j|^2 with q(0) = center_datum. `zeta`
/// and `data` list the non-center members only. Solved by column-pivoted
/// Householder QR of the scaled design matrix.
inline QuadraticFit fit_quadratic_value_preserving(std::span<const Vec2> zeta, std::span<const double> data,
                                                   double center_datum, double scale) {
  if (zeta.size() != data.size()) throw Error(ErrorKind::Precondition, "coordinate and data lists differ in length");
  if (!(scale > 0)) throw Error(ErrorKind::Precondition, "fit scale must be positive");
  const detail::DesignMatrix a = detail::value_preserving_design(zeta, scale);
  Eigen::VectorXd b(static_cast<Eigen::Index>(data.size()));
  for (std::size_t j = 0; j < data.size(); ++j) b[static_cast<Eigen::Index>(j)] = data[j] - center_datum;
  const Eigen::ColPivHouseholderQR<detail::DesignMatrix> qr(a);
  if (a.rows() < 5 || qr.rank() < 5) {
    throw Error(ErrorKind::RankDeficiency, "design matrix has rank " + std::to_string(qr.rank()) + " < 5");
  }
  const Eigen::Matrix<double, 5, 1> x = qr.solve(b);
  return detail::unscale(x, center_datum, scale, (a * x - b).norm());
}

/// Unconstrained six-coefficient least-squares quadratic over all members
/// (center included, listed first).
inline QuadraticFit fit_quadratic_full(std::span<const Vec2> zeta, std::span<const double> data, double scale) {
  if (zeta.size() != data.size()) throw Error(ErrorKind::Precondition, "coordinate and data lists differ in length");
  Eigen::Matrix<double, Eigen::Dynamic, 6> a(static_cast<Eigen::Index>(zeta.size()), 6);
  Eigen::VectorXd b(static_cast<Eigen::Index>(zeta.size()));
  for (std::size_t j = 0; j < zeta.size(); ++j) {
    const double z1 = zeta[j][0] / scale, z2 = zeta[j][1] / scale;
    a.row(static_cast<Eigen::Index>(j)) << 1.0, z1, z2, z1 * z1, z1 * z2, z2 * z2;
    b[static_cast<Eigen::Index>(j)] = data[j];
  }
  const Eigen::ColPivHouseholderQR<Eigen::Matrix<double, Eigen::Dynamic, 6>> qr(a);
  if (a.rows() < 6 || qr.rank() < 6) {
    throw Error(ErrorKind::RankDeficiency, "design matrix has rank " + std::to_string(qr.rank()) + " < 6");
  }
  const Eigen::Matrix<double, 6, 1> x = qr.solve(b);
  return detail::unscale(x.tail<5>(), x[0], scale, (a * x - b).norm());
}

/// Tangential vector (p1, p2) J^+(s) expressed in 3-space, where the chart
/// is zeta -> (zeta, s(zeta)) with slopes s_grad at the origin.
inline Vec3 chart_gradient(const Vec2& p_grad, const Vec2& s_grad, const LocalFrame& frame) {
  Eigen::Matrix<double, 3, 2> j;
  j << 1.0, 0.0, 0.0, 1.0, s_grad[0], s_grad[1];
  const Eigen::Matrix2d metric = j.transpose() * j;
  const Vec3 local = j * metric.ldlt().solve(p_grad);
  return local[0] * frame.t1 + local[1] * frame.t2 + local[2] * frame.normal;
}

enum class RecoveryMethod { Pppr, PprExact, PprAverage, SimpleAverage, WeightedAverage };

inline const char* method_name(RecoveryMethod m) {
  switch (m) {
    case RecoveryMethod::Pppr: return "pppr";
    case RecoveryMethod::PprExact: return "ppr-exact";
    case RecoveryMethod::PprAverage: return "ppr-avg";
    case RecoveryMethod::SimpleAverage: return "sa";
    case RecoveryMethod::WeightedAverage: return "wa";
  }
  return "?";
}

inline RecoveryMethod parse_method(const std::string& name) {
  for (auto m : {RecoveryMethod::Pppr, RecoveryMethod::PprExact, RecoveryMethod::PprAverage,
                 RecoveryMethod::SimpleAverage, RecoveryMethod::WeightedAverage}) {
    if (name == method_name(m)) return m;
  }
  throw Error(ErrorKind::Config, "unknown recovery method '" + name + "'");
}

struct RecoveryOptions {
  /// Normal averaging used for PPPR frames and for ppr-avg.
  NormalMode averaged_normal = NormalMode::AreaWeighted;
  /// PPR data fit with the center value pinned; false selects the plain
  /// six-coefficient fit.
  bool ppr_value_preserving = true;
  PatchOptions patch;
};

namespace detail {

template <class PerVertex>
VectorField recover_each_vertex(const SurfaceMesh& mesh, PerVertex per_vertex) {
  VectorField g{std::vector<Vec3>(mesh.num_vertices()), mesh.generation()};
  parallel_for(mesh.num_vertices(), [&](std::size_t i) {
    try {
      g.values[i] = per_vertex(static_cast<int>(i));
    } catch (const Error& e) {
      rethrow_with_context(e, "vertex", static_cast<long>(i));
    }
  });
  return g;
}

inline std::vector<double> member_data(const PatchCoordinates& pc, const std::vector<double>& values) {
  std::vector<double> d;
  d.reserve(pc.patch.member_vertices.size() - 1);
  for (std::size_t j = 1; j < pc.patch.member_vertices.size(); ++j) {
    d.push_back(values[static_cast<std::size_t>(pc.patch.member_vertices[j])]);
  }
  return d;
}

}  // namespace detail

/// Everything PPPR computes at one vertex, for inspection and testing.
struct PpprVertexResult {
  LocalFrame frame;
  PatchCoordinates patch;
  QuadraticFit surface_fit;
  QuadraticFit data_fit;
  Vec3 gradient;
};

/// PPPR at vertex i in a caller-supplied frame centred at x_i.
inline PpprVertexResult recover_pppr_at(const SurfaceMesh& mesh, const ScalarField& u_h, int i, const LocalFrame& frame,
                                        const RecoveryOptions& options = {}) {
  PpprVertexResult r;
  r.frame = frame;
  r.patch = select_patch(mesh, i, r.frame, options.patch);
  const auto zeta = std::span<const Vec2>(r.patch.zeta).subspan(1);
  r.surface_fit = fit_quadratic_value_preserving(zeta, std::span<const double>(r.patch.height).subspan(1), 0.0, r.patch.scale);
  r.data_fit = fit_quadratic_value_preserving(zeta, detail::member_data(r.patch, u_h.values),
                                              u_h.values[static_cast<std::size_t>(i)], r.patch.scale);
  r.gradient = chart_gradient(r.data_fit.gradient_at_origin(), r.surface_fit.gradient_at_origin(), r.frame);
  return r;
}

inline PpprVertexResult recover_pppr_at(const SurfaceMesh& mesh, const ScalarField& u_h, int i,
                                        const RecoveryOptions& options = {}) {
  return recover_pppr_at(mesh, u_h, i, build_frame(mesh, i, options.averaged_normal), options);
}

/// Parametric polynomial preserving recovery; needs no exact normals.
inline VectorField recover_pppr(const SurfaceMesh& mesh, const ScalarField& u_h, const RecoveryOptions& options = {}) {
  require_matches(mesh, u_h, "FE solution");
  return detail::recover_each_vertex(mesh, [&](int i) { return recover_pppr_at(mesh, u_h, i, options).gradient; });
}

/// Polynomial preserving recovery on tangent planes. With a surface the
/// exact normals define the planes; without one, averaged normals do.
inline VectorField recover_ppr(const SurfaceMesh& mesh, const ScalarField& u_h, const LevelSetSurface* exact_surface,
                               const RecoveryOptions& options = {}) {
  require_matches(mesh, u_h, "FE solution");
  const NormalMode mode = exact_surface ? NormalMode::Exact : options.averaged_normal;
  return detail::recover_each_vertex(mesh, [&](int i) {
    const LocalFrame frame = build_frame(mesh, i, mode, exact_surface);
    const PatchCoordinates pc = select_patch(mesh, i, frame, options.patch);
    QuadraticFit p;
    if (options.ppr_value_preserving) {
      p = fit_quadratic_value_preserving(std::span<const Vec2>(pc.zeta).subspan(1), detail::member_data(pc, u_h.values),
                                         u_h.values[static_cast<std::size_t>(i)], pc.scale);
    } else {
      std::vector<double> data;
      for (int v : pc.patch.member_vertices) data.push_back(u_h.values[static_cast<std::size_t>(v)]);
      p = fit_quadratic_full(pc.zeta, data, pc.scale);
    }
    return Vec3(p.a[0] * frame.t1 + p.a[1] * frame.t2);
  });
}

enum class AveragingWeight { Simple, Area };

/// Average of the elementwise gradients around each vertex.
inline VectorField recover_averaging(const SurfaceMesh& mesh, const ScalarField& u_h, AveragingWeight weighting) {
  const FaceField face = fe_gradient(mesh, u_h);
  return detail::recover_each_vertex(mesh, [&](int i) {
    Vec3 sum = Vec3::Zero();
    double weight = 0.0;
    for (int t : mesh.vertex_triangles(i)) {
      const double w = weighting == AveragingWeight::Area ? mesh.triangle_area(t) : 1.0;
      sum += w * face.values[static_cast<std::size_t>(t)];
      weight += w;
    }
    return Vec3(sum / weight);
  });
}

/// Dispatch by method. `surface` is required only for ppr-exact.
inline VectorField recover(RecoveryMethod method, const SurfaceMesh& mesh, const ScalarField& u_h,
                           const LevelSetSurface* surface = nullptr, const RecoveryOptions& options = {}) {
  switch (method) {
    case RecoveryMethod::Pppr: return recover_pppr(mesh, u_h, options);
    case RecoveryMethod::PprExact:
      if (!surface) throw Error(ErrorKind::Precondition, "ppr-exact needs the exact surface");
      return recover_ppr(mesh, u_h, surface, options);
    case RecoveryMethod::PprAverage: return recover_ppr(mesh, u_h, nullptr, options);
    case RecoveryMethod::SimpleAverage: return recover_averaging(mesh, u_h, AveragingWeight::Simple);
    case RecoveryMethod::WeightedAverage: return recover_averaging(mesh, u_h, AveragingWeight::Area);
  }
  throw Error(ErrorKind::Config, "unknown recovery method");
}

}  // namespace pppr

#endif  // PPPR_RECOVERY_HPP
