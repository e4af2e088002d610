#ifndef PPPR_FEM_HPP
#define PPPR_FEM_HPP

// Linear finite elements on triangulated surfaces: assembly of
// -Lap_g u (+ c u) = f, interpolation, elementwise gradients and error
// norms against exact fields.

#include "pppr/mesh.hpp"
#include "pppr/sparse.hpp"
#include "pppr/surface.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <vector>

namespace pppr {

/// Per-vertex values tagged with the generation of the mesh they live on.
template <class T>
struct NodalField {
  std::vector<T> values;
  int generation = 0;

  std::size_t size() const { return values.size(); }
  const T& operator[](std::size_t i) const { return values[i]; }
  T& operator[](std::size_t i) { return values[i]; }
};

using ScalarField = NodalField<double>;
using VectorField = NodalField<Vec3>;

/// Per-triangle constant vectors.
struct FaceField {
  std::vector<Vec3> values;
  int generation = 0;
};

inline ScalarField make_scalar_field(const SurfaceMesh& mesh, const Vector& values) {
  return {std::vector<double>(values.data(), values.data() + values.size()), mesh.generation()};
}

template <class T>
void require_matches(const SurfaceMesh& mesh, const NodalField<T>& field, const char* what) {
  if (field.values.size() != mesh.num_vertices()) {
    throw Error(ErrorKind::Precondition, std::string(what) + " does not have one value per vertex");
  }
  if (field.generation != mesh.generation()) {
    throw Error(ErrorKind::MismatchedGeneration, std::string(what) + " belongs to mesh generation " +
                                                     std::to_string(field.generation) + ", mesh is generation " +
                                                     std::to_string(mesh.generation()));
  }
}

/// Symmetric 6-point rule exact for polynomials of degree 4 on a triangle.
/// Barycentric coordinates; weights sum to one.
struct QuadraturePoint {
  std::array<double, 3> bary;
  double weight;
};

inline const std::array<QuadraturePoint, 6>& triangle_rule() {
  constexpr double a = 0.445948490915964886318329253883;
  constexpr double wa = 0.223381589678011465944640803166;
  constexpr double b = 0.091576213509770743459571463402;
  constexpr double wb = 0.109951743655321867388692530167;
  static const std::array<QuadraturePoint, 6> rule{{
      {{1 - 2 * a, a, a}, wa},
      {{a, 1 - 2 * a, a}, wa},
      {{a, a, 1 - 2 * a}, wa},
      {{1 - 2 * b, b, b}, wb},
      {{b, 1 - 2 * b, b}, wb},
      {{b, b, 1 - 2 * b}, wb},
  }};
  return rule;
}

inline Vec3 barycentric_point(const SurfaceMesh& mesh, int t, const std::array<double, 3>& bary) {
  const auto& tri = mesh.triangle(t);
  return bary[0] * mesh.vertex(tri[0]) + bary[1] * mesh.vertex(tri[1]) + bary[2] * mesh.vertex(tri[2]);
}

/// Surface gradients of the three hat functions of triangle t (constant
/// vectors in the triangle plane).
inline std::array<Vec3, 3> hat_gradients(const SurfaceMesh& mesh, int t) {
  const auto& tri = mesh.triangle(t);
  const Vec3 cross = mesh.triangle_cross(t);
  const double twice_area = cross.norm();
  if (!(twice_area > 0)) throw Error(ErrorKind::DegenerateTriangle, "zero-area triangle", t);
  const Vec3 n = cross / twice_area;
  std::array<Vec3, 3> g;
  for (int k = 0; k < 3; ++k) {
    const Vec3 edge = mesh.vertex(tri[(k + 2) % 3]) - mesh.vertex(tri[(k + 1) % 3]);
    g[static_cast<std::size_t>(k)] = n.cross(edge) / twice_area;
  }
  return g;
}

using LocalMatrix = Eigen::Matrix3d;

inline LocalMatrix local_stiffness(const SurfaceMesh& mesh, int t) {
  const auto g = hat_gradients(mesh, t);
  const double area = mesh.triangle_area(t);
  LocalMatrix k;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) k(a, b) = area * g[static_cast<std::size_t>(a)].dot(g[static_cast<std::size_t>(b)]);
  return k;
}

inline LocalMatrix local_mass(const SurfaceMesh& mesh, int t) {
  LocalMatrix m;
  m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  return m * (mesh.triangle_area(t) / 12.0);
}

namespace detail {

/// Local matrices are computed in parallel and scattered in triangle order,
/// so the result does not depend on the schedule.
template <class Local>
CsrMatrix assemble(const SurfaceMesh& mesh, Local local) {
  const auto nt = mesh.num_triangles();
  std::vector<LocalMatrix> blocks(nt);
  parallel_for(nt, [&](std::size_t t) { blocks[t] = local(mesh, static_cast<int>(t)); });
  std::vector<Triplet> triplets;
  triplets.reserve(9 * nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangle(static_cast<int>(t));
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) triplets.push_back({tri[static_cast<std::size_t>(a)], tri[static_cast<std::size_t>(b)], blocks[t](a, b)});
  }
  return CsrMatrix::from_triplets(static_cast<int>(mesh.num_vertices()), std::move(triplets));
}

}  // namespace detail

inline CsrMatrix assemble_stiffness(const SurfaceMesh& mesh) { return detail::assemble(mesh, local_stiffness); }

inline CsrMatrix assemble_mass(const SurfaceMesh& mesh) { return detail::assemble(mesh, local_mass); }

/// b_a = sum_T int_T f_h phi_a with f_h evaluated through the iterated
/// projection onto the exact surface.
inline Vector assemble_load(const SurfaceMesh& mesh, const ManufacturedProblem& problem) {
  const auto& rule = triangle_rule();
  const auto nt = mesh.num_triangles();
  std::vector<std::array<double, 3>> local(nt);
  parallel_for(nt, [&](std::size_t ti) {
    const int t = static_cast<int>(ti);
    const double area = mesh.triangle_area(t);
    std::array<double, 3> b{0, 0, 0};
    for (const auto& q : rule) {
      const Vec3 y = project_closest_point(problem.surface, barycentric_point(mesh, t, q.bary));
      const double f = rhs(problem, y);
      for (int a = 0; a < 3; ++a) b[static_cast<std::size_t>(a)] += area * q.weight * f * q.bary[static_cast<std::size_t>(a)];
    }
    local[ti] = b;
  });
  Vector load = Vector::Zero(static_cast<Eigen::Index>(mesh.num_vertices()));
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangle(static_cast<int>(t));
    for (int a = 0; a < 3; ++a) load[tri[static_cast<std::size_t>(a)]] += local[t][static_cast<std::size_t>(a)];
  }
  return load;
}

/// u_I(x_i) = u(P(x_i)).
inline ScalarField interpolate(const SurfaceMesh& mesh, const ManufacturedProblem& problem) {
  ScalarField f{std::vector<double>(mesh.num_vertices()), mesh.generation()};
  parallel_for(mesh.num_vertices(), [&](std::size_t i) {
    f.values[i] = problem.u(project_closest_point(problem.surface, mesh.vertex(static_cast<int>(i))));
  });
  return f;
}

inline Vec3 triangle_gradient(const SurfaceMesh& mesh, int t, const std::vector<double>& u) {
  const auto g = hat_gradients(mesh, t);
  const auto& tri = mesh.triangle(t);
  return u[static_cast<std::size_t>(tri[0])] * g[0] + u[static_cast<std::size_t>(tri[1])] * g[1] +
         u[static_cast<std::size_t>(tri[2])] * g[2];
}

/// Piecewise-constant surface gradient of a P1 field.
inline FaceField fe_gradient(const SurfaceMesh& mesh, const ScalarField& u) {
  require_matches(mesh, u, "scalar field");
  FaceField g{std::vector<Vec3>(mesh.num_triangles()), mesh.generation()};
  parallel_for(mesh.num_triangles(), [&](std::size_t t) { g.values[t] = triangle_gradient(mesh, static_cast<int>(t), u.values); });
  return g;
}

struct FeSolution {
  ScalarField u;
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Assembles and solves the problem on `mesh`: the mean-zero
/// Laplace-Beltrami system when the zeroth-order coefficient is 0, the SPD
/// system K + cM otherwise.
inline FeSolution fe_solve(const SurfaceMesh& mesh, const ManufacturedProblem& problem, const SolverOptions& options = {}) {
  const CsrMatrix k = assemble_stiffness(mesh);
  const CsrMatrix m = assemble_mass(mesh);
  const Vector b = assemble_load(mesh, problem);
  SolveResult r = problem.zeroth_order_coefficient == 0.0
                      ? solve_mean_zero(k, b, m, options)
                      : solve_spd(k.combine(1.0, m, problem.zeroth_order_coefficient), b, options);
  return {make_scalar_field(mesh, r.x), r.iterations, r.relative_residual};
}

/// Exact tangential gradient T_h grad_g u sampled once per mesh: at each
/// quadrature point and at each vertex, through the iterated projection.
class ExactGradientSamples {
 public:
  ExactGradientSamples(const SurfaceMesh& mesh, const ManufacturedProblem& problem) : mesh_(&mesh) {
    const auto& rule = triangle_rule();
    at_quadrature_.resize(mesh.num_triangles() * rule.size());
    parallel_for(mesh.num_triangles(), [&](std::size_t t) {
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const Vec3 x = barycentric_point(mesh, static_cast<int>(t), rule[q].bary);
        at_quadrature_[t * rule.size() + q] = tangential_gradient(problem, project_closest_point(problem.surface, x));
      }
    });
    at_vertices_.resize(mesh.num_vertices());
    parallel_for(mesh.num_vertices(), [&](std::size_t i) {
      at_vertices_[i] = tangential_gradient(problem, project_closest_point(problem.surface, mesh.vertex(static_cast<int>(i))));
    });
  }

  const SurfaceMesh& mesh() const { return *mesh_; }
  const Vec3& at_quadrature(std::size_t t, std::size_t q) const { return at_quadrature_[t * triangle_rule().size() + q]; }
  const std::vector<Vec3>& at_vertices() const { return at_vertices_; }

  /// sqrt(sum_T int_T |T_h grad u - v_T(x)|^2) for a field that is linear on
  /// each triangle, given by its values at the three vertices.
  template <class TriangleField>
  double l2_distance(TriangleField&& field) const {
    const auto& rule = triangle_rule();
    double total = 0.0;
    for (std::size_t t = 0; t < mesh_->num_triangles(); ++t) {
      const std::array<Vec3, 3> v = field(static_cast<int>(t));
      const double area = mesh_->triangle_area(static_cast<int>(t));
      double s = 0.0;
      for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto& l = rule[q].bary;
        const Vec3 value = l[0] * v[0] + l[1] * v[1] + l[2] * v[2];
        s += rule[q].weight * (at_quadrature(t, q) - value).squaredNorm();
      }
      total += area * s;
    }
    return std::sqrt(total);
  }

 private:
  const SurfaceMesh* mesh_;
  std::vector<Vec3> at_quadrature_;
  std::vector<Vec3> at_vertices_;
};

/// ||T_h grad u - grad u_h||_{0,M_h}.
inline double gradient_error(const ExactGradientSamples& exact, const ScalarField& u_h) {
  const auto& mesh = exact.mesh();
  require_matches(mesh, u_h, "FE solution");
  return exact.l2_distance([&](int t) {
    const Vec3 g = triangle_gradient(mesh, t, u_h.values);
    return std::array<Vec3, 3>{g, g, g};
  });
}

/// ||T_h grad u - G||_{0,M_h} with G interpolated linearly from vertices.
inline double recovered_error(const ExactGradientSamples& exact, const VectorField& recovered) {
  const auto& mesh = exact.mesh();
  require_matches(mesh, recovered, "recovered gradient");
  return exact.l2_distance([&](int t) {
    const auto& tri = mesh.triangle(t);
    return std::array<Vec3, 3>{recovered[static_cast<std::size_t>(tri[0])], recovered[static_cast<std::size_t>(tri[1])],
                               recovered[static_cast<std::size_t>(tri[2])]};
  });
}

/// max_i |G(x_i) - T_h grad u(x_i)|.
inline double recovered_max_error(const ExactGradientSamples& exact, const VectorField& recovered) {
  require_matches(exact.mesh(), recovered, "recovered gradient");
  double worst = 0.0;
  for (std::size_t i = 0; i < recovered.size(); ++i) worst = std::max(worst, (recovered[i] - exact.at_vertices()[i]).norm());
  return worst;
}

/// ||grad u_I - grad u_h||_{0,M_h}.
inline double interpolant_gradient_distance(const SurfaceMesh& mesh, const ScalarField& u_interp, const ScalarField& u_h) {
  require_matches(mesh, u_interp, "interpolant");
  require_matches(mesh, u_h, "FE solution");
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.num_triangles(); ++t) {
    const int ti = static_cast<int>(t);
    total += mesh.triangle_area(ti) *
             (triangle_gradient(mesh, ti, u_interp.values) - triangle_gradient(mesh, ti, u_h.values)).squaredNorm();
  }
  return std::sqrt(total);
}

struct ErrorNorms {
  double De = 0.0;
  double De_I = 0.0;
  std::optional<double> De_recovered;
  std::optional<double> De_max_recovered;
  double L2_of_exact_gradient = 0.0;
};

inline ErrorNorms error_norms(const SurfaceMesh& mesh, const ManufacturedProblem& problem, const ScalarField& u_h,
                              const VectorField* recovered = nullptr) {
  const ExactGradientSamples exact(mesh, problem);
  ErrorNorms e;
  e.De = gradient_error(exact, u_h);
  e.De_I = interpolant_gradient_distance(mesh, interpolate(mesh, problem), u_h);
  e.L2_of_exact_gradient = exact.l2_distance([](int) { return std::array<Vec3, 3>{Vec3::Zero(), Vec3::Zero(), Vec3::Zero()}; });
  if (recovered) {
    e.De_recovered = recovered_error(exact, *recovered);
    e.De_max_recovered = recovered_max_error(exact, *recovered);
  }
  return e;
}

}  // namespace pppr

#endif  // PPPR_FEM_HPP
