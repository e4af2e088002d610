#ifndef PPPR_GENERATORS_HPP
#define PPPR_GENERATORS_HPP

#include "pppr/mesh.hpp"
#include "pppr/refine.hpp"
#include "pppr/surface.hpp"

#include <array>
#include <cmath>
#include <map>
#include <numbers>

namespace pppr {

inline SurfaceMesh tetrahedron_mesh() {
  std::vector<Vec3> v{{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
  for (auto& p : v) p.normalize();
  return build_mesh(std::move(v), {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}});
}

/// Regular icosahedron inscribed in the unit sphere, outward oriented.
inline SurfaceMesh icosahedron_mesh() {
  const double t = std::numbers::phi;
  std::vector<Vec3> v{{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Triangle> f{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                          {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                          {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  return build_mesh(std::move(v), std::move(f));
}

/// Doubly periodic n_u x n_v grid on the torus r(u, v) = ((4 + cos v) cos u,
/// (4 + cos v) sin u, sin v). Cell diagonals alternate direction from one
/// u-column to the next and stay fixed along a column, which gives the
/// chevron pattern whose vertex patches are not point-symmetric.
inline SurfaceMesh chevron_torus_mesh(int n_u, int n_v) {
  if (n_u < 4 || n_v < 4 || n_u % 2 != 0 || n_v % 2 != 0) {
    throw Error(ErrorKind::ParameterRange, "chevron torus needs even n_u, n_v >= 4");
  }
  using std::numbers::pi;
  std::vector<Vec3> vertices;
  vertices.reserve(static_cast<std::size_t>(n_u * n_v));
  for (int i = 0; i < n_u; ++i) {
    const double u = 2.0 * pi * i / n_u;
    for (int j = 0; j < n_v; ++j) {
      const double v = 2.0 * pi * j / n_v;
      vertices.emplace_back((4.0 + std::cos(v)) * std::cos(u), (4.0 + std::cos(v)) * std::sin(u), std::sin(v));
    }
  }
  auto id = [&](int i, int j) { return ((i + n_u) % n_u) * n_v + (j + n_v) % n_v; };
  std::vector<Triangle> triangles;
  triangles.reserve(static_cast<std::size_t>(2 * n_u * n_v));
  for (int i = 0; i < n_u; ++i) {
    for (int j = 0; j < n_v; ++j) {
      const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
      if (i % 2 == 0) {
        triangles.push_back({a, b, c});
        triangles.push_back({a, c, d});
      } else {
        triangles.push_back({a, b, d});
        triangles.push_back({b, c, d});
      }
    }
  }
  return build_mesh(std::move(vertices), std::move(triangles));
}

/// Surface of the cube [-1, 1]^3 with an n x n grid of split squares on
/// each face, outward oriented. Face interiors are exactly flat.
inline SurfaceMesh cube_mesh(int n) {
  if (n < 1) throw Error(ErrorKind::ParameterRange, "cube mesh needs n >= 1");
  std::map<std::array<int, 3>, int> ids;
  std::vector<Vec3> vertices;
  auto id = [&](const std::array<int, 3>& g) {
    auto [it, inserted] = ids.try_emplace(g, static_cast<int>(vertices.size()));
    if (inserted) vertices.emplace_back(2.0 * g[0] / n - 1.0, 2.0 * g[1] / n - 1.0, 2.0 * g[2] / n - 1.0);
    return it->second;
  };
  std::vector<Triangle> triangles;
  for (int axis = 0; axis < 3; ++axis) {
    const int b = (axis + 1) % 3, c = (axis + 2) % 3;
    for (int side : {0, n}) {
      for (int u = 0; u < n; ++u) {
        for (int v = 0; v < n; ++v) {
          auto corner = [&](int du, int dv) {
            std::array<int, 3> g{};
            g[static_cast<std::size_t>(axis)] = side;
            g[static_cast<std::size_t>(b)] = u + du;
            g[static_cast<std::size_t>(c)] = v + dv;
            return id(g);
          };
          const int p00 = corner(0, 0), p10 = corner(1, 0), p11 = corner(1, 1), p01 = corner(0, 1);
          if (side == n) {
            triangles.push_back({p00, p10, p11});
            triangles.push_back({p00, p11, p01});
          } else {
            triangles.push_back({p00, p11, p10});
            triangles.push_back({p00, p01, p11});
          }
        }
      }
    }
  }
  return build_mesh(std::move(vertices), std::move(triangles));
}

/// Point where the ray c + t d first crosses {phi = 0}, by bracketing and
/// bisection.
inline Vec3 ray_cast(const LevelSetSurface& s, const Vec3& direction) {
  const Vec3& c = s.star_center;
  const Vec3 d = direction.normalized();
  if (!(s.phi(c) < 0)) throw Error(ErrorKind::RayMiss, "star center is not inside surface '" + s.name + "'");
  const double t_max = 2.0 * s.bounding_box.diagonal();
  const int steps = 400;
  double lo = 0.0, hi = -1.0;
  for (int k = 1; k <= steps; ++k) {
    const double t = t_max * k / steps;
    if (s.phi(c + t * d) >= 0.0) {
      hi = t;
      lo = t_max * (k - 1) / steps;
      break;
    }
  }
  if (hi < 0) throw Error(ErrorKind::RayMiss, "no sign change along ray on '" + s.name + "'");
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    const double value = s.phi(c + mid * d);
    if (value == 0.0) return c + mid * d;
    (value < 0 ? lo : hi) = mid;
  }
  const Vec3 a = c + lo * d, b = c + hi * d;
  const Vec3 x = std::abs(s.phi(a)) <= std::abs(s.phi(b)) ? a : b;
  if (std::abs(s.phi(x)) > 1e-12) throw Error(ErrorKind::RayMiss, "bisection did not reach tolerance on '" + s.name + "'");
  return x;
}

/// Icosahedron subdivided `level` times, with every direction placed on
/// {phi = 0} by the surface's exact sphere map when it has one, else by
/// ray casting from its star center. Level L has 10 4^L + 2 vertices.
inline SurfaceMesh projected_icosphere(int level, const LevelSetSurface& surface) {
  if (level < 0) throw Error(ErrorKind::ParameterRange, "icosphere level must be nonnegative");
  const auto unit = sphere_surface();
  SurfaceMesh directions = icosahedron_mesh();
  for (int l = 0; l < level; ++l) directions = uniform_refine(directions, &unit);
  std::vector<Vec3> vertices(directions.num_vertices());
  for (std::size_t i = 0; i < vertices.size(); ++i) {
    const Vec3& d = directions.vertex(static_cast<int>(i));
    vertices[i] = surface.sphere_map ? surface.sphere_map(d) : ray_cast(surface, d);
  }
  return build_mesh(std::move(vertices), directions.triangles());
}

/// Largest |phi| over the mesh vertices and the vertex attaining it.
struct SurfaceResidual {
  double max_abs_phi = 0.0;
  int worst_vertex = -1;
};

inline SurfaceResidual surface_residual(const SurfaceMesh& mesh, const LevelSetSurface& s) {
  SurfaceResidual r;
  for (std::size_t i = 0; i < mesh.num_vertices(); ++i) {
    const double value = std::abs(s.phi(mesh.vertex(static_cast<int>(i))));
    if (value > r.max_abs_phi || r.worst_vertex < 0) {
      r.max_abs_phi = value;
      r.worst_vertex = static_cast<int>(i);
    }
  }
  return r;
}

}  // namespace pppr

#endif  // PPPR_GENERATORS_HPP
