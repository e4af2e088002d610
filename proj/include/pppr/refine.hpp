#ifndef PPPR_REFINE_HPP
#define PPPR_REFINE_HPP

// Uniform (red) refinement and newest-vertex bisection. New vertices are
// moved onto the surface by one first-order projection step when a surface
// is supplied; existing vertices never move.

#include "pppr/mesh.hpp"
#include "pppr/surface.hpp"

#include <unordered_map>
#include <unordered_set>

namespace pppr {

namespace detail {

inline Vec3 place_midpoint(const Vec3& a, const Vec3& b, const LevelSetSurface* surface) {
  const Vec3 m = 0.5 * (a + b);
  return surface ? project_first_order(*surface, m) : m;
}

}  // namespace detail

/// Splits every triangle into four through its edge midpoints.
inline SurfaceMesh uniform_refine(const SurfaceMesh& mesh, const LevelSetSurface* surface = nullptr) {
  std::vector<Vec3> vertices = mesh.vertices();
  vertices.reserve(mesh.num_vertices() + mesh.num_edges());
  std::unordered_map<std::uint64_t, int> midpoint;
  midpoint.reserve(mesh.num_edges() * 2);
  for (const auto& e : mesh.edges()) {
    midpoint.emplace(SurfaceMesh::edge_key(e[0], e[1]), static_cast<int>(vertices.size()));
    vertices.push_back(detail::place_midpoint(mesh.vertex(e[0]), mesh.vertex(e[1]), surface));
  }
  std::vector<Triangle> triangles;
  triangles.reserve(4 * mesh.num_triangles());
  for (const auto& t : mesh.triangles()) {
    const int ab = midpoint.at(SurfaceMesh::edge_key(t[0], t[1]));
    const int bc = midpoint.at(SurfaceMesh::edge_key(t[1], t[2]));
    const int ca = midpoint.at(SurfaceMesh::edge_key(t[2], t[0]));
    triangles.push_back({t[0], ab, ca});
    triangles.push_back({ab, t[1], bc});
    triangles.push_back({ca, bc, t[2]});
    triangles.push_back({ab, bc, ca});
  }
  return build_mesh(std::move(vertices), std::move(triangles), {}, mesh.generation() + 1);
}

/// Newest-vertex bisection of the marked triangles plus the conforming
/// closure. Each triangle (p0, p1, p2) with refinement edge p1p2 splits at
/// the edge midpoint m into (m, p0, p1) and (m, p2, p0), whose refinement
/// edges are the ones opposite m.
inline SurfaceMesh bisect_marked(const SurfaceMesh& mesh, const std::vector<int>& marked,
                                 const LevelSetSurface* surface = nullptr) {
  if (marked.empty()) return mesh;
  const int nt = static_cast<int>(mesh.num_triangles());
  auto refinement_key = [&](int t) {
    const auto& tri = mesh.triangle(t);
    const int k = mesh.refinement_edge(t);
    return SurfaceMesh::edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3]);
  };

  std::unordered_set<std::uint64_t> marked_edges;
  std::vector<int> queue;
  auto mark_edge_of = [&](int t) {
    if (marked_edges.insert(refinement_key(t)).second) queue.push_back(t);
  };
  for (int t : marked) {
    if (t < 0 || t >= nt) throw Error(ErrorKind::Precondition, "marked triangle out of range", t);
    mark_edge_of(t);
  }
  if (marked_edges.empty()) return mesh;

  // Closure: a triangle with any split edge must also split its refinement edge.
  const std::size_t limit = 10 * mesh.num_triangles();
  for (std::size_t head = 0; head < queue.size(); ++head) {
    if (marked_edges.size() > limit) {
      throw Error(ErrorKind::ClosureOverflow, "closure exceeded " + std::to_string(limit) + " splits");
    }
    const int t = queue[head];
    const int k = mesh.refinement_edge(t);
    const int neighbor = mesh.triangle_neighbor(t, k);
    mark_edge_of(neighbor);
  }

  std::vector<Vec3> vertices = mesh.vertices();
  std::unordered_map<std::uint64_t, int> midpoint;
  midpoint.reserve(marked_edges.size() * 2);
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangle(t);
    for (int k = 0; k < 3; ++k) {
      const int a = tri[(k + 1) % 3], b = tri[(k + 2) % 3];
      const auto key = SurfaceMesh::edge_key(a, b);
      if (!marked_edges.count(key) || midpoint.count(key)) continue;
      midpoint.emplace(key, static_cast<int>(vertices.size()));
      vertices.push_back(detail::place_midpoint(mesh.vertex(a), mesh.vertex(b), surface));
    }
  }

  std::vector<Triangle> triangles;
  std::vector<int> refinement_edges;
  triangles.reserve(mesh.num_triangles() + 3 * midpoint.size());
  refinement_edges.reserve(triangles.capacity());
  // (p0, p1, p2) has refinement edge p1p2; only original edges can be marked,
  // so the recursion is at most two levels deep.
  auto split = [&](auto&& self, const Triangle& tri) -> void {
    const auto it = midpoint.find(SurfaceMesh::edge_key(tri[1], tri[2]));
    if (it == midpoint.end()) {
      triangles.push_back(tri);
      refinement_edges.push_back(0);
      return;
    }
    const int m = it->second;
    self(self, Triangle{m, tri[0], tri[1]});
    self(self, Triangle{m, tri[2], tri[0]});
  };
  for (int t = 0; t < nt; ++t) {
    const auto& tri = mesh.triangle(t);
    const int k = mesh.refinement_edge(t);
    if (!midpoint.contains(SurfaceMesh::edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3]))) {
      triangles.push_back(tri);
      refinement_edges.push_back(k);
      continue;
    }
    split(split, Triangle{tri[k], tri[(k + 1) % 3], tri[(k + 2) % 3]});
  }
  return build_mesh(std::move(vertices), std::move(triangles), std::move(refinement_edges), mesh.generation() + 1);
}

}  // namespace pppr

#endif  // PPPR_REFINE_HPP
