#ifndef PPPR_MESH_HPP
#define PPPR_MESH_HPP

// Indexed triangle mesh of a closed oriented 2-manifold.

#include "pppr/core.hpp"

#include <array>
#include <cstdint>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace pppr {

using Triangle = std::array<int, 3>;

struct EdgeTriangles {
  int first = -1;
  int second = -1;
};

/// Immutable after construction; all refinement returns a new mesh.
class SurfaceMesh {
 public:
  SurfaceMesh() = default;

  const std::vector<Vec3>& vertices() const { return vertices_; }
  const std::vector<Triangle>& triangles() const { return triangles_; }
  const Vec3& vertex(int i) const { return vertices_[static_cast<std::size_t>(i)]; }
  const Triangle& triangle(int t) const { return triangles_[static_cast<std::size_t>(t)]; }

  std::size_t num_vertices() const { return vertices_.size(); }
  std::size_t num_triangles() const { return triangles_.size(); }
  std::size_t num_edges() const { return edges_.size(); }

  const std::vector<int>& vertex_triangles(int v) const { return vertex_triangles_[static_cast<std::size_t>(v)]; }
  /// Sorted one-ring of v.
  const std::vector<int>& vertex_neighbors(int v) const { return vertex_neighbors_[static_cast<std::size_t>(v)]; }
  /// Undirected edges as (a, b) with a < b.
  const std::vector<std::array<int, 2>>& edges() const { return edges_; }

  EdgeTriangles edge_triangles(int a, int b) const {
    auto it = edge_map_.find(edge_key(a, b));
    if (it == edge_map_.end()) {
      throw Error(ErrorKind::Precondition, "(" + std::to_string(a) + ", " + std::to_string(b) + ") is not an edge");
    }
    return it->second;
  }

  /// Triangle across the edge opposite local vertex k of triangle t.
  int triangle_neighbor(int t, int k) const { return neighbors_[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)]; }

  /// Local index of the vertex opposite the refinement edge of t.
  int refinement_edge(int t) const { return refinement_edges_[static_cast<std::size_t>(t)]; }
  const std::vector<int>& refinement_edges() const { return refinement_edges_; }

  int generation() const { return generation_; }

  Vec3 triangle_cross(int t) const {
    const auto& tri = triangle(t);
    return (vertex(tri[1]) - vertex(tri[0])).cross(vertex(tri[2]) - vertex(tri[0]));
  }
  Vec3 triangle_normal(int t) const { return triangle_cross(t).normalized(); }
  double triangle_area(int t) const { return 0.5 * triangle_cross(t).norm(); }
  Vec3 barycenter(int t) const {
    const auto& tri = triangle(t);
    return (vertex(tri[0]) + vertex(tri[1]) + vertex(tri[2])) / 3.0;
  }

  double area() const {
    double a = 0.0;
    for (std::size_t t = 0; t < triangles_.size(); ++t) a += triangle_area(static_cast<int>(t));
    return a;
  }

  /// Longest edge attached to vertex v.
  double longest_incident_edge(int v) const {
    double h = 0.0;
    for (int w : vertex_neighbors(v)) h = std::max(h, (vertex(w) - vertex(v)).norm());
    return h;
  }

  /// Maximum triangle diameter.
  double h_max() const {
    double h = 0.0;
    for (const auto& e : edges_) h = std::max(h, (vertex(e[0]) - vertex(e[1])).norm());
    return h;
  }

  long euler_characteristic() const {
    return static_cast<long>(vertices_.size()) - static_cast<long>(edges_.size()) +
           static_cast<long>(triangles_.size());
  }

  static std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) | static_cast<std::uint32_t>(b);
  }

 private:
  friend SurfaceMesh build_mesh(std::vector<Vec3>, std::vector<Triangle>, std::vector<int>, int);

  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<std::vector<int>> vertex_triangles_;
  std::vector<std::vector<int>> vertex_neighbors_;
  std::vector<std::array<int, 2>> edges_;
  std::unordered_map<std::uint64_t, EdgeTriangles> edge_map_;
  std::vector<std::array<int, 3>> neighbors_;
  std::vector<int> refinement_edges_;
  int generation_ = 0;
};

/// Local index of the vertex opposite the longest edge of `tri`.
inline int longest_edge_index(const std::vector<Vec3>& vertices, const Triangle& tri) {
  int best = 0;
  double best_len = -1.0;
  for (int k = 0; k < 3; ++k) {
    const double len = (vertices[static_cast<std::size_t>(tri[(k + 1) % 3])] -
                        vertices[static_cast<std::size_t>(tri[(k + 2) % 3])]).squaredNorm();
    if (len > best_len) {
      best_len = len;
      best = k;
    }
  }
  return best;
}

/// Builds adjacency and verifies the closed-manifold invariants.
///
/// `refinement_edges` may be empty, in which case each triangle's longest
/// edge is used.
inline SurfaceMesh build_mesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles,
                              std::vector<int> refinement_edges = {}, int generation = 0) {
  const int nv = static_cast<int>(vertices.size());
  const int nt = static_cast<int>(triangles.size());
  if (nt == 0) throw Error(ErrorKind::Precondition, "mesh has no triangles");

  Vec3 lo = vertices.empty() ? Vec3::Zero() : vertices.front();
  Vec3 hi = lo;
  for (const auto& v : vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const double min_area = 1e-14 * (hi - lo).squaredNorm();

  std::vector<std::pair<std::array<int, 3>, int>> sorted_triangles;
  sorted_triangles.reserve(triangles.size());
  for (int t = 0; t < nt; ++t) {
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    for (int v : tri) {
      if (v < 0 || v >= nv) throw Error(ErrorKind::Precondition, "vertex index out of range in triangle", t);
    }
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
      throw Error(ErrorKind::DegenerateTriangle, "repeated vertex in triangle " + std::to_string(t), t);
    }
    std::array<int, 3> sorted = tri;
    std::sort(sorted.begin(), sorted.end());
    sorted_triangles.emplace_back(sorted, t);
    const auto& a = vertices[static_cast<std::size_t>(tri[0])];
    const auto& b = vertices[static_cast<std::size_t>(tri[1])];
    const auto& c = vertices[static_cast<std::size_t>(tri[2])];
    if (0.5 * (b - a).cross(c - a).norm() < min_area) {
      throw Error(ErrorKind::DegenerateTriangle, "triangle " + std::to_string(t) + " has near-zero area", t);
    }
  }
  std::sort(sorted_triangles.begin(), sorted_triangles.end());
  for (std::size_t j = 1; j < sorted_triangles.size(); ++j) {
    if (sorted_triangles[j].first == sorted_triangles[j - 1].first) {
      const int t = std::max(sorted_triangles[j].second, sorted_triangles[j - 1].second);
      throw Error(ErrorKind::Precondition, "duplicate triangle " + std::to_string(t), t);
    }
  }

  SurfaceMesh mesh;
  mesh.edge_map_.reserve(triangles.size() * 2);
  std::unordered_map<std::uint64_t, std::array<int, 2>> directed;  // first triangle's direction
  directed.reserve(triangles.size() * 2);
  for (int t = 0; t < nt; ++t) {
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    for (int k = 0; k < 3; ++k) {
      const int a = tri[(k + 1) % 3];
      const int b = tri[(k + 2) % 3];
      const auto key = SurfaceMesh::edge_key(a, b);
      auto [it, inserted] = mesh.edge_map_.try_emplace(key);
      if (inserted) {
        it->second.first = t;
        directed.emplace(key, std::array<int, 2>{a, b});
        mesh.edges_.push_back({std::min(a, b), std::max(a, b)});
      } else if (it->second.second < 0) {
        it->second.second = t;
        if (directed[key][0] == a) {
          throw Error(ErrorKind::InconsistentOrientation,
                      "edge (" + std::to_string(a) + ", " + std::to_string(b) + ") traversed twice in one direction", t);
        }
      } else {
        throw Error(ErrorKind::NonManifoldEdge,
                    "edge (" + std::to_string(a) + ", " + std::to_string(b) + ") has more than two triangles", t);
      }
    }
  }
  for (const auto& e : mesh.edges_) {
    if (mesh.edge_map_[SurfaceMesh::edge_key(e[0], e[1])].second < 0) {
      throw Error(ErrorKind::NonManifoldEdge,
                  "boundary edge (" + std::to_string(e[0]) + ", " + std::to_string(e[1]) + ")");
    }
  }

  mesh.vertex_triangles_.assign(static_cast<std::size_t>(nv), {});
  for (int t = 0; t < nt; ++t) {
    for (int v : triangles[static_cast<std::size_t>(t)]) mesh.vertex_triangles_[static_cast<std::size_t>(v)].push_back(t);
  }
  mesh.vertex_neighbors_.assign(static_cast<std::size_t>(nv), {});
  for (const auto& e : mesh.edges_) {
    mesh.vertex_neighbors_[static_cast<std::size_t>(e[0])].push_back(e[1]);
    mesh.vertex_neighbors_[static_cast<std::size_t>(e[1])].push_back(e[0]);
  }
  for (int v = 0; v < nv; ++v) {
    auto& nb = mesh.vertex_neighbors_[static_cast<std::size_t>(v)];
    if (nb.empty()) throw Error(ErrorKind::Precondition, "vertex " + std::to_string(v) + " is not referenced", v);
    std::sort(nb.begin(), nb.end());
  }

  mesh.neighbors_.resize(static_cast<std::size_t>(nt));
  for (int t = 0; t < nt; ++t) {
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    for (int k = 0; k < 3; ++k) {
      const auto& et = mesh.edge_map_[SurfaceMesh::edge_key(tri[(k + 1) % 3], tri[(k + 2) % 3])];
      mesh.neighbors_[static_cast<std::size_t>(t)][static_cast<std::size_t>(k)] = et.first == t ? et.second : et.first;
    }
  }

  if (refinement_edges.empty()) {
    refinement_edges.resize(static_cast<std::size_t>(nt));
    for (int t = 0; t < nt; ++t) {
      refinement_edges[static_cast<std::size_t>(t)] = longest_edge_index(vertices, triangles[static_cast<std::size_t>(t)]);
    }
  } else if (refinement_edges.size() != triangles.size()) {
    throw Error(ErrorKind::Precondition, "refinement edge list does not match the triangle count");
  }

  mesh.vertices_ = std::move(vertices);
  mesh.triangles_ = std::move(triangles);
  mesh.refinement_edges_ = std::move(refinement_edges);
  mesh.generation_ = generation;
  return mesh;
}

/// Vertices within distance k * h_i of vertex i, where h_i is the longest
/// edge attached to it. Center listed first.
struct VertexPatch {
  int center = -1;
  int ring_parameter = 1;
  std::vector<int> member_vertices;
  double h = 0.0;
};

/// Breadth-first search over the vertex graph that admits vertices within
/// Euclidean distance k * h_i of x_i.
inline VertexPatch vertex_patch(const SurfaceMesh& mesh, int i, int k) {
  if (k < 1) throw Error(ErrorKind::Precondition, "ring parameter must be at least 1");
  VertexPatch patch;
  patch.center = i;
  patch.ring_parameter = k;
  patch.h = mesh.longest_incident_edge(i);
  const double radius = k * patch.h;
  const Vec3& xi = mesh.vertex(i);
  std::vector<int> queue{i};
  std::unordered_set<int> visited{i};
  patch.member_vertices.push_back(i);
  for (std::size_t head = 0; head < queue.size(); ++head) {
    for (int w : mesh.vertex_neighbors(queue[head])) {
      if (!visited.insert(w).second) continue;
      if ((mesh.vertex(w) - xi).norm() <= radius) {
        patch.member_vertices.push_back(w);
        queue.push_back(w);
      }
    }
  }
  return patch;
}

}  // namespace pppr

#endif  // PPPR_MESH_HPP
