#ifndef PPPR_MESH_IO_HPP
#define PPPR_MESH_IO_HPP

// ASCII OFF / OBJ import and export, and legacy VTK POLYDATA export with
// named point and cell fields.

#include "pppr/mesh.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace pppr {

enum class MeshFormat { Off, Obj, Vtk };

inline MeshFormat parse_mesh_format(std::string name) {
  for (auto& c : name) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (!name.empty() && name.front() == '.') name.erase(0, 1);
  if (name == "off") return MeshFormat::Off;
  if (name == "obj") return MeshFormat::Obj;
  if (name == "vtk") return MeshFormat::Vtk;
  throw Error(ErrorKind::UnknownFormat, "unknown mesh format '" + name + "'");
}

inline MeshFormat format_from_path(const std::filesystem::path& path) {
  return parse_mesh_format(path.extension().string());
}

/// Named per-vertex and per-triangle data written alongside a VTK mesh.
struct FieldSet {
  std::vector<std::pair<std::string, std::vector<double>>> point_scalars;
  std::vector<std::pair<std::string, std::vector<Vec3>>> point_vectors;
  std::vector<std::pair<std::string, std::vector<double>>> cell_scalars;
};

namespace detail {

inline std::ostream& full_precision(std::ostream& os) {
  return os << std::setprecision(std::numeric_limits<double>::max_digits10);
}

[[noreturn]] inline void parse_error(const std::filesystem::path& path, long line, const std::string& what) {
  throw Error(ErrorKind::Parse, path.string() + ":" + std::to_string(line) + ": " + what, line);
}

/// Next line that is neither blank nor a comment; false at end of file.
inline bool next_content_line(std::istream& in, std::string& line, long& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    const auto pos = line.find('#');
    if (pos != std::string::npos) line.erase(pos);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return true;
  }
  return false;
}

inline SurfaceMesh read_off(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  long line_no = 0;
  if (!next_content_line(in, line, line_no)) parse_error(path, line_no, "empty file");
  std::istringstream header(line);
  std::string magic;
  header >> magic;
  if (magic != "OFF") parse_error(path, line_no, "expected OFF header");
  long nv = -1, nf = -1, ne = 0;
  if (!(header >> nv)) {
    if (!next_content_line(in, line, line_no)) parse_error(path, line_no, "missing counts");
    header = std::istringstream(line);
    header >> nv;
  }
  if (!(header >> nf >> ne) || nv < 0 || nf < 0) parse_error(path, line_no, "malformed counts line");
  std::vector<Vec3> vertices(static_cast<std::size_t>(nv));
  for (auto& v : vertices) {
    if (!next_content_line(in, line, line_no)) parse_error(path, line_no, "unexpected end of vertex list");
    std::istringstream ls(line);
    if (!(ls >> v[0] >> v[1] >> v[2])) parse_error(path, line_no, "malformed vertex");
  }
  std::vector<Triangle> triangles(static_cast<std::size_t>(nf));
  for (auto& t : triangles) {
    if (!next_content_line(in, line, line_no)) parse_error(path, line_no, "unexpected end of face list");
    std::istringstream ls(line);
    int arity = 0;
    if (!(ls >> arity)) parse_error(path, line_no, "malformed face");
    if (arity != 3) parse_error(path, line_no, "face has arity " + std::to_string(arity) + ", only triangles are supported");
    if (!(ls >> t[0] >> t[1] >> t[2])) parse_error(path, line_no, "malformed face");
  }
  return build_mesh(std::move(vertices), std::move(triangles));
}

inline SurfaceMesh read_obj(std::istream& in, const std::filesystem::path& path) {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::string line;
  long line_no = 0;
  while (next_content_line(in, line, line_no)) {
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "v") {
      Vec3 v;
      if (!(ls >> v[0] >> v[1] >> v[2])) parse_error(path, line_no, "malformed vertex");
      vertices.push_back(v);
    } else if (tag == "f") {
      std::vector<int> ids;
      std::string token;
      while (ls >> token) {
        const auto slash = token.find('/');
        try {
          int id = std::stoi(token.substr(0, slash));
          ids.push_back(id < 0 ? static_cast<int>(vertices.size()) + id : id - 1);
        } catch (const std::exception&) {
          parse_error(path, line_no, "malformed face index '" + token + "'");
        }
      }
      if (ids.size() != 3) {
        parse_error(path, line_no, "face has arity " + std::to_string(ids.size()) + ", only triangles are supported");
      }
      triangles.push_back({ids[0], ids[1], ids[2]});
    }
    // Other records (vn, vt, o, g, s, usemtl, ...) carry nothing we need.
  }
  return build_mesh(std::move(vertices), std::move(triangles));
}

}  // namespace detail

inline SurfaceMesh import_mesh(const std::filesystem::path& path, MeshFormat format) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parse, "cannot open " + path.string());
  switch (format) {
    case MeshFormat::Off: return detail::read_off(in, path);
    case MeshFormat::Obj: return detail::read_obj(in, path);
    case MeshFormat::Vtk: break;
  }
  throw Error(ErrorKind::UnknownFormat, "VTK import is not supported");
}

inline SurfaceMesh import_mesh(const std::filesystem::path& path) { return import_mesh(path, format_from_path(path)); }

inline void write_off(std::ostream& os, const SurfaceMesh& mesh) {
  detail::full_precision(os);
  os << "OFF\n" << mesh.num_vertices() << ' ' << mesh.num_triangles() << ' ' << mesh.num_edges() << '\n';
  for (const auto& v : mesh.vertices()) os << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  for (const auto& t : mesh.triangles()) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

inline void write_obj(std::ostream& os, const SurfaceMesh& mesh) {
  detail::full_precision(os);
  for (const auto& v : mesh.vertices()) os << "v " << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  for (const auto& t : mesh.triangles()) os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

inline void write_vtk(std::ostream& os, const SurfaceMesh& mesh, const FieldSet& fields = {}) {
  const auto nv = mesh.num_vertices();
  const auto nt = mesh.num_triangles();
  auto check = [](std::size_t got, std::size_t want, const std::string& name) {
    if (got != want) throw Error(ErrorKind::Precondition, "field '" + name + "' has the wrong length");
  };
  detail::full_precision(os);
  os << "# vtk DataFile Version 3.0\npppr surface mesh\nASCII\nDATASET POLYDATA\n";
  os << "POINTS " << nv << " double\n";
  for (const auto& v : mesh.vertices()) os << v[0] << ' ' << v[1] << ' ' << v[2] << '\n';
  os << "POLYGONS " << nt << ' ' << 4 * nt << '\n';
  for (const auto& t : mesh.triangles()) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  if (!fields.point_scalars.empty() || !fields.point_vectors.empty()) {
    os << "POINT_DATA " << nv << '\n';
    for (const auto& [name, values] : fields.point_scalars) {
      check(values.size(), nv, name);
      os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double x : values) os << x << '\n';
    }
    for (const auto& [name, values] : fields.point_vectors) {
      check(values.size(), nv, name);
      os << "VECTORS " << name << " double\n";
      for (const auto& x : values) os << x[0] << ' ' << x[1] << ' ' << x[2] << '\n';
    }
  }
  if (!fields.cell_scalars.empty()) {
    os << "CELL_DATA " << nt << '\n';
    for (const auto& [name, values] : fields.cell_scalars) {
      check(values.size(), nt, name);
      os << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (double x : values) os << x << '\n';
    }
  }
}

inline void export_mesh(const SurfaceMesh& mesh, const FieldSet& fields, const std::filesystem::path& path,
                        MeshFormat format) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Parse, "cannot write " + path.string());
  switch (format) {
    case MeshFormat::Off: write_off(os, mesh); break;
    case MeshFormat::Obj: write_obj(os, mesh); break;
    case MeshFormat::Vtk: write_vtk(os, mesh, fields); break;
  }
}

inline void export_mesh(const SurfaceMesh& mesh, const std::filesystem::path& path, MeshFormat format) {
  export_mesh(mesh, {}, path, format);
}

}  // namespace pppr

#endif  // PPPR_MESH_IO_HPP
