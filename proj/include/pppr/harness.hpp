#ifndef PPPR_HARNESS_HPP
#define PPPR_HARNESS_HPP

// Experiment drivers: convergence tables over mesh levels and adaptive
// runs, with configuration parsing and CSV/VTK output.

#include "pppr/estimator.hpp"
#include "pppr/generators.hpp"
#include "pppr/mesh_io.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace pppr {

/// Flat key = value configuration. Keys are documented in the README.
struct ExperimentConfig {
  std::string problem = "torus_xy";
  /// "auto", "torus-chevron", "icosphere" or "import".
  std::string mesh = "auto";
  std::string mesh_path;
  /// First level; -1 picks the generator default (0 for the torus, 2 for
  /// icospheres, 0 for imported meshes).
  int level_start = -1;
  int levels = 5;
  std::vector<RecoveryMethod> methods{RecoveryMethod::Pppr, RecoveryMethod::PprExact, RecoveryMethod::PprAverage,
                                      RecoveryMethod::SimpleAverage, RecoveryMethod::WeightedAverage};
  /// Method whose recovered gradient drives eta and kappa.
  RecoveryMethod estimator = RecoveryMethod::Pppr;
  double theta = 0.3;
  std::size_t max_dof = 50000;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  bool max_norm = false;
  /// Recover from the interpolant u_I instead of the FE solution.
  bool from_interpolant = false;
  bool compute_true_error = true;
  double lambda = 0.6;

  static std::vector<RecoveryMethod> parse_methods(const std::string& list) {
    std::vector<RecoveryMethod> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
      const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
      if (b == std::string::npos) continue;
      out.push_back(parse_method(item.substr(b, e - b + 1)));
    }
    return out;
  }

  void set(const std::string& key, const std::string& value) {
    auto as_bool = [&] {
      if (value == "true" || value == "1" || value == "yes") return true;
      if (value == "false" || value == "0" || value == "no") return false;
      throw Error(ErrorKind::Config, "key '" + key + "' expects a boolean, got '" + value + "'");
    };
    try {
      if (key == "problem") problem = value;
      else if (key == "mesh") mesh = value;
      else if (key == "mesh_path") mesh_path = value;
      else if (key == "level_start") level_start = std::stoi(value);
      else if (key == "levels") levels = std::stoi(value);
      else if (key == "methods") methods = parse_methods(value);
      else if (key == "estimator") estimator = parse_method(value);
      else if (key == "theta") theta = std::stod(value);
      else if (key == "max_dof") max_dof = std::stoul(value);
      else if (key == "out") out_dir = value;
      else if (key == "seed") seed = std::stoull(value);
      else if (key == "max_norm") max_norm = as_bool();
      else if (key == "from_interpolant") from_interpolant = as_bool();
      else if (key == "compute_true_error") compute_true_error = as_bool();
      else if (key == "lambda") lambda = std::stod(value);
      else throw Error(ErrorKind::Config, "unknown configuration key '" + key + "'");
    } catch (const std::logic_error&) {
      throw Error(ErrorKind::Config, "bad value '" + value + "' for key '" + key + "'");
    }
  }

  /// Reads `key = value` lines; '#' starts a comment.
  void load(std::istream& in) {
    std::string line;
    long line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      const auto eq = line.find('=');
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r"), e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      if (trim(line).empty()) continue;
      if (eq == std::string::npos) throw Error(ErrorKind::Config, "line " + std::to_string(line_no) + ": expected key = value", line_no);
      set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
  }

  void load_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Config, "cannot open config file " + path.string());
    load(in);
  }

  std::string resolved_mesh() const {
    if (mesh != "auto") return mesh;
    if (!mesh_path.empty()) return "import";
    return problem == "torus_xy" ? "torus-chevron" : "icosphere";
  }

  int resolved_level_start() const {
    if (level_start >= 0) return level_start;
    return resolved_mesh() == "icosphere" ? 2 : 0;
  }

  void validate() const {
    bool known = false;
    for (const auto& n : problem_names()) known = known || n == problem;
    if (!known) throw Error(ErrorKind::Config, "unknown problem '" + problem + "'");
    const std::string m = resolved_mesh();
    if (m != "torus-chevron" && m != "icosphere" && m != "import") {
      throw Error(ErrorKind::Config, "unknown mesh source '" + mesh + "'");
    }
    if (m == "import" && mesh_path.empty()) throw Error(ErrorKind::Config, "mesh = import needs mesh_path");
    if (m == "torus-chevron" && problem != "torus_xy") {
      throw Error(ErrorKind::Config, "the chevron torus mesh only fits the torus problem");
    }
    if (levels < 1) throw Error(ErrorKind::Config, "level range is empty");
    if (level_start < -1) throw Error(ErrorKind::Config, "level_start must be nonnegative");
    if (methods.empty()) throw Error(ErrorKind::Config, "no recovery methods selected");
    if (!(theta > 0 && theta < 1)) throw Error(ErrorKind::Config, "theta must lie in (0, 1)");
    if (max_dof < 1) throw Error(ErrorKind::Config, "max_dof must be positive");
    if (problem == "sphere_singular" && !(lambda > 0 && lambda < 1)) {
      throw Error(ErrorKind::Config, "lambda must lie in (0, 1)");
    }
  }

  ManufacturedProblem make() const { return make_problem(problem, ProblemOptions{lambda}); }
};

/// order_L = log(e_{L-1}/e_L) / log(Dof_L/Dof_{L-1}); empty for the first
/// level.
inline std::vector<std::optional<double>> compute_orders(const std::vector<double>& errors,
                                                         const std::vector<double>& dofs) {
  if (errors.size() != dofs.size()) throw Error(ErrorKind::Precondition, "errors and dofs differ in length");
  std::vector<std::optional<double>> orders(errors.size());
  for (std::size_t l = 1; l < errors.size(); ++l) {
    orders[l] = std::log(errors[l - 1] / errors[l]) / std::log(dofs[l] / dofs[l - 1]);
  }
  return orders;
}

/// Least-squares slope of -log e against log Dof.
inline double fitted_order(const std::vector<double>& errors, const std::vector<double>& dofs) {
  if (errors.size() != dofs.size() || errors.size() < 2) {
    throw Error(ErrorKind::Precondition, "fitted order needs at least two matching samples");
  }
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(errors.size());
  for (std::size_t i = 0; i < errors.size(); ++i) {
    const double x = std::log(dofs[i]), y = -std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

struct MethodErrors {
  RecoveryMethod method;
  double De = 0.0;
  double De_max = 0.0;
};

struct ConvergenceRow {
  int level = 0;
  std::size_t dof = 0;
  double h_max = 0.0;
  double De = 0.0;
  double De_I = 0.0;
  double eta = 0.0;
  double kappa = 0.0;
  std::vector<MethodErrors> methods;
  int cg_iterations = 0;
};

struct ConvergenceRecord {
  std::string problem;
  std::vector<ConvergenceRow> rows;

  std::vector<double> dofs() const {
    std::vector<double> d;
    for (const auto& r : rows) d.push_back(static_cast<double>(r.dof));
    return d;
  }

  template <class Get>
  std::vector<double> column(Get get) const {
    std::vector<double> c;
    for (const auto& r : rows) c.push_back(get(r));
    return c;
  }

  std::vector<double> method_column(RecoveryMethod m, bool max_norm = false) const {
    return column([&](const ConvergenceRow& r) {
      for (const auto& e : r.methods) {
        if (e.method == m) return max_norm ? e.De_max : e.De;
      }
      throw Error(ErrorKind::Precondition, std::string("method ") + method_name(m) + " not in record");
    });
  }

  /// Order over the last two levels.
  static double last_order(const std::vector<double>& errors, const std::vector<double>& dofs) {
    const auto o = compute_orders(errors, dofs);
    if (o.empty() || !o.back()) throw Error(ErrorKind::Precondition, "need at least two levels for an order");
    return *o.back();
  }
};

namespace detail {

inline std::string csv_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10e", v);
  return buf;
}

inline std::string csv_order(const std::optional<double>& o) {
  if (!o) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", *o);
  return buf;
}

}  // namespace detail

/// Columns: level, dof, h_max, De, De_order, De_I, De_I_order, eta, kappa,
/// then De_<m>, De_<m>_order per method, then (with max norms)
/// De0_<m>, De0_<m>_order per method.
inline void write_convergence_csv(std::ostream& os, const ConvergenceRecord& rec, bool max_norm) {
  const auto dofs = rec.dofs();
  std::vector<RecoveryMethod> methods;
  if (!rec.rows.empty()) {
    for (const auto& e : rec.rows.front().methods) methods.push_back(e.method);
  }
  os << "level,dof,h_max,De,De_order,De_I,De_I_order,eta,kappa";
  for (auto m : methods) os << ",De_" << method_name(m) << ",De_" << method_name(m) << "_order";
  if (max_norm) {
    for (auto m : methods) os << ",De0_" << method_name(m) << ",De0_" << method_name(m) << "_order";
  }
  os << '\n';
  const auto de_o = compute_orders(rec.column([](const ConvergenceRow& r) { return r.De; }), dofs);
  const auto dei_o = compute_orders(rec.column([](const ConvergenceRow& r) { return r.De_I; }), dofs);
  std::vector<std::vector<std::optional<double>>> m_o, mx_o;
  for (auto m : methods) {
    m_o.push_back(compute_orders(rec.method_column(m), dofs));
    mx_o.push_back(compute_orders(rec.method_column(m, true), dofs));
  }
  using detail::csv_number;
  using detail::csv_order;
  for (std::size_t l = 0; l < rec.rows.size(); ++l) {
    const auto& r = rec.rows[l];
    os << r.level << ',' << r.dof << ',' << csv_number(r.h_max) << ',' << csv_number(r.De) << ',' << csv_order(de_o[l])
       << ',' << csv_number(r.De_I) << ',' << csv_order(dei_o[l]) << ',' << csv_number(r.eta) << ','
       << csv_number(r.kappa);
    for (std::size_t k = 0; k < methods.size(); ++k) os << ',' << csv_number(r.methods[k].De) << ',' << csv_order(m_o[k][l]);
    if (max_norm) {
      for (std::size_t k = 0; k < methods.size(); ++k) {
        os << ',' << csv_number(r.methods[k].De_max) << ',' << csv_order(mx_o[k][l]);
      }
    }
    os << '\n';
  }
}

/// Mesh for level `level` of a convergence study. Generated sources are
/// rebuilt at each level; imported meshes are red-refined with projection.
inline SurfaceMesh convergence_mesh(const ExperimentConfig& config, const ManufacturedProblem& problem, int level,
                                    const SurfaceMesh* previous) {
  const std::string source = config.resolved_mesh();
  if (source == "torus-chevron") return chevron_torus_mesh(20 << level, 10 << level);
  if (source == "icosphere") return projected_icosphere(level, problem.surface);
  if (previous) return uniform_refine(*previous, &problem.surface);
  SurfaceMesh mesh = import_mesh(config.mesh_path);
  for (int l = 0; l < level; ++l) mesh = uniform_refine(mesh, &problem.surface);
  return mesh;
}

inline std::filesystem::path prepare_out_dir(const ExperimentConfig& config) {
  std::filesystem::path dir(config.out_dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Runs every level, computes all norms and, if out_dir is nonempty,
/// writes convergence_<problem>.csv there.
inline ConvergenceRecord run_convergence(const ExperimentConfig& config) {
  config.validate();
  const ManufacturedProblem problem = config.make();
  ConvergenceRecord rec;
  rec.problem = problem.name;
  const int first = config.resolved_level_start();
  SurfaceMesh mesh;
  for (int l = first; l < first + config.levels; ++l) {
    try {
      mesh = convergence_mesh(config, problem, l, l == first ? nullptr : &mesh);
      ConvergenceRow row;
      row.level = l;
      row.dof = mesh.num_vertices();
      row.h_max = mesh.h_max();
      const ExactGradientSamples exact(mesh, problem);
      const ScalarField u_interp = interpolate(mesh, problem);
      FeSolution sol;
      if (config.from_interpolant) {
        sol.u = u_interp;
      } else {
        sol = fe_solve(mesh, problem);
      }
      row.cg_iterations = sol.iterations;
      row.De = gradient_error(exact, sol.u);
      row.De_I = interpolant_gradient_distance(mesh, u_interp, sol.u);
      std::optional<VectorField> for_estimator;
      for (auto m : config.methods) {
        VectorField g = recover(m, mesh, sol.u, &problem.surface);
        row.methods.push_back({m, recovered_error(exact, g), recovered_max_error(exact, g)});
        if (m == config.estimator) for_estimator = std::move(g);
      }
      if (!for_estimator) for_estimator = recover(config.estimator, mesh, sol.u, &problem.surface);
      row.eta = estimate(mesh, sol.u, *for_estimator).global;
      row.kappa = row.De > 0 ? row.eta / row.De : 0.0;
      rec.rows.push_back(std::move(row));
    } catch (const Error& e) {
      rethrow_with_context(e, "level", l);
    }
  }
  if (!config.out_dir.empty()) {
    std::ofstream out(prepare_out_dir(config) / ("convergence_" + problem.name + ".csv"));
    write_convergence_csv(out, rec, config.max_norm);
  }
  return rec;
}

/// Mean distance from the barycenters of the marked triangles to the
/// nearest of `points`; 0 for an empty marked set.
inline double mean_marked_distance(const SurfaceMesh& mesh, const std::vector<int>& marked,
                                   const std::vector<Vec3>& points) {
  if (marked.empty() || points.empty()) return 0.0;
  double sum = 0.0;
  for (int t : marked) {
    const Vec3 b = mesh.barycenter(t);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& p : points) best = std::min(best, (b - p).norm());
    sum += best;
  }
  return sum / static_cast<double>(marked.size());
}

struct AdaptiveRun {
  std::vector<AdaptiveStep> history;
  std::filesystem::path csv_path;
  std::filesystem::path vtk_path;
};

/// Columns: iteration, dof, eta, De, kappa, marked_count,
/// marked_singular_distance, wall_time_ms. De and kappa are empty when the
/// true error is not computed; the distance is empty without singular points.
inline void write_adaptive_csv(std::ostream& os, const std::vector<AdaptiveStep>& history,
                               const std::vector<Vec3>& singular_points) {
  using detail::csv_number;
  os << "iteration,dof,eta,De,kappa,marked_count,marked_singular_distance,wall_time_ms\n";
  for (const auto& s : history) {
    os << s.iteration << ',' << s.dof() << ',' << csv_number(s.indicator.global) << ','
       << (s.De ? csv_number(*s.De) : "") << ',' << (s.kappa ? csv_number(*s.kappa) : "") << ',' << s.marked.size()
       << ',' << (singular_points.empty() ? "" : csv_number(mean_marked_distance(s.mesh, s.marked, singular_points)))
       << ',';
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", s.wall_time_ms);
    os << buf << '\n';
  }
}

/// Initial adaptive mesh: the level_start icosphere, or the imported mesh.
inline SurfaceMesh adaptive_initial_mesh(const ExperimentConfig& config, const ManufacturedProblem& problem) {
  const std::string source = config.resolved_mesh();
  if (source == "torus-chevron") return chevron_torus_mesh(20 << config.resolved_level_start(), 10 << config.resolved_level_start());
  if (source == "icosphere") return projected_icosphere(config.resolved_level_start(), problem.surface);
  return import_mesh(config.mesh_path);
}

/// Drives adaptive_solve and writes adaptive_<problem>.csv and
/// adaptive_<problem>_final.vtk when out_dir is nonempty.
inline AdaptiveRun run_adaptive(const ExperimentConfig& config) {
  config.validate();
  const ManufacturedProblem problem = config.make();
  AdaptiveOptions opts;
  opts.theta = config.theta;
  opts.max_dof = config.max_dof;
  opts.method = config.estimator;
  opts.compute_true_error = config.compute_true_error;
  AdaptiveRun run;
  run.history = adaptive_solve(problem, adaptive_initial_mesh(config, problem), opts);
  if (!config.out_dir.empty()) {
    const auto dir = prepare_out_dir(config);
    run.csv_path = dir / ("adaptive_" + problem.name + ".csv");
    run.vtk_path = dir / ("adaptive_" + problem.name + "_final.vtk");
    std::ofstream csv(run.csv_path);
    write_adaptive_csv(csv, run.history, problem.singular_points);
    const auto& last = run.history.back();
    FieldSet fields;
    fields.point_scalars.emplace_back("u_h", last.u_h.values);
    fields.point_vectors.emplace_back("recovered_gradient", last.recovered.values);
    fields.cell_scalars.emplace_back("eta", last.indicator.per_triangle);
    export_mesh(last.mesh, fields, run.vtk_path, MeshFormat::Vtk);
  }
  return run;
}

}  // namespace pppr

#endif  // PPPR_HARNESS_HPP
