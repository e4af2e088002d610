// Command-line front end: convergence tables, adaptive runs, the invariant
// suite and mesh conversion.

#include "pppr/pppr.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace pppr;

void print_convergence_table(const ConvergenceRecord& rec, bool max_norm) {
  const auto dofs = rec.dofs();
  std::vector<RecoveryMethod> methods;
  for (const auto& e : rec.rows.front().methods) methods.push_back(e.method);
  auto order_cell = [](const std::optional<double>& o) {
    char buf[16];
    if (o) std::snprintf(buf, sizeof buf, "%6.2f", *o);
    else std::snprintf(buf, sizeof buf, "%6s", "-");
    return std::string(buf);
  };
  std::printf("%9s %10s %6s %10s %6s", "Dof", "De", "order", "De_I", "order");
  for (auto m : methods) std::printf(" %10s %6s", method_name(m), "order");
  std::printf(" %8s\n", "kappa");
  const auto de = compute_orders(rec.column([](const ConvergenceRow& r) { return r.De; }), dofs);
  const auto dei = compute_orders(rec.column([](const ConvergenceRow& r) { return r.De_I; }), dofs);
  std::vector<std::vector<std::optional<double>>> mo;
  for (auto m : methods) mo.push_back(compute_orders(rec.method_column(m), dofs));
  for (std::size_t l = 0; l < rec.rows.size(); ++l) {
    const auto& r = rec.rows[l];
    std::printf("%9zu %10.3e %s %10.3e %s", r.dof, r.De, order_cell(de[l]).c_str(), r.De_I, order_cell(dei[l]).c_str());
    for (std::size_t k = 0; k < methods.size(); ++k) std::printf(" %10.3e %s", r.methods[k].De, order_cell(mo[k][l]).c_str());
    std::printf(" %8.4f\n", r.kappa);
  }
  if (!max_norm) return;
  std::printf("\nmax norm at vertices\n%9s", "Dof");
  for (auto m : methods) std::printf(" %10s %6s", method_name(m), "order");
  std::printf("\n");
  std::vector<std::vector<std::optional<double>>> mx;
  for (auto m : methods) mx.push_back(compute_orders(rec.method_column(m, true), dofs));
  for (std::size_t l = 0; l < rec.rows.size(); ++l) {
    std::printf("%9zu", rec.rows[l].dof);
    for (std::size_t k = 0; k < methods.size(); ++k) {
      std::printf(" %10.3e %s", rec.rows[l].methods[k].De_max, order_cell(mx[k][l]).c_str());
    }
    std::printf("\n");
  }
}

/// Registers the options shared by converge and adapt. Values given on the
/// command line override the config file.
struct CommonFlags {
  std::string config_file;
  std::map<std::string, std::string> overrides;

  void add(CLI::App* app) {
    app->add_option("--config", config_file, "flat key = value config file")->check(CLI::ExistingFile);
    for (const auto& [flag, key, help] : std::vector<std::array<std::string, 3>>{
             {"--problem", "problem", "torus_xy | highcurv_x1x2 | sphere_singular | dziuk_peak"},
             {"--mesh", "mesh", "auto | torus-chevron | icosphere | import"},
             {"--mesh-path", "mesh_path", "mesh file for mesh = import (.off, .obj)"},
             {"--level-start", "level_start", "first mesh level"},
             {"--levels", "levels", "number of levels"},
             {"--recovery", "methods", "comma-separated: pppr,ppr-exact,ppr-avg,sa,wa"},
             {"--estimator", "estimator", "recovery method behind eta and kappa"},
             {"--theta", "theta", "Dorfler parameter in (0, 1)"},
             {"--max-dof", "max_dof", "stop adapting once Dof exceeds this"},
             {"--out", "out", "output directory"},
             {"--seed", "seed", "seed for randomized inputs"},
             {"--lambda", "lambda", "exponent of the singular sphere solution"}}) {
      app->add_option_function<std::string>(
          flag, [this, key = key](const std::string& v) { overrides[key] = v; }, help);
    }
    app->add_flag_function(
        "--max-norm", [this](std::int64_t) { overrides["max_norm"] = "true"; }, "also report vertex max-norm errors");
    app->add_flag_function(
        "--from-interpolant", [this](std::int64_t) { overrides["from_interpolant"] = "true"; },
        "recover from the interpolant instead of the FE solution");
    app->add_flag_function(
        "--no-true-error", [this](std::int64_t) { overrides["compute_true_error"] = "false"; },
        "skip De and kappa in adaptive runs");
  }

  ExperimentConfig build() const {
    ExperimentConfig c;
    if (!config_file.empty()) c.load_file(config_file);
    for (const auto& [k, v] : overrides) c.set(k, v);
    c.validate();
    return c;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gradient recovery on triangulated surfaces"};
  app.require_subcommand(1);
  unsigned threads = 0;
  app.add_option("--threads", threads, "worker threads (default: PPPR_NUM_THREADS or all cores)");

  CommonFlags converge_flags, adapt_flags;
  auto* converge = app.add_subcommand("converge", "convergence table over mesh levels");
  converge_flags.add(converge);
  auto* adapt = app.add_subcommand("adapt", "adaptive refinement driven by the recovery estimator");
  adapt_flags.add(adapt);

  auto* selftest = app.add_subcommand("selftest", "run the invariant suite");
  std::uint64_t seed = 1;
  selftest->add_option("--seed", seed, "seed for randomized inputs");

  auto* exporter = app.add_subcommand("export", "convert a mesh between OFF, OBJ and VTK");
  std::string mesh_in, mesh_out, format_name = "vtk";
  exporter->add_option("--mesh", mesh_in, "input mesh (.off or .obj)")->required()->check(CLI::ExistingFile);
  exporter->add_option("--format", format_name, "off | obj | vtk");
  exporter->add_option("--out", mesh_out, "output path (default: input with the new extension)");

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) setenv("PPPR_NUM_THREADS", std::to_string(threads).c_str(), 1);

  try {
    if (*converge) {
      const ExperimentConfig config = converge_flags.build();
      const ConvergenceRecord rec = run_convergence(config);
      std::printf("%s\n", rec.problem.c_str());
      print_convergence_table(rec, config.max_norm);
      if (!config.out_dir.empty()) std::printf("\nwrote %s/convergence_%s.csv\n", config.out_dir.c_str(), rec.problem.c_str());
    } else if (*adapt) {
      const ExperimentConfig config = adapt_flags.build();
      const AdaptiveRun run = run_adaptive(config);
      std::printf("%4s %9s %10s %10s %8s %8s\n", "it", "Dof", "eta", "De", "kappa", "marked");
      for (const auto& s : run.history) {
        std::printf("%4d %9zu %10.3e %10.3e %8.4f %8zu\n", s.iteration, s.dof(), s.indicator.global, s.De.value_or(0.0),
                    s.kappa.value_or(0.0), s.marked.size());
      }
      if (!run.csv_path.empty()) std::printf("\nwrote %s and %s\n", run.csv_path.c_str(), run.vtk_path.c_str());
    } else if (*selftest) {
      const SelftestReport report = run_selftest(seed);
      report.print(std::cout);
      return report.all_passed() ? 0 : 1;
    } else if (*exporter) {
      const MeshFormat format = parse_mesh_format(format_name);
      if (mesh_out.empty()) {
        std::filesystem::path p(mesh_in);
        p.replace_extension(format == MeshFormat::Off ? ".off" : format == MeshFormat::Obj ? ".obj" : ".vtk");
        mesh_out = p.string();
      }
      export_mesh(import_mesh(mesh_in), mesh_out, format);
      std::printf("wrote %s\n", mesh_out.c_str());
    }
  } catch (const pppr::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
