#ifndef PPPR_ESTIMATOR_HPP
#define PPPR_ESTIMATOR_HPP

// Recovery-based a posteriori error estimation and the adaptive loop.

#include "pppr/fem.hpp"
#include "pppr/recovery.hpp"
#include "pppr/refine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

namespace pppr {

struct ErrorIndicator {
  std::vector<double> per_triangle;
  double global = 0.0;
  int generation = 0;
};

/// eta_T = ||G u_h - grad u_h||_{0,T}. The integrand is quadratic on each
/// triangle, so the edge-midpoint rule is exact.
inline ErrorIndicator estimate(const SurfaceMesh& mesh, const ScalarField& u_h, const VectorField& recovered) {
  require_matches(mesh, u_h, "FE solution");
  require_matches(mesh, recovered, "recovered gradient");
  ErrorIndicator ind;
  ind.generation = mesh.generation();
  ind.per_triangle.resize(mesh.num_triangles());
  parallel_for(mesh.num_triangles(), [&](std::size_t t) {
    const int ti = static_cast<int>(t);
    const auto& tri = mesh.triangle(ti);
    const Vec3 g = triangle_gradient(mesh, ti, u_h.values);
    std::array<Vec3, 3> d;
    for (int k = 0; k < 3; ++k) d[static_cast<std::size_t>(k)] = recovered[static_cast<std::size_t>(tri[static_cast<std::size_t>(k)])] - g;
    const double s = (0.5 * (d[0] + d[1])).squaredNorm() + (0.5 * (d[1] + d[2])).squaredNorm() +
                     (0.5 * (d[2] + d[0])).squaredNorm();
    ind.per_triangle[t] = std::sqrt(mesh.triangle_area(ti) * s / 3.0);
  });
  double total = 0.0;
  for (double e : ind.per_triangle) total += e * e;
  ind.global = std::sqrt(total);
  return ind;
}

/// Smallest set of largest indicators carrying theta of the squared total;
/// ties go to the lower triangle index.
inline std::vector<int> dorfler_mark(const ErrorIndicator& indicator, double theta) {
  if (!(theta > 0 && theta < 1)) throw Error(ErrorKind::ParameterRange, "Dorfler parameter must lie in (0, 1)");
  const auto& eta = indicator.per_triangle;
  std::vector<int> order(eta.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return eta[static_cast<std::size_t>(a)] > eta[static_cast<std::size_t>(b)];
  });
  double total = 0.0;
  for (double e : eta) total += e * e;
  const double target = theta * total;
  std::vector<int> marked;
  double sum = 0.0;
  for (int t : order) {
    if (sum >= target && !marked.empty()) break;
    if (eta[static_cast<std::size_t>(t)] <= 0.0) break;
    marked.push_back(t);
    sum += eta[static_cast<std::size_t>(t)] * eta[static_cast<std::size_t>(t)];
  }
  return marked;
}

/// kappa = eta_h / De.
inline double effectivity_index(const SurfaceMesh& mesh, const ManufacturedProblem& problem, const ScalarField& u_h,
                                const ErrorIndicator& indicator) {
  if (indicator.generation != mesh.generation()) {
    throw Error(ErrorKind::MismatchedGeneration, "indicator belongs to another mesh generation");
  }
  const ExactGradientSamples exact(mesh, problem);
  const double de = gradient_error(exact, u_h);
  if (!(de > 0)) throw Error(ErrorKind::Precondition, "true error vanishes; effectivity undefined");
  return indicator.global / de;
}

struct AdaptiveOptions {
  double theta = 0.3;
  std::size_t max_dof = 50000;
  RecoveryMethod method = RecoveryMethod::Pppr;
  RecoveryOptions recovery;
  /// De and kappa cost an exact-solution pass per iteration.
  bool compute_true_error = true;
  SolverOptions solver;
};

struct AdaptiveStep {
  int iteration = 0;
  SurfaceMesh mesh;
  ScalarField u_h;
  VectorField recovered;
  ErrorIndicator indicator;
  std::optional<double> De;
  std::optional<double> kappa;
  std::vector<int> marked;
  double wall_time_ms = 0.0;

  std::size_t dof() const { return mesh.num_vertices(); }
};

/// solve -> recover -> estimate -> mark -> bisect, until the mesh has more
/// than max_dof vertices. The step that exceeds max_dof is recorded but not
/// refined.
inline std::vector<AdaptiveStep> adaptive_solve(const ManufacturedProblem& problem, SurfaceMesh mesh,
                                                const AdaptiveOptions& options = {}) {
  if (!(options.theta > 0 && options.theta < 1)) {
    throw Error(ErrorKind::ParameterRange, "Dorfler parameter must lie in (0, 1)");
  }
  std::vector<AdaptiveStep> history;
  for (int it = 0;; ++it) {
    try {
      const auto start = std::chrono::steady_clock::now();
      AdaptiveStep step;
      step.iteration = it;
      step.u_h = fe_solve(mesh, problem, options.solver).u;
      step.recovered = recover(options.method, mesh, step.u_h, &problem.surface, options.recovery);
      step.indicator = estimate(mesh, step.u_h, step.recovered);
      bool last = mesh.num_vertices() > options.max_dof;
      if (!last) step.marked = dorfler_mark(step.indicator, options.theta);
      // Nothing left to refine: eta vanishes everywhere.
      if (step.marked.empty()) last = true;
      step.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      if (options.compute_true_error) {
        const ExactGradientSamples exact(mesh, problem);
        step.De = gradient_error(exact, step.u_h);
        if (*step.De > 0) step.kappa = step.indicator.global / *step.De;
      }
      SurfaceMesh next = last ? SurfaceMesh{} : bisect_marked(mesh, step.marked, &problem.surface);
      step.mesh = std::move(mesh);
      history.push_back(std::move(step));
      if (last) break;
      mesh = std::move(next);
    } catch (const Error& e) {
      rethrow_with_context(e, "adaptive iteration", it);
    }
  }
  return history;
}

}  // namespace pppr

#endif  // PPPR_ESTIMATOR_HPP
