#ifndef PPPR_CORE_HPP
#define PPPR_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace pppr {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

enum class ErrorKind {
  DegenerateGradient,
  NonConvergence,
  Precondition,
  NonManifoldEdge,
  InconsistentOrientation,
  DegenerateTriangle,
  ParameterRange,
  RayMiss,
  ClosureOverflow,
  Parse,
  UnknownFormat,
  DegenerateAverage,
  PatchGrowthFailure,
  RankDeficiency,
  MismatchedGeneration,
  Config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DegenerateGradient: return "degenerate-gradient";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::NonManifoldEdge: return "non-manifold-edge";
    case ErrorKind::InconsistentOrientation: return "inconsistent-orientation";
    case ErrorKind::DegenerateTriangle: return "degenerate-triangle";
    case ErrorKind::ParameterRange: return "parameter-range";
    case ErrorKind::RayMiss: return "ray-miss";
    case ErrorKind::ClosureOverflow: return "closure-overflow";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::UnknownFormat: return "unknown-format";
    case ErrorKind::DegenerateAverage: return "degenerate-average";
    case ErrorKind::PatchGrowthFailure: return "patch-growth-failure";
    case ErrorKind::RankDeficiency: return "rank-deficiency";
    case ErrorKind::MismatchedGeneration: return "mismatched-generation";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

/// Library exception. `index()` carries the offending vertex, triangle,
/// level or iteration when one is known.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what, std::optional<long> index = std::nullopt)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind), index_(index) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::optional<long> index() const noexcept { return index_; }

 private:
  ErrorKind kind_;
  std::optional<long> index_;
};

/// Re-throws `e` with a context prefix, keeping its kind.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context, long index) {
  throw Error(e.kind(), context + " " + std::to_string(index) + ": " + e.what(), index);
}

/// Worker count from PPPR_NUM_THREADS, else the hardware concurrency.
inline unsigned thread_count() {
  if (const char* env = std::getenv("PPPR_NUM_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n > 0) return static_cast<unsigned>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Calls f(i) for i in [0, n) on up to thread_count() threads. Each index
/// is visited exactly once; the first exception thrown is propagated.
template <class F>
void parallel_for(std::size_t n, F&& f) {
  const std::size_t workers = std::min<std::size_t>(thread_count(), std::max<std::size_t>(n / 256, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) f(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace pppr

#endif  // PPPR_CORE_HPP
