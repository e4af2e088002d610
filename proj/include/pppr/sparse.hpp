#ifndef PPPR_SPARSE_HPP
#define PPPR_SPARSE_HPP

// Row-compressed symmetric matrices and Jacobi-preconditioned conjugate
// gradients, including the variant deflated against constants for the pure
// Laplace-Beltrami operator.

#include "pppr/core.hpp"

#include <cmath>
#include <vector>

namespace pppr {

using Vector = Eigen::VectorXd;

struct Triplet {
  int row;
  int col;
  double value;
};

class CsrMatrix {
 public:
  CsrMatrix() = default;

  /// Sums duplicate entries.
  static CsrMatrix from_triplets(int n, std::vector<Triplet> triplets) {
    std::sort(triplets.begin(), triplets.end(),
              [](const Triplet& a, const Triplet& b) { return a.row != b.row ? a.row < b.row : a.col < b.col; });
    CsrMatrix m;
    m.n_ = n;
    m.row_offsets_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (std::size_t k = 0; k < triplets.size();) {
      const auto& t = triplets[k];
      if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n) {
        throw Error(ErrorKind::Precondition, "triplet index out of range");
      }
      double sum = 0.0;
      std::size_t j = k;
      for (; j < triplets.size() && triplets[j].row == t.row && triplets[j].col == t.col; ++j) sum += triplets[j].value;
      m.columns_.push_back(t.col);
      m.values_.push_back(sum);
      ++m.row_offsets_[static_cast<std::size_t>(t.row) + 1];
      k = j;
    }
    for (int i = 0; i < n; ++i) m.row_offsets_[static_cast<std::size_t>(i) + 1] += m.row_offsets_[static_cast<std::size_t>(i)];
    return m;
  }

  static CsrMatrix identity(int n) {
    std::vector<Triplet> t;
    for (int i = 0; i < n; ++i) t.push_back({i, i, 1.0});
    return from_triplets(n, std::move(t));
  }

  int dimension() const { return n_; }
  std::size_t nonzeros() const { return values_.size(); }
  const std::vector<int>& row_offsets() const { return row_offsets_; }
  const std::vector<int>& columns() const { return columns_; }
  const std::vector<double>& values() const { return values_; }

  double at(int i, int j) const {
    const auto begin = columns_.begin() + row_offsets_[static_cast<std::size_t>(i)];
    const auto end = columns_.begin() + row_offsets_[static_cast<std::size_t>(i) + 1];
    const auto it = std::lower_bound(begin, end, j);
    return it != end && *it == j ? values_[static_cast<std::size_t>(it - columns_.begin())] : 0.0;
  }

  Vector multiply(const Vector& x) const {
    Vector y(n_);
    for (int i = 0; i < n_; ++i) {
      double s = 0.0;
      for (int k = row_offsets_[static_cast<std::size_t>(i)]; k < row_offsets_[static_cast<std::size_t>(i) + 1]; ++k) {
        s += values_[static_cast<std::size_t>(k)] * x[columns_[static_cast<std::size_t>(k)]];
      }
      y[i] = s;
    }
    return y;
  }

  Vector diagonal() const {
    Vector d(n_);
    for (int i = 0; i < n_; ++i) d[i] = at(i, i);
    return d;
  }

  /// Largest |A_ij - A_ji| relative to the largest |A_ij|.
  double symmetry_defect() const {
    double worst = 0.0, scale = 0.0;
    for (int i = 0; i < n_; ++i) {
      for (int k = row_offsets_[static_cast<std::size_t>(i)]; k < row_offsets_[static_cast<std::size_t>(i) + 1]; ++k) {
        const int j = columns_[static_cast<std::size_t>(k)];
        const double v = values_[static_cast<std::size_t>(k)];
        scale = std::max(scale, std::abs(v));
        worst = std::max(worst, std::abs(v - at(j, i)));
      }
    }
    return scale > 0 ? worst / scale : 0.0;
  }

  /// alpha * this + beta * other.
  CsrMatrix combine(double alpha, const CsrMatrix& other, double beta) const {
    if (other.n_ != n_) throw Error(ErrorKind::Precondition, "matrix dimensions differ");
    std::vector<Triplet> t;
    t.reserve(nonzeros() + other.nonzeros());
    for (const CsrMatrix* m : {this, &other}) {
      const double w = m == this ? alpha : beta;
      for (int i = 0; i < n_; ++i) {
        for (int k = m->row_offsets_[static_cast<std::size_t>(i)]; k < m->row_offsets_[static_cast<std::size_t>(i) + 1]; ++k) {
          t.push_back({i, m->columns_[static_cast<std::size_t>(k)], w * m->values_[static_cast<std::size_t>(k)]});
        }
      }
    }
    return from_triplets(n_, std::move(t));
  }

 private:
  int n_ = 0;
  std::vector<int> row_offsets_{0};
  std::vector<int> columns_;
  std::vector<double> values_;
};

struct SolverOptions {
  double relative_tolerance = 1e-10;
  /// 0 selects 10 * dimension.
  int max_iterations = 0;
};

struct SolveResult {
  Vector x;
  int iterations = 0;
  double relative_residual = 0.0;
};

namespace detail {

/// Jacobi-preconditioned CG. `project` is applied to every residual,
/// preconditioned residual and iterate; identity for plain SPD systems.
template <class Projection>
SolveResult preconditioned_cg(const CsrMatrix& a, Vector b, const SolverOptions& options, Projection project) {
  const int n = a.dimension();
  if (b.size() != n) throw Error(ErrorKind::Precondition, "right-hand side has the wrong length");
  project(b);
  SolveResult result;
  result.x = Vector::Zero(n);
  const double b_norm = b.norm();
  if (b_norm == 0.0) return result;

  Vector inv_diag = a.diagonal();
  for (int i = 0; i < n; ++i) {
    if (!(inv_diag[i] > 0)) throw Error(ErrorKind::Precondition, "non-positive diagonal entry", i);
    inv_diag[i] = 1.0 / inv_diag[i];
  }
  const int max_iterations = options.max_iterations > 0 ? options.max_iterations : 10 * n;

  Vector r = b;
  Vector z = inv_diag.cwiseProduct(r);
  project(z);
  Vector p = z;
  double rz = r.dot(z);
  for (int it = 1; it <= max_iterations; ++it) {
    const Vector ap = a.multiply(p);
    const double alpha = rz / p.dot(ap);
    result.x += alpha * p;
    r -= alpha * ap;
    project(r);
    project(result.x);
    result.iterations = it;
    result.relative_residual = r.norm() / b_norm;
    if (result.relative_residual <= options.relative_tolerance) return result;
    z = inv_diag.cwiseProduct(r);
    project(z);
    const double rz_next = r.dot(z);
    p = z + (rz_next / rz) * p;
    rz = rz_next;
  }
  throw Error(ErrorKind::NonConvergence,
              "CG stopped after " + std::to_string(max_iterations) + " iterations with relative residual " +
                  std::to_string(result.relative_residual));
}

}  // namespace detail

/// Solves A x = b for symmetric positive definite A.
inline SolveResult solve_spd(const CsrMatrix& a, const Vector& b, const SolverOptions& options = {}) {
  return detail::preconditioned_cg(a, b, options, [](Vector&) {});
}

/// Solves K u = b for a symmetric positive semidefinite K whose kernel is
/// the constants. b is projected orthogonal to the ones vector first and
/// the result is shifted to zero mass-weighted mean.
inline SolveResult solve_mean_zero(const CsrMatrix& k, const Vector& b, const CsrMatrix& mass,
                                   const SolverOptions& options = {}) {
  auto remove_mean = [](Vector& v) { v.array() -= v.mean(); };
  SolveResult result = detail::preconditioned_cg(k, b, options, remove_mean);
  const Vector ones = Vector::Ones(k.dimension());
  const Vector m_ones = mass.multiply(ones);
  result.x.array() -= m_ones.dot(result.x) / m_ones.sum();
  return result;
}

}  // namespace pppr

#endif  // PPPR_SPARSE_HPP
