#pragma once

// Subspace algebra on orthonormal bases: Gram–Schmidt with bookkeeping of
// which input columns contributed, projection, complements within a span,
// intersections by principal angles.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "typ3/matrix.hpp"

namespace typ3 {

/// Column-orthonormal n x r matrix. r == 0 is the trivial subspace {0}.
struct OrthonormalBasis {
  Matrix carrier;
  /// Index of the input column that produced each basis vector.
  std::vector<std::size_t> source_columns;

  std::size_t dim() const noexcept { return carrier.cols(); }
  std::size_t ambient() const noexcept { return carrier.rows(); }

  static OrthonormalBasis empty(std::size_t n) { return {Matrix(n, 0), {}}; }
};

namespace detail {

// Incremental classical Gram–Schmidt with one re-orthogonalization pass.
class GramSchmidtBuilder {
 public:
  GramSchmidtBuilder(std::size_t n, double threshold)
      : basis_{Matrix(n, 0), {}}, threshold_(threshold), work_(n) {}

  /// Returns true when the column contributed a new basis vector.
  bool offer(std::span<const double> v, std::size_t source) {
    std::copy(v.begin(), v.end(), work_.begin());
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < basis_.dim(); ++k) {
        auto q = basis_.carrier.col(k);
        const double c = dot(q, work_);
        for (std::size_t i = 0; i < work_.size(); ++i) work_[i] -= c * q[i];
      }
    }
    const double r = norm2(work_);
    if (!std::isfinite(r)) throw numerical_error("Gram-Schmidt: residual norm overflowed");
    if (!(r > threshold_)) return false;
    for (double& w : work_) w /= r;
    basis_.carrier.append_column(work_);
    basis_.source_columns.push_back(source);
    return true;
  }

  const OrthonormalBasis& basis() const noexcept { return basis_; }
  OrthonormalBasis take() && { return std::move(basis_); }

 private:
  OrthonormalBasis basis_;
  double threshold_;
  std::vector<double> work_;
};

inline double rank_threshold(double largest_norm, const Tolerance& tol) {
  if (!std::isfinite(largest_norm)) throw numerical_error("column norm overflows double range");
  return std::max(tol.rel_rank_tol * largest_norm, tol.abs_floor);
}

inline void require_finite(const Matrix& a, const char* what) {
  if (!a.all_finite()) throw input_error(std::string(what) + ": non-finite entry");
}

}  // namespace detail

/// Orthonormal basis for span(a). A column is accepted when its residual after
/// projecting out the accepted vectors exceeds rel_rank_tol times the largest
/// column norm of a (never below abs_floor).
inline OrthonormalBasis gram_schmidt(const Matrix& a, const Tolerance& tol = {}) {
  tol.validate();
  detail::require_finite(a, "gram_schmidt");
  detail::GramSchmidtBuilder gs(a.rows(),
                                detail::rank_threshold(max_column_norm(a), tol));
  for (std::size_t j = 0; j < a.cols(); ++j) gs.offer(a.col(j), j);
  return std::move(gs).take();
}

inline std::size_t rank(const Matrix& a, const Tolerance& tol = {}) {
  return gram_schmidt(a, tol).dim();
}

/// Q(Qᵀv). The projector itself is never formed.
inline Matrix project(const OrthonormalBasis& basis, const Matrix& v) {
  if (basis.ambient() != v.rows()) throw input_error("project: dimension mismatch");
  if (basis.dim() == 0) return Matrix(v.rows(), v.cols());
  return multiply(basis.carrier, multiply_tn(basis.carrier, v));
}

inline std::vector<double> project(const OrthonormalBasis& basis,
                                   std::span<const double> v) {
  Matrix p = project(basis, Matrix::column(v));
  return {p.col(0).begin(), p.col(0).end()};
}

/// ‖Qᵀy‖², i.e. yᵀPy.
inline double projected_sq_norm(const OrthonormalBasis& basis,
                                std::span<const double> y) {
  if (basis.ambient() != y.size()) throw input_error("projected_sq_norm: length mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < basis.dim(); ++k) {
    const double c = dot(basis.carrier.col(k), y);
    s += c * c;
  }
  return s;
}

/// Basis of span(a)⊥ ∩ span(x): the vectors contributed by columns of x when
/// Gram–Schmidt runs over (a, x). source_columns index into x.
inline OrthonormalBasis complement_within(const Matrix& a, const Matrix& x,
                                          const Tolerance& tol = {}) {
  tol.validate();
  if (a.rows() != x.rows()) throw input_error("complement_within: dimension mismatch");
  detail::require_finite(a, "complement_within");
  detail::require_finite(x, "complement_within");
  const double largest = std::max(max_column_norm(a), max_column_norm(x));
  detail::GramSchmidtBuilder gs(x.rows(), detail::rank_threshold(largest, tol));
  for (std::size_t j = 0; j < a.cols(); ++j) gs.offer(a.col(j), j);
  const std::size_t from_a = gs.basis().dim();
  for (std::size_t j = 0; j < x.cols(); ++j) gs.offer(x.col(j), j);

  const OrthonormalBasis& all = gs.basis();
  OrthonormalBasis out = OrthonormalBasis::empty(x.rows());
  for (std::size_t k = from_a; k < all.dim(); ++k) {
    out.carrier.append_column(all.carrier.col(k));
    out.source_columns.push_back(all.source_columns[k]);
  }
  return out;
}

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Eigenvalues are returned in descending order with matching columns.
struct SymmetricEigen {
  std::vector<double> values;
  Matrix vectors;
};

inline SymmetricEigen symmetric_eigen(Matrix a) {
  const std::size_t n = a.rows();
  if (a.cols() != n) throw input_error("symmetric_eigen: matrix not square");
  Matrix v = Matrix::identity(n);
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i) {
        total += a(i, j) * a(i, j);
        if (i != j) off += a(i, j) * a(i, j);
      }
    if (off <= 1e-32 * total || off == 0.0) break;
    for (std::size_t p = 0; p + 1 < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    std::copy(v.col(order[k]).begin(), v.col(order[k]).end(), out.vectors.col(k).begin());
  }
  return out;
}

/// Cosines of the principal angles between span(a) and span(b), descending.
inline std::vector<double> principal_cosines(const OrthonormalBasis& a,
                                             const OrthonormalBasis& b) {
  if (a.ambient() != b.ambient()) throw input_error("principal_cosines: dimension mismatch");
  if (a.dim() == 0 || b.dim() == 0) return {};
  const Matrix m = multiply_tn(a.carrier, b.carrier);
  const auto eig = symmetric_eigen(multiply(m, transpose(m)));
  std::vector<double> cos;
  for (std::size_t k = 0; k < std::min(a.dim(), b.dim()); ++k)
    cos.push_back(std::sqrt(std::clamp(eig.values[k], 0.0, 1.0)));
  return cos;
}

/// span(a) ∩ span(b): directions Qₐu for left singular vectors u of QₐᵀQ_b whose
/// singular value lies within rel_rank_tol of 1.
inline OrthonormalBasis intersect(const OrthonormalBasis& a, const OrthonormalBasis& b,
                                  const Tolerance& tol = {}) {
  tol.validate();
  if (a.ambient() != b.ambient()) throw input_error("intersect: dimension mismatch");
  OrthonormalBasis out = OrthonormalBasis::empty(a.ambient());
  if (a.dim() == 0 || b.dim() == 0) return out;
  const Matrix m = multiply_tn(a.carrier, b.carrier);
  const auto eig = symmetric_eigen(multiply(m, transpose(m)));
  // σ ≥ 1 − tol  ⇔  σ² ≥ (1 − tol)²
  const double cut = (1.0 - tol.rel_rank_tol) * (1.0 - tol.rel_rank_tol);
  Matrix picked(a.dim(), 0);
  for (std::size_t k = 0; k < a.dim(); ++k)
    if (eig.values[k] >= cut) picked.append_column(eig.vectors.col(k));
  if (picked.cols() == 0) return out;
  // Re-run Gram–Schmidt to scrub the small loss of orthogonality from Jacobi.
  return gram_schmidt(multiply(a.carrier, picked), tol);
}

/// Largest principal angle between two subspaces of equal dimension, computed
/// as asin of the spectral norm of (I − P_b)Qₐ so that tiny angles keep full
/// relative precision. Unequal dimensions give π/2.
inline double max_principal_angle(const OrthonormalBasis& a, const OrthonormalBasis& b) {
  if (a.ambient() != b.ambient()) throw input_error("max_principal_angle: dimension mismatch");
  if (a.dim() != b.dim()) return std::acos(0.0);
  if (a.dim() == 0) return 0.0;
  const Matrix r = a.carrier - project(b, a.carrier);
  const auto eig = symmetric_eigen(multiply_tn(r, r));
  const double s = std::sqrt(std::max(eig.values.front(), 0.0));
  return std::asin(std::min(s, 1.0));
}

/// max|QᵀQ − I|
inline double orthonormality_defect(const OrthonormalBasis& q) {
  const Matrix g = multiply_tn(q.carrier, q.carrier);
  double d = 0.0;
  for (std::size_t j = 0; j < g.cols(); ++j)
    for (std::size_t i = 0; i < g.rows(); ++i)
      d = std::max(d, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return d;
}

}  // namespace typ3
