#pragma once

// Graph Laplacians over task-similarity matrices and the MTA weight-matrix
// solvers: a dense elimination for arbitrary similarities and an O(T) path
// for constant similarity.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "mta/errors.hpp"

namespace mta {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Square matrix of finite, non-negative task-relatedness weights. The
/// diagonal is carried but never affects a Laplacian.
class SimilarityMatrix {
 public:
  explicit SimilarityMatrix(Matrix entries) : entries_(std::move(entries)) {
    if (entries_.rows() != entries_.cols()) {
      throw InvalidInput("similarity matrix must be square, got " +
                         std::to_string(entries_.rows()) + "x" +
                         std::to_string(entries_.cols()));
    }
    for (Index r = 0; r < entries_.rows(); ++r) {
      for (Index c = 0; c < entries_.cols(); ++c) {
        const double v = entries_(r, c);
        if (!std::isfinite(v) || v < 0.0) throw InvalidSimilarity(r, c, v);
      }
    }
  }

  /// a * 11^T.
  static SimilarityMatrix constant(Index size, double a) {
    return SimilarityMatrix(Matrix::Constant(size, size, a));
  }

  Index size() const noexcept { return entries_.rows(); }
  const Matrix& entries() const noexcept { return entries_; }
  double operator()(Index r, Index c) const { return entries_(r, c); }

  /// (A + A^T) / 2.
  SimilarityMatrix symmetrized() const {
    Matrix sym = 0.5 * (entries_ + entries_.transpose());
    return SimilarityMatrix(std::move(sym));
  }

  bool is_symmetric() const { return entries_ == entries_.transpose(); }

 private:
  Matrix entries_;
};

/// L = D - A with D_tt = sum_s A_ts. Rows sum to zero, off-diagonals <= 0.
class LaplacianMatrix {
 public:
  Index size() const noexcept { return entries_.rows(); }
  const Matrix& entries() const noexcept { return entries_; }
  double operator()(Index r, Index c) const { return entries_(r, c); }

  /// Laplacian of A exactly as given, with no symmetrization.
  static LaplacianMatrix of(const SimilarityMatrix& a) {
    const Index n = a.size();
    Matrix l = -a.entries();
    for (Index t = 0; t < n; ++t) {
      double degree = 0.0;
      for (Index s = 0; s < n; ++s) {
        if (s != t) degree += a(t, s);
      }
      l(t, t) = degree;
    }
    return LaplacianMatrix(std::move(l));
  }

 private:
  explicit LaplacianMatrix(Matrix entries) : entries_(std::move(entries)) {}
  Matrix entries_;
};

/// Diagonal of the covariance of the sample-mean vector, sigma_t^2 / N_t.
class MeanCovariance {
 public:
  explicit MeanCovariance(Vector diagonal) : diagonal_(std::move(diagonal)) {
    for (Index t = 0; t < diagonal_.size(); ++t) {
      const double v = diagonal_(t);
      if (!std::isfinite(v) || v <= 0.0) {
        throw InvalidInput("mean covariance entry " + std::to_string(t) + " = " +
                           std::to_string(v) + " must be finite and positive");
      }
    }
  }

  static MeanCovariance from_variances(const Vector& variances, const Vector& counts) {
    if (variances.size() != counts.size()) {
      throw InvalidInput("variances and counts differ in length");
    }
    return MeanCovariance(variances.cwiseQuotient(counts));
  }

  Index size() const noexcept { return diagonal_.size(); }
  const Vector& diagonal() const noexcept { return diagonal_; }
  double operator()(Index t) const { return diagonal_(t); }
  double trace() const { return diagonal_.sum(); }

 private:
  Vector diagonal_;
};

/// Right-stochastic MTA solution matrix (I + (gamma/T) Sigma L)^-1.
struct WeightMatrix {
  Matrix entries;
  double gamma = 0.0;

  Index size() const noexcept { return entries.rows(); }
  Vector apply(const Vector& ybar) const { return entries * ybar; }
};

inline constexpr double kNegativeWeightDust = 1e-12;
inline constexpr double kRowSumTolerance = 1e-10;

/// Laplacian of sym(A). Asymmetric similarities are equivalent to their
/// symmetric part in the MTA objective.
inline LaplacianMatrix build_laplacian(const SimilarityMatrix& a) {
  return LaplacianMatrix::of(a.symmetrized());
}

/// (1/2) sum_ij A_ij (f_i - f_j)^2.
inline double graph_energy(const Vector& f, const SimilarityMatrix& a) {
  if (f.size() != a.size()) {
    throw InvalidInput("graph_energy: f has length " + std::to_string(f.size()) +
                       " but A is " + std::to_string(a.size()) + "x" +
                       std::to_string(a.size()));
  }
  double energy = 0.0;
  for (Index i = 0; i < f.size(); ++i) {
    for (Index j = 0; j < f.size(); ++j) {
      const double d = f(i) - f(j);
      energy += a(i, j) * d * d;
    }
  }
  return 0.5 * energy;
}

/// LU factorization of M = I + diag(C 1) - C for a non-negative coupling
/// matrix C (diagonal ignored). M has unit row sums and non-positive
/// off-diagonals. Pivots are rebuilt from the tracked row sums, so the
/// elimination never subtracts like-signed quantities and the factors are
/// entrywise accurate even when C spans many orders of magnitude. No
/// pivoting is needed: every pivot is at least 1.
class UnitRowSumSystem {
 public:
  explicit UnitRowSumSystem(const RowMatrix& coupling) : lu_(-coupling) {
    const Index n = lu_.rows();
    Vector row_sum = Vector::Ones(n);
    for (Index k = 0; k < n; ++k) {
      double pivot = row_sum(k);
      for (Index j = k + 1; j < n; ++j) pivot -= lu_(k, j);
      lu_(k, k) = pivot;
      for (Index i = k + 1; i < n; ++i) {
        const double l = lu_(i, k) / pivot;
        lu_(i, k) = l;
        if (l == 0.0) continue;
        double* row_i = &lu_(i, 0);
        const double* row_k = &lu_(k, 0);
        for (Index j = k + 1; j < n; ++j) row_i[j] -= l * row_k[j];
        row_sum(i) -= l * row_sum(k);
      }
    }
  }

  Index size() const noexcept { return lu_.rows(); }

  Vector solve(const Vector& rhs) const {
    const Index n = size();
    Vector x = rhs;
    for (Index i = 1; i < n; ++i) {
      double acc = x(i);
      for (Index k = 0; k < i; ++k) acc -= lu_(i, k) * x(k);
      x(i) = acc;
    }
    for (Index i = n - 1; i >= 0; --i) {
      double acc = x(i);
      for (Index j = i + 1; j < n; ++j) acc -= lu_(i, j) * x(j);
      x(i) = acc / lu_(i, i);
    }
    return x;
  }

  Matrix inverse() const {
    const Index n = size();
    Matrix inv(n, n);
    for (Index c = 0; c < n; ++c) inv.col(c) = solve(Vector::Unit(n, c));
    return inv;
  }

 private:
  RowMatrix lu_;
};

namespace detail {

// Coupling matrix for I + Gamma L: C_ts = Gamma_t * (-L_ts), t != s.
inline RowMatrix coupling(const Vector& gamma_diag, const LaplacianMatrix& l) {
  const Index n = l.size();
  RowMatrix c(n, n);
  for (Index t = 0; t < n; ++t) {
    for (Index s = 0; s < n; ++s) {
      c(t, s) = (s == t) ? 0.0 : gamma_diag(t) * -l(t, s);
    }
  }
  return c;
}

inline void check_square(const MeanCovariance& sigma, const LaplacianMatrix& l) {
  if (sigma.size() != l.size()) {
    throw InvalidInput("covariance has " + std::to_string(sigma.size()) +
                       " tasks but Laplacian has " + std::to_string(l.size()));
  }
}

inline void check_gamma(double gamma) {
  if (!std::isfinite(gamma) || gamma < 0.0) {
    throw InvalidInput("gamma must be finite and non-negative, got " + std::to_string(gamma));
  }
}

// Clamps floating-point dust and enforces right-stochasticity.
inline void enforce_stochastic(Matrix& w) {
  for (Index r = 0; r < w.rows(); ++r) {
    double sum = 0.0;
    for (Index c = 0; c < w.cols(); ++c) {
      double& v = w(r, c);
      if (!std::isfinite(v)) {
        throw InternalError("non-finite MTA weight at (" + std::to_string(r) + "," +
                            std::to_string(c) + ")");
      }
      if (v < 0.0) {
        if (v < -kNegativeWeightDust) {
          throw InternalError("negative MTA weight " + std::to_string(v) + " at (" +
                              std::to_string(r) + "," + std::to_string(c) + ")");
        }
        v = 0.0;
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > kRowSumTolerance) {
      throw InternalError("MTA weight row " + std::to_string(r) + " sums to " +
                          std::to_string(sum));
    }
  }
}

}  // namespace detail

/// (I + Gamma L)^-1 for diagonal Gamma >= 0, with L possibly asymmetric.
inline Matrix mta_form_weights(const Vector& gamma_diag, const LaplacianMatrix& l) {
  if (gamma_diag.size() != l.size()) throw InvalidInput("Gamma and L differ in size");
  Matrix w = UnitRowSumSystem(detail::coupling(gamma_diag, l)).inverse();
  detail::enforce_stochastic(w);
  return w;
}

/// (I + Gamma L)^-1 rhs without forming the inverse.
inline Vector mta_form_solve(const Vector& gamma_diag, const LaplacianMatrix& l,
                             const Vector& rhs) {
  if (gamma_diag.size() != l.size() || rhs.size() != l.size()) {
    throw InvalidInput("Gamma, L and rhs differ in size");
  }
  Vector x = UnitRowSumSystem(detail::coupling(gamma_diag, l)).solve(rhs);
  if (!x.allFinite()) throw InternalError("non-finite MTA solve result");
  return x;
}

/// W = (I + (gamma/T) Sigma L)^-1 by a dense solve against the identity.
inline WeightMatrix mta_weights_dense(const MeanCovariance& sigma, const LaplacianMatrix& l,
                                      double gamma) {
  detail::check_square(sigma, l);
  detail::check_gamma(gamma);
  const Index n = l.size();
  if (gamma == 0.0) return WeightMatrix{Matrix::Identity(n, n), gamma};
  const Vector scale = (gamma / static_cast<double>(n)) * sigma.diagonal();
  return WeightMatrix{mta_form_weights(scale, l), gamma};
}

/// (I + (gamma/T) Sigma L)^-1 ybar by one dense factorization.
inline Vector mta_solve_dense(const MeanCovariance& sigma, const LaplacianMatrix& l,
                              double gamma, const Vector& ybar) {
  detail::check_square(sigma, l);
  detail::check_gamma(gamma);
  const Index n = l.size();
  if (ybar.size() != n) throw InvalidInput("ybar length does not match T");
  if (gamma == 0.0) return ybar;
  const Vector scale = (gamma / static_cast<double>(n)) * sigma.diagonal();
  return mta_form_solve(scale, l, ybar);
}

/// (I + c Sigma L(11^T))^-1 ybar in O(T) time and memory.
///
/// With Z = I + cT Sigma and x = c Sigma 1 the system matrix is Z - x 1^T, so
/// Sherman-Morrison gives Z^-1 ybar + Z^-1 x (1^T Z^-1 ybar) / (1 - 1^T Z^-1 x).
/// The denominator equals (1/T) sum_t 1/z_t and is evaluated in that form.
inline Vector mta_apply_fast(const MeanCovariance& sigma, double c, const Vector& ybar) {
  const Index n = sigma.size();
  if (ybar.size() != n) throw InvalidInput("ybar length does not match T");
  if (!std::isfinite(c) || c < 0.0) {
    throw InvalidInput("scale c must be finite and non-negative, got " + std::to_string(c));
  }
  if (c == 0.0 || n == 0) return ybar;

  const double cn = c * static_cast<double>(n);
  double weighted = 0.0;   // 1^T Z^-1 ybar
  double inv_z_sum = 0.0;  // sum_t 1/z_t
  for (Index t = 0; t < n; ++t) {
    const double z = 1.0 + cn * sigma(t);
    weighted += ybar(t) / z;
    inv_z_sum += 1.0 / z;
  }
  const double pooled = weighted / (inv_z_sum / static_cast<double>(n));

  Vector out(n);
  for (Index t = 0; t < n; ++t) {
    const double z = 1.0 + cn * sigma(t);
    out(t) = ybar(t) / z + (c * sigma(t) / z) * pooled;
  }
  if (!out.allFinite()) throw InternalError("non-finite value in constant-similarity MTA");
  return out;
}

}  // namespace mta
