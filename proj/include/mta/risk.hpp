#pragma once

// Analytic risk of linear estimators W Ybar, the two-task MSE analysis, and
// the optimal constant-similarity scales.

#include <cmath>
#include <limits>
#include <string>

#include "mta/errors.hpp"
#include "mta/graph.hpp"

namespace mta {

struct RiskBreakdown {
  double total = 0.0;
  double variance_term = 0.0;  // tr(W Sigma W^T)
  double bias_term = 0.0;      // mu^T (I - W)^T (I - W) mu
};

/// Returned where the optimal similarity is unbounded (coincident means).
inline constexpr double kInfiniteSimilarity = std::numeric_limits<double>::infinity();

inline bool is_infinite_similarity(double a) { return std::isinf(a) && a > 0.0; }

/// Risk of Y = W Ybar under Ybar ~ (mu, Sigma).
inline RiskBreakdown analytic_risk(const Matrix& w, const MeanCovariance& sigma, const Vector& mu) {
  const Index n = mu.size();
  if (w.rows() != n || w.cols() != n || sigma.size() != n) {
    throw InvalidInput("analytic_risk: W, Sigma and mu must share dimension " + std::to_string(n));
  }
  RiskBreakdown r;
  // tr(W Sigma W^T) = sum_ij W_ij^2 Sigma_jj
  r.variance_term = (w.array().square().rowwise() * sigma.diagonal().transpose().array()).sum();
  const Vector residual = mu - w * mu;
  r.bias_term = residual.squaredNorm();
  r.total = r.variance_term + r.bias_term;
  return r;
}

inline RiskBreakdown analytic_risk(const WeightMatrix& w, const MeanCovariance& sigma,
                                   const Vector& mu) {
  return analytic_risk(w.entries, sigma, mu);
}

/// Coefficients (w11, w12) of Y1* for T = 2, gamma = 1, A = [0 a; a 0];
/// s1, s2 are the variances of the two sample means.
struct TwoTaskWeights {
  double own;
  double other;
};

inline TwoTaskWeights two_task_weights(double a, double s1, double s2) {
  const double denom = 2.0 + s1 * a + s2 * a;
  return {(2.0 + s2 * a) / denom, (s1 * a) / denom};
}

/// MSE of Y1* for T = 2, gamma = 1, similarity a and mean gap delta.
inline double two_task_mse(double a, double s1, double s2, double delta) {
  if (!(a >= 0.0) || !(s1 > 0.0) || !(s2 > 0.0)) {
    throw InvalidInput("two_task_mse: need a >= 0 and positive variances");
  }
  constexpr double t = 2.0;
  const double denom = t + s1 * a + s2 * a;
  const double d2 = denom * denom;
  const double variance = s1 * (t * t + 2.0 * t * s2 * a + s1 * s2 * a * a + s2 * s2 * a * a) / d2;
  const double bias = delta * delta * s1 * s1 * a * a / d2;
  return variance + bias;
}

/// Squared mean gap below which Y1* beats the single-task mean on task 1:
/// 4/a + s1 + s2. a = 0 yields kInfiniteSimilarity.
inline double two_task_threshold(double a, double s1, double s2) {
  if (!(a >= 0.0)) throw InvalidInput("two_task_threshold: a must be non-negative");
  if (a == 0.0) return kInfiniteSimilarity;
  return 4.0 / a + s1 + s2;
}

/// a* = 2 / delta^2.
inline double optimal_a_two_task(double delta) {
  if (delta == 0.0) return kInfiniteSimilarity;
  return 2.0 / (delta * delta);
}

/// a* = 2 / [(1/(T(T-1))) sum_rs (mu_r - mu_s)^2].
inline double optimal_a_constant(const Vector& mu) {
  const Index n = mu.size();
  if (n < 2) throw InvalidInput("optimal_a_constant: need at least two tasks");
  const double m = mu.mean();
  const double spread = 2.0 * (mu.array() - m).square().sum() / static_cast<double>(n - 1);
  if (spread == 0.0) return kInfiniteSimilarity;
  return 2.0 / spread;
}

}  // namespace mta
