#pragma once

// Mean estimators over per-task sufficient statistics: single-task, pooled,
// James-Stein, and the multi-task averaging (MTA) family.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mta/errors.hpp"
#include "mta/graph.hpp"

namespace mta {

inline constexpr double kVarianceFloor = 1e-12;
inline constexpr double kOracleSimilarityCap = 1e12;

struct TaskSamples {
  std::string task_id;
  std::vector<double> values;
};

enum class VarianceMode { PerTask, Pooled };

inline std::string to_string(VarianceMode mode) {
  return mode == VarianceMode::PerTask ? "per-task" : "pooled";
}

inline VarianceMode parse_variance_mode(const std::string& name) {
  if (name == "per-task") return VarianceMode::PerTask;
  if (name == "pooled") return VarianceMode::Pooled;
  throw InvalidInput("unknown variance mode '" + name + "' (expected per-task or pooled)");
}

/// Sample means, variances and counts for T tasks.
struct TaskSummary {
  Vector means;
  Vector variances;
  std::vector<std::size_t> counts;
  VarianceMode variance_mode = VarianceMode::PerTask;
  std::vector<std::string> task_ids;
  // Tasks whose own variance was unusable and got the pooled/floor value.
  std::vector<bool> variance_fallback;

  Index size() const noexcept { return means.size(); }

  Vector count_vector() const {
    Vector n(static_cast<Index>(counts.size()));
    for (std::size_t t = 0; t < counts.size(); ++t) n(static_cast<Index>(t)) = double(counts[t]);
    return n;
  }

  MeanCovariance mean_covariance() const {
    return MeanCovariance::from_variances(variances, count_vector());
  }

  /// Builds a summary from already-computed moments, validating them.
  static TaskSummary from_moments(Vector means, Vector variances, std::vector<std::size_t> counts,
                                  VarianceMode mode = VarianceMode::PerTask) {
    const Index n = means.size();
    if (n == 0) throw InvalidInput("summary needs at least one task");
    if (variances.size() != n || static_cast<Index>(counts.size()) != n) {
      throw InvalidInput("means, variances and counts differ in length");
    }
    for (Index t = 0; t < n; ++t) {
      if (!std::isfinite(means(t))) throw InvalidInput("non-finite mean for task " + std::to_string(t));
      if (!std::isfinite(variances(t)) || variances(t) <= 0.0) {
        throw InvalidInput("variance for task " + std::to_string(t) + " must be finite and positive");
      }
      if (counts[t] == 0) throw InvalidInput("count for task " + std::to_string(t) + " must be >= 1");
    }
    if (mode == VarianceMode::Pooled && (variances.array() != variances(0)).any()) {
      throw InvalidInput("pooled summary must have equal variances");
    }
    TaskSummary s;
    s.means = std::move(means);
    s.variances = std::move(variances);
    s.counts = std::move(counts);
    s.variance_mode = mode;
    s.task_ids.resize(static_cast<std::size_t>(n));
    for (Index t = 0; t < n; ++t) s.task_ids[static_cast<std::size_t>(t)] = std::to_string(t);
    s.variance_fallback.assign(static_cast<std::size_t>(n), false);
    return s;
  }
};

struct EstimateVector {
  Vector values;
  std::string estimator_id;
  std::map<std::string, double> params;
};

inline double sample_mean(std::span<const double> values) {
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

/// Sufficient statistics for each task. Variances below the floor (and
/// single-sample tasks) fall back to the pooled variance, then to the floor.
inline TaskSummary summarize(const std::vector<TaskSamples>& tasks,
                             VarianceMode mode = VarianceMode::PerTask) {
  if (tasks.empty()) throw InvalidInput("summarize: no tasks");
  const auto n = static_cast<Index>(tasks.size());
  TaskSummary s;
  s.means.resize(n);
  s.variances.resize(n);
  s.counts.resize(tasks.size());
  s.task_ids.resize(tasks.size());
  s.variance_fallback.assign(tasks.size(), false);
  s.variance_mode = mode;

  double pooled_ss = 0.0;
  double pooled_df = 0.0;
  std::vector<double> own(tasks.size(), 0.0);
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    const auto& values = tasks[t].values;
    if (values.empty()) throw InvalidInput("summarize: task '" + tasks[t].task_id + "' has no samples");
    for (double v : values) {
      if (!std::isfinite(v)) {
        throw InvalidInput("summarize: task '" + tasks[t].task_id + "' has a non-finite sample");
      }
    }
    const double mean = sample_mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    s.means(static_cast<Index>(t)) = mean;
    s.counts[t] = values.size();
    s.task_ids[t] = tasks[t].task_id;
    pooled_ss += ss;
    pooled_df += static_cast<double>(values.size() - 1);
    own[t] = values.size() >= 2 ? ss / static_cast<double>(values.size() - 1) : 0.0;
  }

  double pooled = pooled_df > 0.0 ? pooled_ss / pooled_df : 0.0;
  if (!(pooled >= kVarianceFloor)) pooled = kVarianceFloor;

  for (std::size_t t = 0; t < tasks.size(); ++t) {
    double v = mode == VarianceMode::Pooled ? pooled : own[t];
    if (mode == VarianceMode::PerTask && !(v >= kVarianceFloor)) {
      v = pooled;
      s.variance_fallback[t] = true;
    }
    s.variances(static_cast<Index>(t)) = v;
  }
  return s;
}

inline double grand_mean(const Vector& means) { return means.mean(); }

inline EstimateVector single_task(const TaskSummary& s) {
  return EstimateVector{s.means, "single-task", {}};
}

/// Count-weighted mean of all samples, repeated for every task.
inline EstimateVector one_task_pooled(const TaskSummary& s) {
  double total = 0.0;
  double count = 0.0;
  for (Index t = 0; t < s.size(); ++t) {
    const double n = double(s.counts[static_cast<std::size_t>(t)]);
    total += n * s.means(t);
    count += n;
  }
  return EstimateVector{Vector::Constant(s.size(), total / count), "one-task", {}};
}

inline EstimateVector one_task_pooled(const std::vector<TaskSamples>& tasks) {
  if (tasks.empty()) throw InvalidInput("one_task_pooled: no tasks");
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& task : tasks) {
    if (task.values.empty()) throw InvalidInput("one_task_pooled: task '" + task.task_id + "' is empty");
    for (double v : task.values) total += v;
    count += task.values.size();
  }
  const auto n = static_cast<Index>(tasks.size());
  return EstimateVector{Vector::Constant(n, total / double(count)), "one-task", {}};
}

/// Y* = W Ybar for a user-supplied similarity (symmetrized).
inline EstimateVector mta_general(const TaskSummary& s, const SimilarityMatrix& a, double gamma) {
  if (a.size() != s.size()) {
    throw InvalidInput("mta_general: similarity is " + std::to_string(a.size()) + "x" +
                       std::to_string(a.size()) + " but there are " + std::to_string(s.size()) +
                       " tasks");
  }
  EstimateVector out{s.means, "mta", {{"gamma", gamma}}};
  if (gamma == 0.0) return out;
  out.values = mta_solve_dense(s.mean_covariance(), build_laplacian(a), gamma, s.means);
  return out;
}

namespace detail {

// Mean squared difference over ordered pairs r != s: (1/(T(T-1))) sum_rs (y_r - y_s)^2.
// Equals twice the unbiased variance of the values.
inline double mean_pairwise_sq_diff(const Vector& y) {
  const Index n = y.size();
  const double m = y.mean();
  return 2.0 * (y.array() - m).square().sum() / static_cast<double>(n - 1);
}

inline EstimateVector grand_mean_limit(const TaskSummary& s, std::string id,
                                       std::map<std::string, double> params) {
  return EstimateVector{Vector::Constant(s.size(), grand_mean(s.means)), std::move(id),
                        std::move(params)};
}

}  // namespace detail

/// Constant MTA: similarity a* 11^T with a* estimated from the sample means.
inline EstimateVector constant_mta(const TaskSummary& s, double gamma) {
  detail::check_gamma(gamma);
  const Index n = s.size();
  EstimateVector out{s.means, "constant-mta", {{"gamma", gamma}}};
  if (n == 1 || gamma == 0.0) return out;
  const double spread = detail::mean_pairwise_sq_diff(s.means);
  if (spread < 1e-12 * std::max(1.0, s.means.squaredNorm())) {
    out.params["a"] = std::numeric_limits<double>::infinity();
    return detail::grand_mean_limit(s, out.estimator_id, out.params);
  }
  const double a_hat = 2.0 / spread;
  out.params["a"] = a_hat;
  out.values = mta_apply_fast(s.mean_covariance(), gamma * a_hat / double(n), s.means);
  return out;
}

/// Minimax MTA: scale 2 gamma / (T (max - min)^2) on L(11^T).
inline EstimateVector minimax_mta(const TaskSummary& s, double gamma) {
  detail::check_gamma(gamma);
  const Index n = s.size();
  EstimateVector out{s.means, "minimax-mta", {{"gamma", gamma}}};
  if (n == 1 || gamma == 0.0) return out;
  const double range = s.means.maxCoeff() - s.means.minCoeff();
  if (range == 0.0) return detail::grand_mean_limit(s, out.estimator_id, out.params);
  const double c = 2.0 * gamma / (double(n) * range * range);
  if (!std::isfinite(c)) return detail::grand_mean_limit(s, out.estimator_id, out.params);
  out.params["c"] = c;
  out.values = mta_apply_fast(s.mean_covariance(), c, s.means);
  return out;
}

/// Pairwise oracle similarity 2 / (mu_r - mu_s)^2, capped for coincident means.
inline SimilarityMatrix oracle_similarity(const Vector& true_means) {
  const Index n = true_means.size();
  Matrix a = Matrix::Zero(n, n);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < n; ++c) {
      if (r == c) continue;
      const double d = true_means(r) - true_means(c);
      const double v = 2.0 / (d * d);
      a(r, c) = std::isfinite(v) ? std::min(v, kOracleSimilarityCap) : kOracleSimilarityCap;
    }
  }
  return SimilarityMatrix(std::move(a));
}

inline EstimateVector oracle_mta(const TaskSummary& s, const Vector& true_means, double gamma) {
  if (true_means.size() != s.size()) {
    throw InvalidInput("oracle_mta: " + std::to_string(true_means.size()) + " true means for " +
                       std::to_string(s.size()) + " tasks");
  }
  EstimateVector out = mta_general(s, oracle_similarity(true_means), gamma);
  out.estimator_id = "oracle-mta";
  return out;
}

/// Bock's positive-part James-Stein with T as the effective dimension,
/// shrinking toward the average of the means.
inline EstimateVector james_stein(const TaskSummary& s) {
  const Index n = s.size();
  EstimateVector out{s.means, "js", {}};
  if (n <= 3) return out;
  const double xi = grand_mean(s.means);
  const Vector dev = s.means.array() - xi;
  const Vector sigma = s.mean_covariance().diagonal();
  const double q = (dev.array().square() / sigma.array()).sum();
  out.params["xi"] = xi;
  if (q == 0.0) {
    out.values = Vector::Constant(n, xi);
    out.params["factor"] = 0.0;
    return out;
  }
  const double factor = std::max(0.0, 1.0 - (double(n) - 3.0) / q);
  out.params["factor"] = factor;
  out.values = (xi + factor * dev.array()).matrix();
  return out;
}

inline void check_lambda(double lambda) {
  if (!(lambda > 0.0 && lambda <= 1.0)) {
    throw InvalidInput("lambda must lie in (0, 1], got " + std::to_string(lambda));
  }
}

/// lambda * ybar_t + (1 - lambda) * average of means.
inline EstimateVector js_convex(const TaskSummary& s, double lambda) {
  check_lambda(lambda);
  const double target = grand_mean(s.means);
  Vector v = (target + lambda * (s.means.array() - target)).matrix();
  return EstimateVector{std::move(v), "js-convex", {{"lambda", lambda}}};
}

/// Both evaluations of (1/gamma) ybar_t + sum_r alpha_r ybar_r.
struct MtaFormPaths {
  Vector matrix_form;    // (I + gamma L(1 alpha^T))^-1 ybar
  Vector explicit_form;  // (1/gamma) ybar + (alpha^T ybar) 1
};

inline MtaFormPaths mta_form_paths(double gamma, const Vector& alpha, const Vector& ybar) {
  if (!(std::isfinite(gamma) && gamma >= 1.0)) {
    throw InvalidInput("mta_form_from_alpha: 1/gamma must lie in (0, 1], got gamma = " +
                       std::to_string(gamma));
  }
  if (alpha.size() != ybar.size()) {
    throw InvalidInput("mta_form_from_alpha: alpha and ybar differ in length");
  }
  for (Index r = 0; r < alpha.size(); ++r) {
    if (!std::isfinite(alpha(r)) || alpha(r) < 0.0) {
      throw InvalidInput("mta_form_from_alpha: alpha_" + std::to_string(r) +
                         " must be finite and non-negative");
    }
  }
  const double target = 1.0 - 1.0 / gamma;
  if (std::abs(alpha.sum() - target) > 1e-10 * std::max(1.0, target)) {
    throw InvalidInput("mta_form_from_alpha: sum(alpha) = " + std::to_string(alpha.sum()) +
                       " must equal 1 - 1/gamma = " + std::to_string(target));
  }
  const Index n = ybar.size();
  // A = 1 alpha^T is asymmetric and is used as given.
  Matrix a = Vector::Ones(n) * alpha.transpose();
  const LaplacianMatrix l = LaplacianMatrix::of(SimilarityMatrix(std::move(a)));
  MtaFormPaths paths;
  paths.matrix_form = mta_form_solve(Vector::Constant(n, gamma), l, ybar);
  paths.explicit_form = (ybar.array() / gamma + alpha.dot(ybar)).matrix();
  return paths;
}

namespace detail {

inline double max_abs_diff(const Vector& a, const Vector& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline double value_scale(const Vector& y) {
  return std::max(1.0, y.cwiseAbs().maxCoeff());
}

inline void check_paths_agree(const MtaFormPaths& p, const Vector& ybar, double tol,
                              const char* what) {
  if (ybar.size() == 0) return;
  const double diff = max_abs_diff(p.matrix_form, p.explicit_form);
  if (!(diff <= tol * value_scale(ybar))) {
    throw InternalError(std::string(what) + ": matrix and explicit forms differ by " +
                        std::to_string(diff));
  }
}

}  // namespace detail

/// Matrix-form result of the convex regularizer; checks it against the
/// explicit form.
inline Vector mta_form_from_alpha(double gamma, const Vector& alpha, const Vector& ybar) {
  MtaFormPaths p = mta_form_paths(gamma, alpha, ybar);
  detail::check_paths_agree(p, ybar, 1e-10, "mta_form_from_alpha");
  return std::move(p.matrix_form);
}

/// lambda ybar_t + (1 - lambda) * count-weighted pooled mean, via
/// W = (I + (1-lambda)/(lambda N^T 1) L(1 N^T))^-1.
inline EstimateVector pooled_mean_mta_form(const TaskSummary& s, double lambda) {
  check_lambda(lambda);
  const Vector counts = s.count_vector();
  const Vector alpha = (1.0 - lambda) * counts / counts.sum();
  const MtaFormPaths p = mta_form_paths(1.0 / lambda, alpha, s.means);
  detail::check_paths_agree(p, s.means, 1e-12, "pooled_mean_mta_form");
  return EstimateVector{p.explicit_form, "pooled-mean-mta-form", {{"lambda", lambda}}};
}

/// lambda ybar_t + (1 - lambda) * average of means, via
/// W = (I + (1-lambda)/(lambda T) L(11^T))^-1.
inline EstimateVector average_of_means_mta_form(const TaskSummary& s, double lambda) {
  check_lambda(lambda);
  const Index n = s.size();
  const Vector alpha = Vector::Constant(n, (1.0 - lambda) / double(n));
  const MtaFormPaths p = mta_form_paths(1.0 / lambda, alpha, s.means);
  detail::check_paths_agree(p, s.means, 1e-12, "average_of_means_mta_form");
  return EstimateVector{p.explicit_form, "average-of-means-mta-form", {{"lambda", lambda}}};
}

}  // namespace mta
