#pragma once

// Hierarchical world generators, the replicate engine comparing estimators
// on common random numbers, and the half-sample holdout protocol for real
// per-task data.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "mta/errors.hpp"
#include "mta/estimators.hpp"
#include "mta/registry.hpp"
#include "mta/rng.hpp"
#include "mta/selection.hpp"

namespace mta {

enum class Family { Gaussian, Uniform };

inline std::string to_string(Family f) { return f == Family::Gaussian ? "gaussian" : "uniform"; }

inline Family parse_family(const std::string& name) {
  if (name == "gaussian") return Family::Gaussian;
  if (name == "uniform") return Family::Uniform;
  throw InvalidInput("unknown family '" + name + "' (expected gaussian or uniform)");
}

/// Per-task means, variances and sample counts held fixed across replicates.
struct FixedDesign {
  std::vector<double> mu;
  std::vector<double> sigma_sq;
  std::vector<std::size_t> n;
};

struct WorldConfig {
  std::size_t tasks = 2;
  double sigma_mu_sq = 1.0;
  Family family = Family::Gaussian;
  std::size_t n_min = 2;
  std::size_t n_max = 100;
  std::size_t replicates = 1000;
  std::uint64_t seed = 0;
  std::optional<FixedDesign> fixed;

  std::size_t task_count() const { return fixed ? fixed->mu.size() : tasks; }

  void validate() const {
    if (replicates == 0) throw InvalidInput("replicates must be positive");
    if (fixed) {
      const std::size_t t = fixed->mu.size();
      if (t == 0 || fixed->sigma_sq.size() != t || fixed->n.size() != t) {
        throw InvalidInput("fixed design needs equal-length, non-empty mu, sigma and n lists");
      }
      for (std::size_t i = 0; i < t; ++i) {
        if (!std::isfinite(fixed->mu[i])) throw InvalidInput("fixed mu must be finite");
        if (!(fixed->sigma_sq[i] > 0.0) || !std::isfinite(fixed->sigma_sq[i])) {
          throw InvalidInput("fixed sigma^2 must be positive");
        }
        if (fixed->n[i] < 1) throw InvalidInput("fixed n must be >= 1");
      }
      return;
    }
    if (tasks == 0) throw InvalidInput("T must be positive");
    if (!(sigma_mu_sq > 0.0) || !std::isfinite(sigma_mu_sq)) {
      throw InvalidInput("sigma_mu^2 must be positive and finite");
    }
    if (n_min < 1 || n_max < n_min) throw InvalidInput("sample-count range must satisfy 1 <= min <= max");
  }
};

struct WorldTask {
  double mu = 0.0;
  double sigma_sq = 1.0;
  std::vector<double> samples;
};

using World = std::vector<WorldTask>;

namespace detail {

template <class Rng>
void draw_samples(WorldTask& task, std::size_t n, Family family, Rng& rng) {
  task.samples.resize(n);
  if (family == Family::Gaussian) {
    std::normal_distribution<double> y(task.mu, std::sqrt(task.sigma_sq));
    for (auto& v : task.samples) v = y(rng);
  } else {
    const double half = std::sqrt(3.0 * task.sigma_sq);
    std::uniform_real_distribution<double> y(task.mu - half, task.mu + half);
    for (auto& v : task.samples) v = y(rng);
  }
}

}  // namespace detail

/// One replicate world. Task t of replicate r always comes from stream
/// (seed, r, t), so the result is independent of evaluation order.
///
/// Gaussian: mu ~ N(0, s_mu^2), sigma^2 ~ Gamma(0.9, 1) + 0.1, y ~ N(mu, sigma^2).
/// Uniform:  mu ~ U[+-sqrt(3 s_mu^2)], sigma^2 ~ U(0.1, 2), y ~ U[mu +- sqrt(3 sigma^2)].
/// N ~ integer uniform on [n_min, n_max] in both.
inline World draw_world(const WorldConfig& cfg, std::size_t replicate) {
  cfg.validate();
  const std::size_t count = cfg.task_count();
  World world(count);
  for (std::size_t t = 0; t < count; ++t) {
    auto rng = make_stream(cfg.seed, {replicate, t});
    WorldTask& task = world[t];
    std::size_t n = 0;
    if (cfg.fixed) {
      task.mu = cfg.fixed->mu[t];
      task.sigma_sq = cfg.fixed->sigma_sq[t];
      n = cfg.fixed->n[t];
    } else if (cfg.family == Family::Gaussian) {
      task.mu = std::normal_distribution<double>(0.0, std::sqrt(cfg.sigma_mu_sq))(rng);
      task.sigma_sq = std::gamma_distribution<double>(0.9, 1.0)(rng) + 0.1;
      n = std::uniform_int_distribution<std::size_t>(cfg.n_min, cfg.n_max)(rng);
    } else {
      const double half = std::sqrt(3.0 * cfg.sigma_mu_sq);
      task.mu = std::uniform_real_distribution<double>(-half, half)(rng);
      task.sigma_sq = std::uniform_real_distribution<double>(0.1, 2.0)(rng);
      n = std::uniform_int_distribution<std::size_t>(cfg.n_min, cfg.n_max)(rng);
    }
    detail::draw_samples(task, n, cfg.family, rng);
  }
  return world;
}

/// Runs body(i) for i in [0, count) on up to `threads` workers. Callers write
/// results into per-index slots, so output does not depend on scheduling.
template <class Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count || failed.load()) return;
      try {
        body(i);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned n = static_cast<unsigned>(std::min<std::size_t>(threads, count));
  pool.reserve(n);
  for (unsigned k = 0; k < n; ++k) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

struct EstimatorRisk {
  std::string estimator;
  double risk = 0.0;          // mean over replicates of sum_t (Y_t - mu_t)^2 / T
  double risk_stderr = 0.0;   // Monte-Carlo standard error of `risk`
  double pct_change = 0.0;    // 100 (risk - risk_single) / risk_single
  double pct_stderr = 0.0;    // paired standard error of `pct_change`
};

struct RiskReport {
  double sigma_mu_sq = 0.0;
  std::size_t replicates = 0;
  std::vector<EstimatorRisk> rows;
  // per_replicate[e][i]: risk of rows[e] on replicate (or draw) i.
  std::vector<std::vector<double>> per_replicate;

  const EstimatorRisk& row(const std::string& label) const {
    for (const auto& r : rows) {
      if (r.estimator == label) return r;
    }
    throw InvalidInput("no estimator '" + label + "' in report");
  }
};

namespace detail {

// Neumaier-compensated sum in index order.
inline double stable_sum(const std::vector<double>& v) {
  double sum = 0.0;
  double comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    comp += std::abs(sum) >= std::abs(x) ? (sum - t) + x : (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

inline double stable_mean(const std::vector<double>& v) { return stable_sum(v) / double(v.size()); }

// Rows from per-replicate risks; index 0 must be single-task.
inline std::vector<EstimatorRisk> paired_rows(const std::vector<std::string>& labels,
                                              const std::vector<std::vector<double>>& risks) {
  const std::size_t reps = risks.front().size();
  const double base = stable_mean(risks.front());
  std::vector<EstimatorRisk> rows;
  for (std::size_t e = 0; e < labels.size(); ++e) {
    EstimatorRisk row;
    row.estimator = labels[e];
    row.risk = stable_mean(risks[e]);
    std::vector<double> dev(reps);
    std::vector<double> ratio_dev(reps);
    const double ratio = base > 0.0 ? row.risk / base : 0.0;
    for (std::size_t i = 0; i < reps; ++i) {
      dev[i] = (risks[e][i] - row.risk) * (risks[e][i] - row.risk);
      const double z = risks[e][i] - ratio * risks.front()[i];
      ratio_dev[i] = z * z;
    }
    const double denom = reps > 1 ? double(reps - 1) : 1.0;
    row.risk_stderr = std::sqrt(stable_sum(dev) / denom / double(reps));
    if (e == 0) {
      row.pct_change = 0.0;
      row.pct_stderr = 0.0;
    } else if (base > 0.0) {
      row.pct_change = 100.0 * (row.risk - base) / base;
      row.pct_stderr = 100.0 * std::sqrt(stable_sum(ratio_dev) / denom / double(reps)) / base;
    } else {
      row.pct_change = std::numeric_limits<double>::quiet_NaN();
      row.pct_stderr = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// single-task first, then the requested estimators in order, without repeats.
inline std::vector<Estimator> with_baseline(const std::vector<Estimator>& requested) {
  std::vector<Estimator> out{Estimator::SingleTask};
  for (Estimator e : requested) {
    bool seen = false;
    for (Estimator o : out) seen = seen || (o == e);
    if (!seen) out.push_back(e);
  }
  return out;
}

}  // namespace detail

struct StudyOptions {
  std::vector<Estimator> estimators;
  CvConfig cv;
  std::optional<SimilarityMatrix> expert;
  double gamma = 1.0;
  VarianceMode variance_mode = VarianceMode::PerTask;
  unsigned threads = 1;
};

/// Paired comparison of estimators over `cfg.replicates` worlds. single-task
/// is always the first row and the percent-change baseline.
inline RiskReport run_study(const WorldConfig& cfg, const StudyOptions& opt) {
  cfg.validate();
  opt.cv.validate();
  const std::vector<Estimator> ests = detail::with_baseline(opt.estimators);
  const std::size_t count = cfg.task_count();
  if (opt.expert && opt.expert->size() != static_cast<Index>(count)) {
    throw InvalidInput("expert similarity size does not match T");
  }
  for (Estimator e : ests) {
    if (e == Estimator::ExpertMta && !opt.expert) {
      throw InvalidInput("expert-mta requested without a similarity matrix");
    }
  }

  std::vector<std::vector<double>> risks(ests.size(), std::vector<double>(cfg.replicates));
  parallel_for(cfg.replicates, opt.threads, [&](std::size_t rep) {
    const World world = draw_world(cfg, rep);
    std::vector<TaskSamples> tasks(count);
    Vector mu(static_cast<Index>(count));
    for (std::size_t t = 0; t < count; ++t) {
      tasks[t].task_id = std::to_string(t);
      tasks[t].values = world[t].samples;
      mu(static_cast<Index>(t)) = world[t].mu;
    }
    const TaskSummary summary = summarize(tasks, opt.variance_mode);
    EstimatorInputs in;
    in.tasks = &tasks;
    in.summary = &summary;
    in.true_means = &mu;
    in.expert = opt.expert ? &*opt.expert : nullptr;
    in.cv = opt.cv;
    in.cv.seed = make_stream(cfg.seed ^ opt.cv.seed, {rep, 0xc5ULL})();
    in.gamma = opt.gamma;
    in.variance_mode = opt.variance_mode;
    for (std::size_t e = 0; e < ests.size(); ++e) {
      const Vector est = run_estimator(ests[e], in).values;
      risks[e][rep] = (est - mu).squaredNorm() / double(count);
    }
  });

  std::vector<std::string> labels;
  for (Estimator e : ests) labels.push_back(to_string(e));
  RiskReport report;
  report.sigma_mu_sq = cfg.fixed ? 0.0 : cfg.sigma_mu_sq;
  report.replicates = cfg.replicates;
  report.rows = detail::paired_rows(labels, risks);
  report.per_replicate = std::move(risks);
  return report;
}

/// Treats full-sample means as ground truth and scores each estimator on
/// random half-samples (floor(N_t/2), at least 1) over `draws` draws.
inline RiskReport holdout_eval(const std::vector<TaskSamples>& tasks, const StudyOptions& opt,
                               std::size_t draws, std::uint64_t seed) {
  if (tasks.empty()) throw InvalidInput("holdout_eval: no tasks");
  if (draws == 0) throw InvalidInput("holdout_eval: draws must be positive");
  for (const auto& t : tasks) {
    if (t.values.size() < 2) {
      throw InvalidInput("holdout_eval: task '" + t.task_id + "' needs at least 2 samples");
    }
  }
  opt.cv.validate();
  const std::vector<Estimator> ests = detail::with_baseline(opt.estimators);
  for (Estimator e : ests) {
    if (e == Estimator::OracleMta) throw InvalidInput("oracle-mta is available in simulation only");
    if (e == Estimator::ExpertMta && !opt.expert) {
      throw InvalidInput("expert-mta requested without a similarity matrix");
    }
  }
  const TaskSummary full = summarize(tasks, opt.variance_mode);
  const Vector& truth = full.means;

  std::vector<std::vector<double>> risks(ests.size(), std::vector<double>(draws));
  parallel_for(draws, opt.threads, [&](std::size_t d) {
    std::vector<TaskSamples> half(tasks.size());
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      auto rng = make_stream(seed, {d, t});
      half[t].task_id = tasks[t].task_id;
      half[t].values = subsample(tasks[t].values, half_size(tasks[t].values.size(), 0.5), rng);
    }
    const TaskSummary summary = summarize(half, opt.variance_mode);
    EstimatorInputs in;
    in.tasks = &half;
    in.summary = &summary;
    in.expert = opt.expert ? &*opt.expert : nullptr;
    in.cv = opt.cv;
    in.cv.seed = make_stream(seed ^ opt.cv.seed, {d, 0xc5ULL})();
    in.gamma = opt.gamma;
    in.variance_mode = opt.variance_mode;
    for (std::size_t e = 0; e < ests.size(); ++e) {
      const Vector est = run_estimator(ests[e], in).values;
      risks[e][d] = (est - truth).squaredNorm() / double(truth.size());
    }
  });

  std::vector<std::string> labels;
  for (Estimator e : ests) labels.push_back(to_string(e));
  RiskReport report;
  report.sigma_mu_sq = std::numeric_limits<double>::quiet_NaN();
  report.replicates = draws;
  report.rows = detail::paired_rows(labels, risks);
  report.per_replicate = std::move(risks);
  return report;
}

}  // namespace mta
