#pragma once

// Randomized subsample cross-validation for the regularization strength of
// constant MTA, minimax MTA and the convex James-Stein family.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "mta/errors.hpp"
#include "mta/estimators.hpp"
#include "mta/rng.hpp"

namespace mta {

enum class CvFamily { ConstantMta, MinimaxMta, JsConvex };

inline std::string to_string(CvFamily f) {
  switch (f) {
    case CvFamily::ConstantMta: return "constant-mta";
    case CvFamily::MinimaxMta: return "minimax-mta";
    case CvFamily::JsConvex: return "js-convex";
  }
  return "?";
}

inline std::vector<double> default_gamma_grid() {
  std::vector<double> grid;
  for (int e = -5; e <= 5; ++e) grid.push_back(std::ldexp(1.0, e));
  return grid;
}

struct CvConfig {
  int folds = 5;
  double split_fraction = 0.5;
  std::vector<double> gamma_grid = default_gamma_grid();
  std::uint64_t seed = 0;

  void validate() const {
    if (folds < 1) throw InvalidInput("cv: folds must be positive");
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
      throw InvalidInput("cv: split fraction must lie in (0, 1)");
    }
    if (gamma_grid.empty()) throw InvalidInput("cv: empty gamma grid");
    for (std::size_t i = 0; i < gamma_grid.size(); ++i) {
      if (!(gamma_grid[i] > 0.0) || !std::isfinite(gamma_grid[i])) {
        throw InvalidInput("cv: grid values must be positive and finite");
      }
      if (i > 0 && !(gamma_grid[i] > gamma_grid[i - 1])) {
        throw InvalidInput("cv: grid must be strictly increasing");
      }
    }
  }
};

struct CvResult {
  double gamma = 0.0;       // selected grid value
  double parameter = 0.0;   // gamma, or lambda = gamma/(gamma+1) for js-convex
  std::vector<double> scores;  // mean held-out squared error per grid value
  EstimateVector estimate;
};

inline double lambda_from_gamma(double gamma) { return gamma / (gamma + 1.0); }

inline EstimateVector fit_family(CvFamily family, const TaskSummary& s, double gamma) {
  switch (family) {
    case CvFamily::ConstantMta: return constant_mta(s, gamma);
    case CvFamily::MinimaxMta: return minimax_mta(s, gamma);
    case CvFamily::JsConvex: return js_convex(s, lambda_from_gamma(gamma));
  }
  throw InvalidInput("unknown estimator family");
}

/// Each round draws an independent subsample of floor(N_t * split) values per
/// task, fits every grid value on it, and scores squared error against the
/// full-sample means. The lowest average score wins; ties go to the smaller
/// parameter. The winner is refit on all data.
inline CvResult cv_select(const std::vector<TaskSamples>& tasks, CvFamily family,
                          const CvConfig& cfg, VarianceMode mode = VarianceMode::PerTask) {
  cfg.validate();
  if (tasks.empty()) throw InvalidInput("cv_select: no tasks");
  const TaskSummary full = summarize(tasks, mode);
  const std::size_t grid_size = cfg.gamma_grid.size();
  std::vector<double> totals(grid_size, 0.0);

  for (int round = 0; round < cfg.folds; ++round) {
    std::vector<TaskSamples> train(tasks.size());
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      auto rng = make_stream(cfg.seed, {static_cast<std::uint64_t>(round), t});
      train[t].task_id = tasks[t].task_id;
      train[t].values = subsample(tasks[t].values, half_size(tasks[t].values.size(), cfg.split_fraction), rng);
    }
    const TaskSummary fold = summarize(train, mode);
    for (std::size_t g = 0; g < grid_size; ++g) {
      const Vector est = fit_family(family, fold, cfg.gamma_grid[g]).values;
      totals[g] += (est - full.means).squaredNorm() / double(full.size());
    }
  }

  CvResult result;
  result.scores.resize(grid_size);
  std::size_t best = 0;
  for (std::size_t g = 0; g < grid_size; ++g) {
    result.scores[g] = totals[g] / double(cfg.folds);
    if (result.scores[g] < result.scores[best]) best = g;
  }
  result.gamma = cfg.gamma_grid[best];
  result.parameter = family == CvFamily::JsConvex ? lambda_from_gamma(result.gamma) : result.gamma;
  result.estimate = fit_family(family, full, result.gamma);
  result.estimate.estimator_id += "-cv";
  result.estimate.params["cv_score"] = result.scores[best];
  return result;
}

}  // namespace mta
