#pragma once

// Kernel density estimation per task, and multi-task KDE where the per-task
// kernel averages at each query point are replaced by MTA estimates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mta/errors.hpp"
#include "mta/estimators.hpp"

namespace mta {

struct DensityTask {
  std::string task_id;
  std::vector<Vector> points;

  Index dimension() const { return points.empty() ? 0 : points.front().size(); }
};

struct KernelSpec {
  double bandwidth = 1.0;
};

/// How the across-task similarity is formed at each query point.
struct SimilarityMode {
  enum class Kind { Single, Constant, Minimax, Expert };
  Kind kind = Kind::Constant;
  std::optional<SimilarityMatrix> expert;

  static SimilarityMode single() { return {Kind::Single, std::nullopt}; }
  static SimilarityMode constant() { return {Kind::Constant, std::nullopt}; }
  static SimilarityMode minimax() { return {Kind::Minimax, std::nullopt}; }
  static SimilarityMode expert_matrix(SimilarityMatrix a) { return {Kind::Expert, std::move(a)}; }
};

inline SimilarityMode parse_similarity_mode(const std::string& name,
                                            std::optional<SimilarityMatrix> expert = std::nullopt) {
  if (name == "single") return SimilarityMode::single();
  if (name == "constant") return SimilarityMode::constant();
  if (name == "minimax") return SimilarityMode::minimax();
  if (name == "expert") {
    if (!expert) throw InvalidInput("expert mode needs a similarity matrix");
    return SimilarityMode::expert_matrix(std::move(*expert));
  }
  throw InvalidInput("unknown similarity mode '" + name + "'");
}

namespace detail {

inline void check_kernel(const KernelSpec& k) {
  if (!(k.bandwidth > 0.0) || !std::isfinite(k.bandwidth)) {
    throw InvalidInput("kernel bandwidth must be positive and finite");
  }
}

inline void check_task(const DensityTask& task, Index d) {
  if (task.points.empty()) throw InvalidInput("density task '" + task.task_id + "' has no points");
  for (const auto& p : task.points) {
    if (p.size() != d) {
      throw InvalidInput("density task '" + task.task_id + "' has a point of dimension " +
                         std::to_string(p.size()) + ", expected " + std::to_string(d));
    }
    if (!p.allFinite()) throw InvalidInput("density task '" + task.task_id + "' has a non-finite coordinate");
  }
}

}  // namespace detail

/// Un-normalized Gaussian kernel exp(-|x - z|^2 / (2 h^2)); K(x, x) = 1.
inline double gaussian_kernel(const Vector& x, const Vector& z, const KernelSpec& k) {
  return std::exp(-(x - z).squaredNorm() / (2.0 * k.bandwidth * k.bandwidth));
}

inline std::vector<double> kernel_values(const DensityTask& task, const Vector& query,
                                         const KernelSpec& k) {
  std::vector<double> out;
  out.reserve(task.points.size());
  for (const auto& x : task.points) out.push_back(gaussian_kernel(x, query, k));
  return out;
}

inline double kde_at(const DensityTask& task, const Vector& query, const KernelSpec& k) {
  detail::check_kernel(k);
  detail::check_task(task, query.size());
  return sample_mean(kernel_values(task, query, k));
}

/// MTA across tasks of the kernel evaluations at one query, given those
/// evaluations directly (one sample vector per task).
inline Vector mta_over_kernel_values(std::vector<TaskSamples> samples, const SimilarityMode& mode,
                                     double gamma) {
  const TaskSummary s = summarize(samples, VarianceMode::PerTask);
  Vector out;
  switch (mode.kind) {
    case SimilarityMode::Kind::Single: out = s.means; break;
    case SimilarityMode::Kind::Constant: out = constant_mta(s, gamma).values; break;
    case SimilarityMode::Kind::Minimax: out = minimax_mta(s, gamma).values; break;
    case SimilarityMode::Kind::Expert: out = mta_general(s, *mode.expert, gamma).values; break;
  }
  return out.cwiseMax(0.0);
}

/// Density of every task at one query point.
inline Vector mtkde_at(const std::vector<DensityTask>& tasks, const Vector& query,
                       const KernelSpec& k, const SimilarityMode& mode, double gamma) {
  detail::check_kernel(k);
  if (tasks.empty()) throw InvalidInput("mtkde_at: no tasks");
  if (mode.kind == SimilarityMode::Kind::Expert &&
      (!mode.expert || mode.expert->size() != static_cast<Index>(tasks.size()))) {
    throw InvalidInput("mtkde_at: expert similarity must be " + std::to_string(tasks.size()) + "x" +
                       std::to_string(tasks.size()));
  }
  std::vector<TaskSamples> samples(tasks.size());
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    detail::check_task(tasks[t], query.size());
    samples[t].task_id = tasks[t].task_id;
    samples[t].values = kernel_values(tasks[t], query, k);
  }
  return mta_over_kernel_values(std::move(samples), mode, gamma);
}

/// 1-based rank of grid[target] when grid points are sorted by descending
/// density; ties go to the lower grid index.
inline std::size_t density_rank(const std::vector<double>& density, std::size_t target) {
  std::size_t rank = 1;
  for (std::size_t q = 0; q < density.size(); ++q) {
    if (density[q] > density[target] || (density[q] == density[target] && q < target)) ++rank;
  }
  return rank;
}

struct MrrResult {
  double overall = 0.0;
  std::vector<double> per_task;         // mean reciprocal rank of each task's events
  std::vector<std::size_t> events;      // held-out events per task
};

/// Leave-one-out mean reciprocal rank. Each event is removed from its task,
/// all tasks are re-estimated at every grid point, and the event's grid
/// location is ranked by its own task's density.
inline MrrResult loo_mrr(const std::vector<DensityTask>& tasks, const std::vector<Vector>& grid,
                         const KernelSpec& k, const SimilarityMode& mode, double gamma) {
  detail::check_kernel(k);
  if (tasks.empty()) throw InvalidInput("loo_mrr: no tasks");
  if (grid.empty()) throw InvalidInput("loo_mrr: empty grid");
  const Index d = grid.front().size();
  for (const auto& g : grid) {
    if (g.size() != d) throw InvalidInput("loo_mrr: grid points differ in dimension");
  }
  for (const auto& t : tasks) {
    detail::check_task(t, d);
    if (t.points.size() < 2) {
      throw InvalidInput("loo_mrr: task '" + t.task_id + "' needs at least 2 points");
    }
  }
  if (mode.kind == SimilarityMode::Kind::Expert &&
      (!mode.expert || mode.expert->size() != static_cast<Index>(tasks.size()))) {
    throw InvalidInput("loo_mrr: expert similarity does not match the task count");
  }

  // kernels[q][t][i] = K(x_ti, grid_q)
  std::vector<std::vector<std::vector<double>>> kernels(grid.size());
  for (std::size_t q = 0; q < grid.size(); ++q) {
    kernels[q].resize(tasks.size());
    for (std::size_t t = 0; t < tasks.size(); ++t) kernels[q][t] = kernel_values(tasks[t], grid[q], k);
  }

  MrrResult result;
  result.per_task.assign(tasks.size(), 0.0);
  result.events.assign(tasks.size(), 0);
  double total = 0.0;
  std::size_t total_events = 0;
  for (std::size_t t = 0; t < tasks.size(); ++t) {
    for (std::size_t i = 0; i < tasks[t].points.size(); ++i) {
      const Vector& event = tasks[t].points[i];
      std::size_t location = grid.size();
      for (std::size_t q = 0; q < grid.size(); ++q) {
        if (grid[q] == event) {
          location = q;
          break;
        }
      }
      if (location == grid.size()) {
        throw InvalidInput("loo_mrr: event " + std::to_string(i) + " of task '" + tasks[t].task_id +
                           "' is not a grid point");
      }
      std::vector<double> density(grid.size());
      for (std::size_t q = 0; q < grid.size(); ++q) {
        std::vector<TaskSamples> samples(tasks.size());
        for (std::size_t r = 0; r < tasks.size(); ++r) {
          samples[r].task_id = tasks[r].task_id;
          samples[r].values = kernels[q][r];
        }
        samples[t].values.erase(samples[t].values.begin() + static_cast<std::ptrdiff_t>(i));
        density[q] = mta_over_kernel_values(std::move(samples), mode, gamma)(static_cast<Index>(t));
      }
      const double rr = 1.0 / static_cast<double>(density_rank(density, location));
      result.per_task[t] += rr;
      result.events[t] += 1;
      total += rr;
      ++total_events;
    }
    result.per_task[t] /= static_cast<double>(result.events[t]);
  }
  result.overall = total / static_cast<double>(total_events);
  return result;
}

}  // namespace mta
