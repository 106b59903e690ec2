// mta: command-line front end for multi-task averaging.
//
//   mta estimate  --data F --estimator NAME --out F
//   mta simulate  --family gaussian --T 25 --sigma-mu-grid 0.1,1 --replicates R --estimators ... --out DIR
//   mta kde       --tasks DIR --grid F --mode constant --out F [--loo-mrr]
//   mta holdout   --data F --estimators ... --draws D --out F
//
// Exit status: 0 success, 2 malformed input or flags, 1 internal error.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mta/mta.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitInput = 2;
constexpr int kExitInternal = 1;

unsigned worker_threads() {
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MTA_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1) {
      throw mta::InvalidInput("MTA_THREADS must be a positive integer, got '" + std::string(env) + "'");
    }
    threads = static_cast<unsigned>(v);
  }
  return threads;
}

std::vector<mta::Estimator> parse_estimators(const std::vector<std::string>& names, bool add_cv) {
  std::vector<mta::Estimator> out;
  auto push = [&](mta::Estimator e) {
    if (std::find(out.begin(), out.end(), e) == out.end()) out.push_back(e);
  };
  for (const auto& name : names) {
    const mta::Estimator e = mta::parse_estimator(name);
    push(e);
    if (add_cv) {
      if (auto cv = mta::cv_variant(e)) push(*cv);
    }
  }
  return out;
}

json params_json(const std::map<std::string, double>& params) {
  json j = json::object();
  for (const auto& [k, v] : params) {
    if (std::isfinite(v)) {
      j[k] = v;
    } else {
      j[k] = v > 0 ? "inf" : "nan";
    }
  }
  return j;
}

struct EstimateArgs {
  std::string data;
  std::string estimator;
  double gamma = 1.0;
  std::string variance_mode = "per-task";
  std::string similarity;
  bool cv = false;
  std::uint64_t seed = 0;
  int folds = 5;
  std::string out;
};

int cmd_estimate(const EstimateArgs& a) {
  const auto tasks = mta::read_task_data(a.data);
  const mta::VarianceMode mode = mta::parse_variance_mode(a.variance_mode);
  mta::Estimator est = mta::parse_estimator(a.estimator);
  if (a.cv) {
    const auto cv = mta::cv_variant(est);
    if (!cv) throw mta::InvalidInput("--cv is not available for estimator '" + a.estimator + "'");
    est = *cv;
  }
  if (est == mta::Estimator::OracleMta) {
    throw mta::InvalidInput("oracle-mta needs true means and is available in simulation only");
  }
  if (!(a.gamma >= 0.0)) throw mta::InvalidInput("--gamma must be non-negative");

  const mta::TaskSummary summary = mta::summarize(tasks, mode);
  std::optional<mta::SimilarityMatrix> expert;
  if (!a.similarity.empty()) {
    expert = mta::align_similarity(mta::read_similarity(a.similarity), summary.task_ids, a.similarity);
  }

  json meta{{"estimator", mta::to_string(est)},
            {"gamma", a.gamma},
            {"variance_mode", mta::to_string(mode)},
            {"tasks", summary.size()}};
  json fallback = json::array();
  for (std::size_t t = 0; t < summary.task_ids.size(); ++t) {
    if (summary.variance_fallback[t]) fallback.push_back(summary.task_ids[t]);
  }
  meta["variance_fallback_tasks"] = fallback;

  mta::EstimateVector result;
  if (const auto family = mta::cv_family(est)) {
    mta::CvConfig cfg;
    cfg.seed = a.seed;
    cfg.folds = a.folds;
    const mta::CvResult cv = mta::cv_select(tasks, *family, cfg, mode);
    result = cv.estimate;
    meta["cv"] = {{"family", mta::to_string(*family)},
                  {"selected", cv.parameter},
                  {"selected_gamma", cv.gamma},
                  {"grid", cfg.gamma_grid},
                  {"scores", cv.scores},
                  {"folds", cfg.folds},
                  {"seed", cfg.seed}};
  } else {
    mta::EstimatorInputs in;
    in.tasks = &tasks;
    in.summary = &summary;
    in.expert = expert ? &*expert : nullptr;
    in.gamma = a.gamma;
    in.variance_mode = mode;
    result = mta::run_estimator(est, in);
  }
  meta["params"] = params_json(result.params);

  mta::write_text(a.out, mta::estimates_csv(summary, result));
  mta::write_text(a.out + ".json", meta.dump(2) + "\n");
  return 0;
}

struct SimulateArgs {
  std::string family = "gaussian";
  std::size_t tasks = 2;
  std::vector<double> sigma_mu_grid;
  std::size_t replicates = 1000;
  std::vector<std::string> estimators;
  bool cv = false;
  std::uint64_t seed = 0;
  std::string out;
  std::vector<double> fixed_mu;
  std::vector<double> fixed_sigma;
  std::vector<std::size_t> fixed_n;
  std::optional<double> a;
  std::string similarity;
  std::size_t n_min = 2;
  std::size_t n_max = 100;
  double gamma = 1.0;
};

int cmd_simulate(const SimulateArgs& args) {
  mta::WorldConfig cfg;
  cfg.family = mta::parse_family(args.family);
  cfg.tasks = args.tasks;
  cfg.replicates = args.replicates;
  cfg.seed = args.seed;
  cfg.n_min = args.n_min;
  cfg.n_max = args.n_max;

  const bool fixed = !args.fixed_mu.empty() || !args.fixed_sigma.empty() || !args.fixed_n.empty();
  if (fixed) {
    cfg.fixed = mta::FixedDesign{args.fixed_mu, args.fixed_sigma, args.fixed_n};
    if (cfg.fixed->n.size() == 1) cfg.fixed->n.assign(args.fixed_mu.size(), args.fixed_n.front());
    if (cfg.fixed->sigma_sq.size() == 1) cfg.fixed->sigma_sq.assign(args.fixed_mu.size(), args.fixed_sigma.front());
    cfg.tasks = cfg.fixed->mu.size();
  }
  std::vector<double> grid = args.sigma_mu_grid;
  if (grid.empty()) {
    if (!fixed) throw mta::InvalidInput("--sigma-mu-grid is required unless a fixed design is given");
    grid.push_back(0.0);
  }
  if (fixed && grid.size() > 1) throw mta::InvalidInput("a fixed design takes no --sigma-mu-grid");

  mta::StudyOptions opt;
  opt.estimators = parse_estimators(args.estimators, args.cv);
  opt.gamma = args.gamma;
  opt.threads = worker_threads();
  if (args.a && !args.similarity.empty()) throw mta::InvalidInput("--a and --similarity are exclusive");
  if (args.a) {
    if (!(*args.a >= 0.0)) throw mta::InvalidInput("--a must be non-negative");
    mta::Matrix m = mta::Matrix::Constant(static_cast<mta::Index>(cfg.task_count()),
                                          static_cast<mta::Index>(cfg.task_count()), *args.a);
    m.diagonal().setZero();
    opt.expert = mta::SimilarityMatrix(std::move(m));
    if (std::find(opt.estimators.begin(), opt.estimators.end(), mta::Estimator::ExpertMta) ==
        opt.estimators.end()) {
      opt.estimators.push_back(mta::Estimator::ExpertMta);
    }
  } else if (!args.similarity.empty()) {
    const auto labeled = mta::read_similarity(args.similarity);
    if (labeled.matrix.size() != static_cast<mta::Index>(cfg.task_count())) {
      throw mta::InvalidInput("similarity file has " + std::to_string(labeled.matrix.size()) +
                              " tasks, simulation has " + std::to_string(cfg.task_count()));
    }
    opt.expert = labeled.matrix;
  }
  cfg.validate();

  fs::create_directories(args.out);
  const std::string stem = (fixed ? std::string("fixed") : args.family) + "_T" + std::to_string(cfg.task_count());
  std::string csv = mta::report_csv_header();
  json reports = json::array();
  for (double s : grid) {
    mta::WorldConfig point = cfg;
    if (!fixed) point.sigma_mu_sq = s;
    const mta::RiskReport report = mta::run_study(point, opt);
    csv += mta::report_csv_rows(report);
    reports.push_back(mta::report_json(report));
  }
  mta::write_text((fs::path(args.out) / (stem + ".csv")).string(), csv);
  mta::write_text((fs::path(args.out) / (stem + ".json")).string(), reports.dump(2) + "\n");

  json estimators = json::array();
  for (auto e : mta::detail::with_baseline(opt.estimators)) estimators.push_back(mta::to_string(e));
  json manifest{{"family", args.family},
                {"T", cfg.task_count()},
                {"sigma_mu_grid", grid},
                {"replicates", cfg.replicates},
                {"estimators", estimators},
                {"cv", {{"folds", opt.cv.folds}, {"split_fraction", opt.cv.split_fraction}, {"gamma_grid", opt.cv.gamma_grid}}},
                {"gamma", opt.gamma},
                {"variance_mode", mta::to_string(opt.variance_mode)},
                {"n_range", {cfg.n_min, cfg.n_max}},
                {"seed", cfg.seed},
                {"outputs", {stem + ".csv", stem + ".json"}}};
  if (fixed) {
    manifest["fixed"] = {{"mu", cfg.fixed->mu}, {"sigma_sq", cfg.fixed->sigma_sq}, {"n", cfg.fixed->n}};
  }
  if (args.a) manifest["a"] = *args.a;
  if (!args.similarity.empty()) manifest["similarity"] = args.similarity;
  mta::write_text((fs::path(args.out) / "manifest.json").string(), manifest.dump(2) + "\n");
  return 0;
}

struct KdeArgs {
  std::string tasks_dir;
  std::string grid;
  std::string mode = "constant";
  std::string similarity;
  double gamma = 1.0;
  double bandwidth = 1.0;
  bool loo_mrr = false;
  std::string out;
};

std::vector<mta::DensityTask> read_density_tasks(const std::string& dir) {
  if (!fs::is_directory(dir)) throw mta::InvalidInput("--tasks '" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw mta::InvalidInput("no .csv task files in '" + dir + "'");
  std::vector<mta::DensityTask> tasks;
  for (const auto& f : files) tasks.push_back(mta::DensityTask{f.stem().string(), mta::read_points(f.string())});
  return tasks;
}

int cmd_kde(const KdeArgs& a) {
  const auto tasks = read_density_tasks(a.tasks_dir);
  const auto grid = mta::read_points(a.grid);
  const mta::Index d = grid.front().size();
  for (const auto& t : tasks) {
    if (t.dimension() != d) {
      throw mta::InvalidInput("task '" + t.task_id + "' has dimension " + std::to_string(t.dimension()) +
                              " but the grid has " + std::to_string(d));
    }
  }
  std::vector<std::string> ids;
  for (const auto& t : tasks) ids.push_back(t.task_id);
  std::optional<mta::SimilarityMatrix> expert;
  if (!a.similarity.empty()) expert = mta::align_similarity(mta::read_similarity(a.similarity), ids, a.similarity);
  if (a.mode == "expert" && !expert) throw mta::InvalidInput("--mode expert needs --similarity");
  const mta::SimilarityMode mode = mta::parse_similarity_mode(a.mode, expert);
  const mta::KernelSpec kernel{a.bandwidth};
  if (!(a.gamma >= 0.0)) throw mta::InvalidInput("--gamma must be non-negative");

  std::string out;
  if (a.loo_mrr) {
    const mta::MrrResult r = mta::loo_mrr(tasks, grid, kernel, mode, a.gamma);
    out = "task_id,events,mrr\n";
    std::size_t events = 0;
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      out += ids[t] + "," + std::to_string(r.events[t]) + "," + mta::format_number(r.per_task[t]) + "\n";
      events += r.events[t];
    }
    out += "overall," + std::to_string(events) + "," + mta::format_number(r.overall) + "\n";
  } else {
    std::vector<mta::Vector> dens;
    dens.reserve(grid.size());
    for (const auto& q : grid) dens.push_back(mta::mtkde_at(tasks, q, kernel, mode, a.gamma));
    out = "task_id,grid_index,density\n";
    for (std::size_t t = 0; t < tasks.size(); ++t) {
      for (std::size_t q = 0; q < grid.size(); ++q) {
        out += ids[t] + "," + std::to_string(q) + "," +
               mta::format_number(dens[q](static_cast<mta::Index>(t))) + "\n";
      }
    }
  }
  mta::write_text(a.out, out);
  return 0;
}

struct HoldoutArgs {
  std::string data;
  std::vector<std::string> estimators;
  bool cv = false;
  std::size_t draws = 1000;
  std::uint64_t seed = 0;
  std::string similarity;
  std::string variance_mode = "per-task";
  double gamma = 1.0;
  std::string out;
};

int cmd_holdout(const HoldoutArgs& a) {
  const auto tasks = mta::read_task_data(a.data);
  mta::StudyOptions opt;
  opt.estimators = parse_estimators(a.estimators, a.cv);
  opt.variance_mode = mta::parse_variance_mode(a.variance_mode);
  opt.gamma = a.gamma;
  opt.threads = worker_threads();
  if (!a.similarity.empty()) {
    std::vector<std::string> ids;
    for (const auto& t : tasks) ids.push_back(t.task_id);
    opt.expert = mta::align_similarity(mta::read_similarity(a.similarity), ids, a.similarity);
  }
  const mta::RiskReport r = mta::holdout_eval(tasks, opt, a.draws, a.seed);
  std::string csv = "estimator,risk,pct_change,stderr,replicates\n";
  for (const auto& row : r.rows) {
    csv += row.estimator + "," + mta::format_number(row.risk) + "," + mta::format_number(row.pct_change) + "," +
           mta::format_number(row.pct_stderr) + "," + std::to_string(r.replicates) + "\n";
  }
  mta::write_text(a.out, csv);

  std::string paired = "draw";
  for (const auto& row : r.rows) paired += "," + row.estimator;
  paired += "\n";
  for (std::size_t d = 0; d < r.replicates; ++d) {
    paired += std::to_string(d);
    for (const auto& risks : r.per_replicate) paired += "," + mta::format_number(risks[d]);
    paired += "\n";
  }
  mta::write_text(a.out + ".draws.csv", paired);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-task averaging: joint estimation of related means"};
  app.require_subcommand(1);

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Estimate task means from a task_id,value CSV");
  estimate->add_option("--data", est.data, "Task data CSV (task_id,value)")->required();
  estimate->add_option("--estimator", est.estimator, "Estimator name")->required();
  estimate->add_option("--gamma", est.gamma, "Regularization strength")->capture_default_str();
  estimate->add_option("--variance-mode", est.variance_mode, "per-task or pooled")->capture_default_str();
  estimate->add_option("--similarity", est.similarity, "Labeled similarity matrix CSV");
  estimate->add_flag("--cv", est.cv, "Cross-validate gamma (or lambda)");
  estimate->add_option("--seed", est.seed, "Seed for cross-validation")->capture_default_str();
  estimate->add_option("--folds", est.folds, "Cross-validation rounds")->capture_default_str();
  estimate->add_option("--out", est.out, "Output CSV")->required();

  SimulateArgs sim;
  std::optional<double> sim_a;
  auto* simulate = app.add_subcommand("simulate", "Monte-Carlo risk study");
  simulate->add_option("--family", sim.family, "gaussian or uniform")->capture_default_str();
  simulate->add_option("--T", sim.tasks, "Number of tasks")->capture_default_str();
  simulate->add_option("--sigma-mu-grid", sim.sigma_mu_grid, "Comma-separated sigma_mu^2 values")->delimiter(',');
  simulate->add_option("--replicates", sim.replicates, "Replicates per grid value")->capture_default_str();
  simulate->add_option("--estimators", sim.estimators, "Comma-separated estimator names")
      ->delimiter(',')
      ->required();
  simulate->add_flag("--cv", sim.cv, "Also run the cross-validated variants");
  simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--fixed-mu", sim.fixed_mu, "Fixed task means")->delimiter(',');
  simulate->add_option("--fixed-sigma", sim.fixed_sigma, "Fixed task variances")->delimiter(',');
  simulate->add_option("--fixed-n", sim.fixed_n, "Fixed sample counts")->delimiter(',');
  simulate->add_option("--a", sim_a, "Constant off-diagonal similarity for expert-mta");
  simulate->add_option("--similarity", sim.similarity, "Similarity matrix CSV for expert-mta");
  simulate->add_option("--n-min", sim.n_min, "Smallest sample count")->capture_default_str();
  simulate->add_option("--n-max", sim.n_max, "Largest sample count")->capture_default_str();
  simulate->add_option("--gamma", sim.gamma, "Gamma for non-CV MTA estimators")->capture_default_str();

  KdeArgs kde;
  auto* kde_cmd = app.add_subcommand("kde", "Single-task and multi-task kernel density estimation");
  kde_cmd->add_option("--tasks", kde.tasks_dir, "Directory of per-task point CSVs")->required();
  kde_cmd->add_option("--grid", kde.grid, "Grid point CSV")->required();
  kde_cmd->add_option("--mode", kde.mode, "single, constant, minimax or expert")->capture_default_str();
  kde_cmd->add_option("--similarity", kde.similarity, "Labeled similarity CSV (expert mode)");
  kde_cmd->add_option("--gamma", kde.gamma, "Regularization strength")->capture_default_str();
  kde_cmd->add_option("--bandwidth", kde.bandwidth, "Gaussian kernel bandwidth")->capture_default_str();
  kde_cmd->add_flag("--loo-mrr", kde.loo_mrr, "Report leave-one-out mean reciprocal rank");
  kde_cmd->add_option("--out", kde.out, "Output CSV")->required();

  HoldoutArgs hold;
  auto* holdout = app.add_subcommand("holdout", "Half-sample holdout comparison on real task data");
  holdout->add_option("--data", hold.data, "Task data CSV (task_id,value)")->required();
  holdout->add_option("--estimators", hold.estimators, "Comma-separated estimator names")
      ->delimiter(',')
      ->required();
  holdout->add_flag("--cv", hold.cv, "Also run the cross-validated variants");
  holdout->add_option("--draws", hold.draws, "Random half-sample draws")->capture_default_str();
  holdout->add_option("--seed", hold.seed, "Random seed")->capture_default_str();
  holdout->add_option("--similarity", hold.similarity, "Labeled similarity CSV (expert-mta)");
  holdout->add_option("--variance-mode", hold.variance_mode, "per-task or pooled")->capture_default_str();
  holdout->add_option("--gamma", hold.gamma, "Gamma for non-CV MTA estimators")->capture_default_str();
  holdout->add_option("--out", hold.out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  try {
    if (*estimate) return cmd_estimate(est);
    if (*simulate) {
      sim.a = sim_a;
      return cmd_simulate(sim);
    }
    if (*kde_cmd) return cmd_kde(kde);
    if (*holdout) return cmd_holdout(hold);
  } catch (const mta::InternalError& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  } catch (const mta::InvalidInput& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInput;
}
