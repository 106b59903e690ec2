#pragma once

// Closed set of estimator labels shared by the simulation engine, the
// holdout protocol and the command-line tool.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mta/errors.hpp"
#include "mta/estimators.hpp"
#include "mta/selection.hpp"

namespace mta {

enum class Estimator {
  SingleTask,
  OneTask,
  JamesStein,
  JamesSteinCv,
  ConstantMta,
  ConstantMtaCv,
  MinimaxMta,
  MinimaxMtaCv,
  OracleMta,
  ExpertMta,
};

inline constexpr std::array<std::pair<Estimator, std::string_view>, 10> kEstimatorNames{{
    {Estimator::SingleTask, "single-task"},
    {Estimator::OneTask, "one-task"},
    {Estimator::JamesStein, "js"},
    {Estimator::JamesSteinCv, "js-cv"},
    {Estimator::ConstantMta, "constant-mta"},
    {Estimator::ConstantMtaCv, "constant-mta-cv"},
    {Estimator::MinimaxMta, "minimax-mta"},
    {Estimator::MinimaxMtaCv, "minimax-mta-cv"},
    {Estimator::OracleMta, "oracle-mta"},
    {Estimator::ExpertMta, "expert-mta"},
}};

inline std::string to_string(Estimator e) {
  for (const auto& [kind, name] : kEstimatorNames) {
    if (kind == e) return std::string(name);
  }
  return "?";
}

inline Estimator parse_estimator(std::string_view name) {
  for (const auto& [kind, label] : kEstimatorNames) {
    if (label == name) return kind;
  }
  throw InvalidInput("unknown estimator '" + std::string(name) + "'");
}

/// The cross-validated counterpart of a base estimator, if one exists.
inline std::optional<Estimator> cv_variant(Estimator e) {
  switch (e) {
    case Estimator::JamesStein: return Estimator::JamesSteinCv;
    case Estimator::ConstantMta: return Estimator::ConstantMtaCv;
    case Estimator::MinimaxMta: return Estimator::MinimaxMtaCv;
    case Estimator::JamesSteinCv:
    case Estimator::ConstantMtaCv:
    case Estimator::MinimaxMtaCv: return e;
    default: return std::nullopt;
  }
}

inline std::optional<CvFamily> cv_family(Estimator e) {
  switch (e) {
    case Estimator::JamesSteinCv: return CvFamily::JsConvex;
    case Estimator::ConstantMtaCv: return CvFamily::ConstantMta;
    case Estimator::MinimaxMtaCv: return CvFamily::MinimaxMta;
    default: return std::nullopt;
  }
}

/// Everything an estimator may draw on. Raw samples are needed by the CV
/// variants, true means by the oracle, a similarity matrix by expert MTA.
struct EstimatorInputs {
  const std::vector<TaskSamples>* tasks = nullptr;
  const TaskSummary* summary = nullptr;
  const Vector* true_means = nullptr;
  const SimilarityMatrix* expert = nullptr;
  CvConfig cv;
  double gamma = 1.0;
  VarianceMode variance_mode = VarianceMode::PerTask;
};

inline EstimateVector run_estimator(Estimator e, const EstimatorInputs& in) {
  if (in.summary == nullptr) throw InvalidInput("run_estimator: missing summary");
  const TaskSummary& s = *in.summary;
  EstimateVector out;
  switch (e) {
    case Estimator::SingleTask: out = single_task(s); break;
    case Estimator::OneTask: out = one_task_pooled(s); break;
    case Estimator::JamesStein: out = james_stein(s); break;
    case Estimator::ConstantMta: out = constant_mta(s, in.gamma); break;
    case Estimator::MinimaxMta: out = minimax_mta(s, in.gamma); break;
    case Estimator::OracleMta:
      if (in.true_means == nullptr) throw InvalidInput("oracle-mta needs the true means (simulation only)");
      out = oracle_mta(s, *in.true_means, in.gamma);
      break;
    case Estimator::ExpertMta:
      if (in.expert == nullptr) throw InvalidInput("expert-mta needs a similarity matrix");
      out = mta_general(s, *in.expert, in.gamma);
      break;
    case Estimator::JamesSteinCv:
    case Estimator::ConstantMtaCv:
    case Estimator::MinimaxMtaCv: {
      if (in.tasks == nullptr) throw InvalidInput(to_string(e) + " needs raw samples");
      CvResult r = cv_select(*in.tasks, *cv_family(e), in.cv, in.variance_mode);
      out = std::move(r.estimate);
      out.params["selected"] = r.parameter;
      break;
    }
  }
  out.estimator_id = to_string(e);
  return out;
}

}  // namespace mta
