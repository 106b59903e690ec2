#include <algorithm>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "mta/estimators.hpp"
#include "mta/registry.hpp"
#include "oracles.hpp"

namespace mta {

void PrintTo(Estimator e, std::ostream* os) { *os << to_string(e); }

namespace {

TaskSummary unit_summary(std::initializer_list<double> means) {
  const auto n = static_cast<Index>(means.size());
  Vector m(n);
  Index i = 0;
  for (double v : means) m(i++) = v;
  // Variance 1 with one sample gives Sigma = I.
  return TaskSummary::from_moments(m, Vector::Ones(n), std::vector<std::size_t>(means.size(), 1));
}

void expect_vec(const Vector& got, std::initializer_list<double> want, double tol) {
  ASSERT_EQ(got.size(), static_cast<Index>(want.size()));
  Index i = 0;
  for (double w : want) {
    EXPECT_NEAR(got(i), w, tol) << "entry " << i;
    ++i;
  }
}

TEST(Summarize, PerTaskMoments) {
  const auto s = summarize({{"a", {0, 2}}, {"b", {10, 14}}}, VarianceMode::PerTask);
  expect_vec(s.means, {1, 12}, 0.0);
  expect_vec(s.variances, {2, 8}, 1e-15);
  EXPECT_EQ(s.counts, (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(s.task_ids, (std::vector<std::string>{"a", "b"}));
}

TEST(Summarize, PooledMoments) {
  const auto s = summarize({{"a", {0, 2}}, {"b", {10, 14}}}, VarianceMode::Pooled);
  expect_vec(s.variances, {5, 5}, 1e-15);
}

TEST(Summarize, ZeroVarianceFallsBackToFloor) {
  const auto s = summarize({{"a", {1, 1, 1}}});
  EXPECT_EQ(s.means(0), 1.0);
  EXPECT_EQ(s.variances(0), kVarianceFloor);
  EXPECT_TRUE(s.variance_fallback[0]);
}

TEST(Summarize, SingleSampleTaskGetsPooledVariance) {
  const auto s = summarize({{"a", {0, 2}}, {"b", {5}}});
  EXPECT_NEAR(s.variances(1), 2.0, 1e-15);
  EXPECT_TRUE(s.variance_fallback[1]);
  EXPECT_FALSE(s.variance_fallback[0]);
}

TEST(Summarize, Errors) {
  EXPECT_THROW(summarize({}), InvalidInput);
  EXPECT_THROW(summarize({{"a", {}}}), InvalidInput);
}

TEST(SingleTask, Identity) {
  expect_vec(single_task(unit_summary({1, 2, 3})).values, {1, 2, 3}, 0.0);
  expect_vec(single_task(unit_summary({5})).values, {5}, 0.0);
}

TEST(SingleTask, EqualsMtaGeneralAtGammaZero) {
  std::mt19937_64 rng(4);
  const auto s = oracle::random_summary(rng, 6);
  const SimilarityMatrix a(oracle::random_similarity(rng, 6));
  EXPECT_EQ(mta_general(s, a, 0.0).values, single_task(s).values);
}

TEST(OneTaskPooled, Examples) {
  expect_vec(one_task_pooled(std::vector<TaskSamples>{{"a", {0}}, {"b", {2}}}).values, {1, 1}, 1e-15);
  expect_vec(one_task_pooled(std::vector<TaskSamples>{{"a", {0, 0}}, {"b", {3}}}).values, {1, 1}, 1e-15);
  expect_vec(one_task_pooled(std::vector<TaskSamples>{{"a", {2, 4}}}).values, {3}, 1e-15);
  const auto s = summarize({{"a", {0, 0}}, {"b", {3}}});
  expect_vec(one_task_pooled(s).values, {1, 1}, 1e-15);
}

TEST(MtaGeneral, TwoTaskExample) {
  Matrix a(2, 2);
  a << 0, 1, 1, 0;
  expect_vec(mta_general(unit_summary({0, 1}), SimilarityMatrix(a), 1.0).values, {0.25, 0.75}, 1e-15);
}

TEST(MtaGeneral, ConstantSimilarityMatchesFastPath) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    const Index n = 2 + rep;
    const auto s = oracle::random_summary(rng, n);
    const double a = std::uniform_real_distribution<double>(0.01, 5.0)(rng);
    const double gamma = std::uniform_real_distribution<double>(0.1, 10.0)(rng);
    const Vector dense = mta_general(s, SimilarityMatrix::constant(n, a), gamma).values;
    const Vector fast = mta_apply_fast(s.mean_covariance(), gamma * a / double(n), s.means);
    EXPECT_LT(oracle::rel_diff(fast, dense), 1e-10);
  }
}

TEST(MtaGeneral, DimensionMismatch) {
  EXPECT_THROW(mta_general(unit_summary({0, 1}), SimilarityMatrix(Matrix::Zero(3, 3)), 1.0), InvalidInput);
}

TEST(ConstantMta, TwoTaskExample) {
  const auto e = constant_mta(unit_summary({0, 1}), 1.0);
  expect_vec(e.values, {1.0 / 3, 2.0 / 3}, 1e-15);
  EXPECT_NEAR(e.params.at("a"), 2.0, 1e-15);
}

TEST(ConstantMta, SimilarityFromOrderedPairs) {
  const auto e = constant_mta(unit_summary({0, 1, 2}), 1.0);
  EXPECT_NEAR(e.params.at("a"), 1.0, 1e-15);
  Vector y(3);
  y << 0, 1, 2;
  EXPECT_NEAR(2.0 / oracle::mean_sq_pairwise(y), 1.0, 1e-15);
}

TEST(ConstantMta, AllEqualMeansReturnGrandMean) {
  expect_vec(constant_mta(unit_summary({3, 3, 3, 3}), 1.0).values, {3, 3, 3, 3}, 0.0);
}

TEST(ConstantMta, SingleTask) { expect_vec(constant_mta(unit_summary({7}), 1.0).values, {7}, 0.0); }

TEST(ConstantMta, TwoTaskEqualsPairwiseOptimum) {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 50; ++rep) {
    const auto s = oracle::random_summary(rng, 2);
    const double d = s.means(0) - s.means(1);
    const double a = 2.0 / (d * d);
    Matrix am(2, 2);
    am << 0, a, a, 0;
    const Vector general = mta_general(s, SimilarityMatrix(am), 1.0).values;
    EXPECT_LT((constant_mta(s, 1.0).values - general).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, general.cwiseAbs().maxCoeff()));
  }
}

TEST(MinimaxMta, TwoTaskExample) {
  expect_vec(minimax_mta(unit_summary({0, 1}), 1.0).values, {1.0 / 3, 2.0 / 3}, 1e-15);
}

TEST(MinimaxMta, AllEqualMeans) {
  expect_vec(minimax_mta(unit_summary({-2, -2, -2}), 1.0).values, {-2, -2, -2}, 0.0);
}

TEST(MinimaxMta, TwoTaskMatchesGeneralWithRangeSimilarity) {
  std::mt19937_64 rng(32);
  for (int rep = 0; rep < 50; ++rep) {
    const auto s = oracle::random_summary(rng, 2);
    const double range = std::abs(s.means(0) - s.means(1));
    const double a = 2.0 / (range * range);
    Matrix am(2, 2);
    am << 0, a, a, 0;
    const Vector general = mta_general(s, SimilarityMatrix(am), 1.0).values;
    EXPECT_LT((minimax_mta(s, 1.0).values - general).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, general.cwiseAbs().maxCoeff()));
  }
}

TEST(OracleMta, SimilarityIsInverseSquaredGap) {
  Vector mu(2);
  mu << 0, 1;
  const auto a = oracle_similarity(mu);
  EXPECT_EQ(a(0, 1), 2.0);
  EXPECT_EQ(a(1, 0), 2.0);
  const auto s = unit_summary({0.3, 0.9});
  Matrix am(2, 2);
  am << 0, 2, 2, 0;
  EXPECT_LT((oracle_mta(s, mu, 1.0).values - mta_general(s, SimilarityMatrix(am), 1.0).values).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(OracleMta, EqualTrueMeansApproachGrandMean) {
  const auto s = unit_summary({0, 1, 5, 2});
  const Vector est = oracle_mta(s, Vector::Constant(4, 1.5), 1.0).values;
  EXPECT_LT((est.array() - s.means.mean()).abs().maxCoeff(), 1e-5);
}

TEST(OracleMta, ConvexRange) {
  Vector mu(3);
  mu << 0, 1, 3;
  std::mt19937_64 rng(6);
  for (int rep = 0; rep < 20; ++rep) {
    const auto s = TaskSummary::from_moments(mu, oracle::random_vector(rng, 3, 0.01, 10.0), {1, 1, 1});
    const Vector est = oracle_mta(s, mu, 1.0).values;
    EXPECT_GE(est.minCoeff(), 0.0);
    EXPECT_LE(est.maxCoeff(), 3.0);
  }
}

TEST(OracleMta, DimensionMismatch) {
  EXPECT_THROW(oracle_mta(unit_summary({0, 1}), Vector::Zero(3), 1.0), InvalidInput);
}

TEST(JamesStein, FiveTaskExample) {
  expect_vec(james_stein(unit_summary({0, 1, 2, 3, 4})).values, {0.4, 1.2, 2.0, 2.8, 3.6}, 1e-14);
}

TEST(JamesStein, SmallTIsSingleTask) {
  std::mt19937_64 rng(7);
  for (Index n = 1; n <= 3; ++n) {
    const auto s = oracle::random_summary(rng, n);
    EXPECT_EQ(james_stein(s).values, s.means);
  }
}

TEST(JamesStein, EqualMeans) { expect_vec(james_stein(unit_summary({4, 4, 4, 4, 4})).values, {4, 4, 4, 4, 4}, 0.0); }

TEST(JamesStein, PositivePartClampsAtGrandMean) {
  // q = 0.02 < T - 3, so the factor is clipped to zero.
  expect_vec(james_stein(unit_summary({0, 0.1, 0, 0.1, 0.05})).values, {0.05, 0.05, 0.05, 0.05, 0.05}, 1e-15);
}

TEST(JsConvex, Examples) {
  const auto s = unit_summary({0, 2});
  expect_vec(js_convex(s, 1.0).values, {0, 2}, 0.0);
  expect_vec(js_convex(s, 0.5).values, {0.5, 1.5}, 1e-15);
  EXPECT_THROW(js_convex(s, 0.0), InvalidInput);
  EXPECT_THROW(js_convex(s, 1.5), InvalidInput);
}

TEST(PooledMeanMtaForm, Examples) {
  expect_vec(pooled_mean_mta_form(summarize({{"a", {0}}, {"b", {2}}}), 0.5).values, {0.5, 1.5}, 1e-15);
  expect_vec(pooled_mean_mta_form(summarize({{"a", {0, 0, 0}}, {"b", {2}}}), 0.5).values, {0.25, 1.25}, 1e-15);
  const auto s = unit_summary({3, -1, 4});
  EXPECT_LT((pooled_mean_mta_form(s, 1.0).values - s.means).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(pooled_mean_mta_form(s, 0.0), InvalidInput);
}

TEST(AverageOfMeansMtaForm, Examples) {
  expect_vec(average_of_means_mta_form(unit_summary({0, 2}), 0.5).values, {0.5, 1.5}, 1e-15);
  const auto s = unit_summary({3, -1, 4});
  EXPECT_LT((average_of_means_mta_form(s, 1.0).values - s.means).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(average_of_means_mta_form(s, -0.1), InvalidInput);
}

TEST(MtaFormFromAlpha, Examples) {
  Vector y(2);
  y << 0, 2;
  EXPECT_EQ(mta_form_from_alpha(1.0, Vector::Zero(2), y), y);
  Vector alpha(2);
  alpha << 0.25, 0.25;
  expect_vec(mta_form_from_alpha(2.0, alpha, y), {0.5, 1.5}, 1e-14);
  alpha << 0.75, 0.0;
  expect_vec(mta_form_from_alpha(4.0, alpha, y), {0.0, 0.5}, 1e-14);
}

TEST(MtaFormFromAlpha, ConstraintErrorsNameTheConstraint) {
  Vector y = Vector::Zero(2);
  auto message = [&](double gamma, const Vector& alpha) {
    try {
      mta_form_from_alpha(gamma, alpha, y);
    } catch (const InvalidInput& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  Vector alpha(2);
  alpha << 0.25, 0.25;
  EXPECT_NE(message(0.5, alpha).find("gamma"), std::string::npos);
  alpha << -0.25, 0.75;
  EXPECT_NE(message(2.0, alpha).find("alpha"), std::string::npos);
  alpha << 0.5, 0.5;
  EXPECT_NE(message(2.0, alpha).find("sum"), std::string::npos);
  EXPECT_NE(message(2.0, Vector::Constant(3, 1.0 / 6)).find("length"), std::string::npos);
}

TEST(MtaFormFamily, CorollaryIdentities) {
  std::mt19937_64 rng(41);
  for (double lambda : {0.1, 0.5, 0.9, 1.0}) {
    for (int rep = 0; rep < 25; ++rep) {
      const auto s = oracle::random_summary(rng, 2 + rep % 10);
      const double scale = std::max(1.0, s.means.cwiseAbs().maxCoeff());
      EXPECT_LT((js_convex(s, lambda).values - average_of_means_mta_form(s, lambda).values).cwiseAbs().maxCoeff(),
                1e-12 * scale);
      // Pooled-mean form against a count-weighted mean written out here.
      double total = 0.0;
      double count = 0.0;
      for (Index t = 0; t < s.size(); ++t) {
        total += double(s.counts[t]) * s.means(t);
        count += double(s.counts[t]);
      }
      const Vector direct = (lambda * s.means.array() + (1.0 - lambda) * total / count).matrix();
      EXPECT_LT((pooled_mean_mta_form(s, lambda).values - direct).cwiseAbs().maxCoeff(), 1e-12 * scale);
    }
  }
}

TEST(MtaFormFamily, AsymmetricAlphaPathsAgree) {
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 100; ++rep) {
    const Index n = 2 + rep % 15;
    const double gamma = 1.0 + std::exp(std::uniform_real_distribution<double>(-3.0, 3.0)(rng));
    Vector alpha = oracle::random_vector(rng, n, 0.0, 1.0);
    alpha *= (1.0 - 1.0 / gamma) / alpha.sum();
    const Vector y = oracle::random_vector(rng, n, -10.0, 10.0);
    const auto p = mta_form_paths(gamma, alpha, y);
    EXPECT_LT((p.matrix_form - p.explicit_form).cwiseAbs().maxCoeff(), 1e-10 * std::max(1.0, y.cwiseAbs().maxCoeff()));
  }
}

// Estimators that must commute with any relabelling of the tasks.
class Equivariance : public ::testing::TestWithParam<Estimator> {};

TEST_P(Equivariance, PermutingTasksPermutesEstimate) {
  std::mt19937_64 rng(50);
  for (int rep = 0; rep < 10; ++rep) {
    const Index n = 6;
    const auto s = oracle::random_summary(rng, n);
    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);

    Vector pm(n), pv(n), mu = oracle::random_vector(rng, n, -3, 3), pmu(n);
    std::vector<std::size_t> pc(static_cast<std::size_t>(n));
    const Matrix araw = oracle::random_similarity(rng, n);
    Matrix pa(n, n);
    for (Index i = 0; i < n; ++i) {
      const Index src = perm[static_cast<std::size_t>(i)];
      pm(i) = s.means(src);
      pv(i) = s.variances(src);
      pc[static_cast<std::size_t>(i)] = s.counts[static_cast<std::size_t>(src)];
      pmu(i) = mu(src);
      for (Index j = 0; j < n; ++j) pa(i, j) = araw(src, perm[static_cast<std::size_t>(j)]);
    }
    const auto ps = TaskSummary::from_moments(pm, pv, pc);
    const SimilarityMatrix a(araw), a_perm(pa);

    EstimatorInputs in;
    in.summary = &s;
    in.true_means = &mu;
    in.expert = &a;
    EstimatorInputs pin = in;
    pin.summary = &ps;
    pin.true_means = &pmu;
    pin.expert = &a_perm;

    const Vector base = run_estimator(GetParam(), in).values;
    const Vector moved = run_estimator(GetParam(), pin).values;
    for (Index i = 0; i < n; ++i) {
      EXPECT_NEAR(moved(i), base(perm[static_cast<std::size_t>(i)]), 1e-10 * std::max(1.0, std::abs(base(perm[static_cast<std::size_t>(i)]))));
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllNonCv, Equivariance,
                         ::testing::Values(Estimator::SingleTask, Estimator::OneTask, Estimator::JamesStein,
                                           Estimator::ConstantMta, Estimator::MinimaxMta, Estimator::OracleMta,
                                           Estimator::ExpertMta),
                         [](const auto& info) {
                           std::string name = to_string(info.param);
                           std::replace(name.begin(), name.end(), '-', '_');
                           return name;
                         });

TEST(Convexity, MtaEstimatesStayInsideSampleMeanRange) {
  std::mt19937_64 rng(60);
  for (int rep = 0; rep < 50; ++rep) {
    const Index n = 2 + rep % 20;
    const auto s = oracle::random_summary(rng, n);
    const double lo = s.means.minCoeff() - 1e-12;
    const double hi = s.means.maxCoeff() + 1e-12;
    for (const Vector& v : {constant_mta(s, 4.0).values, minimax_mta(s, 4.0).values,
                            mta_general(s, SimilarityMatrix(oracle::random_similarity(rng, n, 3.0)), 8.0).values}) {
      EXPECT_GE(v.minCoeff(), lo);
      EXPECT_LE(v.maxCoeff(), hi);
    }
  }
}

TEST(Registry, LabelsRoundTrip) {
  for (const auto& [kind, name] : kEstimatorNames) {
    EXPECT_EQ(parse_estimator(name), kind);
    EXPECT_EQ(to_string(kind), name);
  }
  EXPECT_THROW(parse_estimator("bogus"), InvalidInput);
}

TEST(Registry, OracleNeedsTrueMeans) {
  const auto s = unit_summary({0, 1});
  EstimatorInputs in;
  in.summary = &s;
  EXPECT_THROW(run_estimator(Estimator::OracleMta, in), InvalidInput);
  EXPECT_THROW(run_estimator(Estimator::ExpertMta, in), InvalidInput);
  EXPECT_THROW(run_estimator(Estimator::ConstantMtaCv, in), InvalidInput);
}

}  // namespace
}  // namespace mta
