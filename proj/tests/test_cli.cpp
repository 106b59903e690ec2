#include <gtest/gtest.h>

#include "cli_util.hpp"
#include "json.hpp"
#include "mta/io.hpp"
#include "mta/mtkde.hpp"

namespace mta {
namespace {

using testing::run_cli;
using testing::run_cli_capture;
using testing::ScratchDir;
using testing::slurp;
using testing::spit;

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& [n, line] : csv::read_lines(path)) rows.push_back(csv::split(line));
  return rows;
}

double num(const std::string& s) {
  double v = 0.0;
  EXPECT_TRUE(csv::parse_double(s, v)) << s;
  return v;
}

TEST(CliEstimate, SingleTaskMean) {
  ScratchDir dir("cli");
  spit(dir.path() / "d.csv", "task_id,value\nonly,1\nonly,2\nonly,3\n");
  ASSERT_EQ(run_cli("estimate --data " + (dir / "d.csv") + " --estimator single-task --out " + (dir / "o.csv")), 0);
  const auto rows = read_csv(dir / "o.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"task_id", "n", "sample_mean", "estimate"}));
  EXPECT_EQ(rows[1][0], "only");
  EXPECT_EQ(rows[1][1], "3");
  EXPECT_EQ(num(rows[1][3]), 2.0);
}

TEST(CliEstimate, MinimaxEndToEnd) {
  ScratchDir dir("cli");
  // Means (0, 1), each with variance 2 over 2 samples: unit variance of the mean.
  spit(dir.path() / "d.csv", "task_id,value\na,-1\na,1\nb,0\nb,2\n");
  ASSERT_EQ(run_cli("estimate --data " + (dir / "d.csv") + " --estimator minimax-mta --gamma 1 --out " + (dir / "o.csv")), 0);
  const auto rows = read_csv(dir / "o.csv");
  EXPECT_NEAR(num(rows[1][3]), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(num(rows[2][3]), 2.0 / 3.0, 1e-15);
}

TEST(CliEstimate, ZeroVarianceFallbackIsReported) {
  ScratchDir dir("cli");
  spit(dir.path() / "d.csv", "task_id,value\na,0\na,0\nb,1\nb,1\n");
  ASSERT_EQ(run_cli("estimate --data " + (dir / "d.csv") + " --estimator constant-mta --gamma 1 --out " + (dir / "o.csv")), 0);
  const auto meta = nlohmann::json::parse(slurp(dir / "o.csv.json"));
  EXPECT_EQ(meta["variance_fallback_tasks"], nlohmann::json::array({"a", "b"}));
  const auto rows = read_csv(dir / "o.csv");
  // Floor variance makes the regularizer negligible.
  EXPECT_NEAR(num(rows[1][3]), 0.0, 1e-9);
  EXPECT_NEAR(num(rows[2][3]), 1.0, 1e-9);
}

TEST(CliEstimate, CvWritesSelection) {
  ScratchDir dir("cli");
  std::string data = "task_id,value\n";
  for (int t = 0; t < 4; ++t)
    for (int i = 0; i < 6; ++i) data += "t" + std::to_string(t) + "," + std::to_string(0.1 * t + (i % 3) - 1) + "\n";
  spit(dir.path() / "d.csv", data);
  ASSERT_EQ(run_cli("estimate --data " + (dir / "d.csv") + " --estimator js --cv --seed 4 --out " + (dir / "o.csv")), 0);
  const auto meta = nlohmann::json::parse(slurp(dir / "o.csv.json"));
  EXPECT_EQ(meta["estimator"], "js-cv");
  EXPECT_TRUE(meta["cv"].contains("selected"));
  const double lambda = meta["cv"]["selected"];
  EXPECT_GT(lambda, 0.0);
  EXPECT_LT(lambda, 1.0);
}

TEST(CliEstimate, ExpertSimilarity) {
  ScratchDir dir("cli");
  spit(dir.path() / "d.csv", "task_id,value\na,-1\na,1\nb,0\nb,2\n");
  spit(dir.path() / "s.csv", "g,b,a\nb,0,1\na,1,0\n");
  ASSERT_EQ(run_cli("estimate --data " + (dir / "d.csv") + " --estimator expert-mta --similarity " + (dir / "s.csv") +
                    " --out " + (dir / "o.csv")),
            0);
  const auto rows = read_csv(dir / "o.csv");
  EXPECT_NEAR(num(rows[1][3]), 0.25, 1e-15);
  EXPECT_NEAR(num(rows[2][3]), 0.75, 1e-15);
}

TEST(CliEstimate, InputErrorsExitTwo) {
  ScratchDir dir("cli");
  spit(dir.path() / "bad.csv", "task_id,value\na,1\na,x\n");
  std::string err;
  EXPECT_EQ(run_cli_capture("estimate --data " + (dir / "bad.csv") + " --estimator js --out " + (dir / "o.csv"), err), 2);
  EXPECT_NE(err.find("bad.csv:3"), std::string::npos) << err;
  EXPECT_NE(err.find("value"), std::string::npos) << err;

  spit(dir.path() / "d.csv", "task_id,value\na,1\na,2\n");
  EXPECT_EQ(run_cli("estimate --data " + (dir / "d.csv") + " --estimator nope --out " + (dir / "o.csv")), 2);
  EXPECT_EQ(run_cli("estimate --data " + (dir / "d.csv") + " --estimator oracle-mta --out " + (dir / "o.csv")), 2);
  EXPECT_EQ(run_cli("estimate --data " + (dir / "d.csv") + " --estimator one-task --cv --out " + (dir / "o.csv")), 2);
  EXPECT_EQ(run_cli("estimate --data " + (dir / "d.csv") + " --estimator js --gamma -1 --out " + (dir / "o.csv")), 2);
  EXPECT_EQ(run_cli("estimate --estimator js --out " + (dir / "o.csv")), 2);
  EXPECT_EQ(run_cli("bogus-command"), 2);
}

TEST(CliSimulate, SmokeRunSingleTaskZero) {
  ScratchDir dir("cli");
  ASSERT_EQ(run_cli("simulate --T 2 --replicates 10 --sigma-mu-grid 0.5,1 --estimators single-task,js,constant-mta --seed 3 --out " +
                    dir.path().string()),
            0);
  const auto rows = read_csv(dir / "gaussian_T2.csv");
  EXPECT_EQ(rows[0], (std::vector<std::string>{"sigma_mu_sq", "estimator", "risk", "pct_change", "stderr", "replicates"}));
  int singles = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i][1] == "single-task") {
      EXPECT_EQ(num(rows[i][3]), 0.0);
      ++singles;
    }
    EXPECT_EQ(rows[i][5], "10");
  }
  EXPECT_EQ(singles, 2);
  const auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(manifest["seed"], 3);
  EXPECT_EQ(manifest["T"], 2);
}

TEST(CliSimulate, SameSeedSameBytes) {
  ScratchDir a("cli"), b("cli");
  const std::string args = "simulate --family uniform --T 6 --replicates 50 --sigma-mu-grid 0.1,1 --estimators js --cv --seed 11 --out ";
  ASSERT_EQ(run_cli(args + a.path().string()), 0);
  ASSERT_EQ(run_cli(args + b.path().string()), 0);
  for (const char* f : {"uniform_T6.csv", "uniform_T6.json", "manifest.json"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(CliSimulate, FixedDesign) {
  ScratchDir dir("cli");
  ASSERT_EQ(run_cli("simulate --fixed-mu 0,0 --fixed-sigma 1,1 --fixed-n 2 --a 1 --replicates 10000 --estimators single-task --seed 1 --out " +
                    dir.path().string()),
            0);
  double pct = 0.0;
  for (const auto& row : read_csv(dir / "fixed_T2.csv"))
    if (row[1] == "expert-mta") pct = num(row[3]);
  EXPECT_NEAR(pct, -20.0, 3.0);
}

TEST(CliSimulate, InvalidCombinationsExitTwo) {
  ScratchDir dir("cli");
  EXPECT_EQ(run_cli("simulate --T 3 --replicates 5 --out " + dir.path().string()), 2);
  EXPECT_EQ(run_cli("simulate --T 3 --sigma-mu-grid 1 --replicates 5 --estimators wat --out " + dir.path().string()), 2);
  EXPECT_EQ(run_cli("simulate --T 3 --sigma-mu-grid -1 --replicates 5 --out " + dir.path().string()), 2);
  EXPECT_EQ(run_cli("simulate --family cauchy --T 3 --sigma-mu-grid 1 --out " + dir.path().string()), 2);
  EXPECT_EQ(run_cli("simulate --fixed-mu 0,0 --fixed-sigma 1 --fixed-n 2 --a 1 --similarity x.csv --out " + dir.path().string()), 2);
}

class CliKde : public ::testing::Test {
 protected:
  void SetUp() override {
    spit(dir.path() / "tasks" / "alpha.csv", "x,y\n0,0\n0.5,0.2\n1,1\n");
    spit(dir.path() / "tasks" / "beta.csv", "x,y\n0.1,0\n2,2\n");
    spit(dir.path() / "tasks" / "gamma.csv", "x,y\n-1,0\n0,0\n0.3,0.3\n0.2,0.9\n");
    std::string grid = "x,y\n";
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) grid += std::to_string(0.5 * i - 1) + "," + std::to_string(0.5 * j - 0.5) + "\n";
    spit(dir.path() / "grid.csv", grid);
  }
  std::string base() const { return "kde --tasks " + (dir / "tasks") + " --grid " + (dir / "grid.csv"); }
  ScratchDir dir{"kde"};
};

TEST_F(CliKde, GammaZeroMatchesSingleByteForByte) {
  ASSERT_EQ(run_cli(base() + " --mode single --out " + (dir / "s.csv")), 0);
  ASSERT_EQ(run_cli(base() + " --mode constant --gamma 0 --out " + (dir / "c.csv")), 0);
  EXPECT_EQ(slurp(dir / "s.csv"), slurp(dir / "c.csv"));
  const auto rows = read_csv(dir / "s.csv");
  EXPECT_EQ(rows.size(), 1u + 3u * 25u);
  EXPECT_EQ(rows[1][0], "alpha");
}

TEST_F(CliKde, DensitiesRoundTrip) {
  ASSERT_EQ(run_cli(base() + " --mode single --out " + (dir / "s.csv")), 0);
  const auto grid = read_points(dir / "grid.csv");
  const std::vector<DensityTask> beta{{"beta", read_points(dir / "tasks/beta.csv")}};
  for (const auto& row : read_csv(dir / "s.csv")) {
    if (row[0] != "beta") continue;
    EXPECT_EQ(num(row[2]), kde_at(beta[0], grid[std::stoul(row[1])], KernelSpec{}));
  }
}

TEST_F(CliKde, LooMrrSingleGridPoint) {
  spit(dir.path() / "one" / "a.csv", "2,2\n2,2\n");
  spit(dir.path() / "one" / "b.csv", "2,2\n2,2\n2,2\n");
  spit(dir.path() / "g1.csv", "2,2\n");
  ASSERT_EQ(run_cli("kde --tasks " + (dir / "one") + " --grid " + (dir / "g1.csv") + " --mode constant --loo-mrr --out " +
                    (dir / "m.csv")),
            0);
  const auto rows = read_csv(dir / "m.csv");
  EXPECT_EQ(rows.back()[0], "overall");
  EXPECT_EQ(num(rows.back()[2]), 1.0);
}

TEST_F(CliKde, DimensionMismatchExitsTwo) {
  spit(dir.path() / "g3.csv", "1,2,3\n");
  EXPECT_EQ(run_cli("kde --tasks " + (dir / "tasks") + " --grid " + (dir / "g3.csv") + " --out " + (dir / "o.csv")), 2);
  EXPECT_EQ(run_cli(base() + " --mode expert --out " + (dir / "o.csv")), 2);
  spit(dir.path() / "s.csv", "g,alpha,beta\nalpha,0,1\nbeta,1,0\n");
  EXPECT_EQ(run_cli(base() + " --mode expert --similarity " + (dir / "s.csv") + " --out " + (dir / "o.csv")), 2);
}

TEST(CliHoldout, WritesReportAndDraws) {
  ScratchDir dir("cli");
  std::string data = "task_id,value\n";
  for (int t = 0; t < 5; ++t)
    for (int i = 0; i < 4; ++i) data += "t" + std::to_string(t) + "," + std::to_string(0.05 * t + 0.3 * i) + "\n";
  spit(dir.path() / "d.csv", data);
  ASSERT_EQ(run_cli("holdout --data " + (dir / "d.csv") + " --estimators constant-mta,one-task --draws 20 --out " + (dir / "h.csv")), 0);
  const auto rows = read_csv(dir / "h.csv");
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[0][0], "estimator");
  EXPECT_EQ(rows[1][0], "single-task");
  EXPECT_EQ(read_csv(dir / "h.csv.draws.csv").size(), 21u);
}

}  // namespace
}  // namespace mta
