#include <cstdlib>
#include <filesystem>
#include <sstream>

#include <gtest/gtest.h>
#include <json.hpp>

#include "cli.hpp"
#include "fpca/csv.hpp"
#include "fpca/dataset.hpp"

namespace fs = std::filesystem;
using fpca::cli::run;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("fpca_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  nlohmann::json json(const std::string& name) const { return nlohmann::json::parse(fpca::read_text_file(dir_ / name)); }

  fs::path dir_;
};

const fs::path kData = FPCA_DATA_DIR;

// Parses a row,col,value CSV into (row, col) -> value.
std::map<std::pair<long, long>, double> read_cells(const fs::path& p) {
  std::map<std::pair<long, long>, double> out;
  const auto s = fpca::parse_coordinate_csv(fpca::read_text_file(p));
  for (const auto& c : s.cells()) out[{c.row, c.col}] = c.value;
  return out;
}

}  // namespace

TEST_F(CliTest, FitExactRankOneToy) {
  fpca::write_text_file(dir_ / "toy.csv", "row,col,value\n0,0,2\n0,1,4\n0,2,6\n1,0,1\n1,1,2\n1,2,3\n2,0,-1\n2,1,-2\n2,2,-3\n");
  const auto r = invoke({"fit", "--input", path("toy.csv"), "--family", "gaussian", "--variant", "simple", "--k", "1",
                         "--seed", "7", "--out", path("fit")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json("fit/fit.json");
  EXPECT_LT(j["deviance"].get<double>(), 1e-12);
  EXPECT_EQ(j["k"], 1);
  EXPECT_TRUE(j["converged"].get<bool>());
  for (const char* f : {"alpha.csv", "beta.csv", "gamma.csv", "observed.csv", "manifest.json"}) {
    EXPECT_TRUE(fs::exists(dir_ / "fit" / f)) << f;
  }
  const auto m = json("fit/manifest.json");
  EXPECT_EQ(m["subcommand"], "fit");
  EXPECT_EQ(m["seed"], 7);
  EXPECT_EQ(m["inputs"][0]["sha256"].get<std::string>().size(), 64u);
  EXPECT_EQ(m["flags"]["starts"], "5");
}

TEST_F(CliTest, SelectBicOnBundledSimulation) {
  const auto r = invoke({"select", "--input", (kData / "sim_k2" / "masked.csv").string(), "--variant", "covariance",
                         "--rule", "bic", "--out", path("sel")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json("sel/selection.json");
  EXPECT_EQ(j["chosen_k"], 2);
  EXPECT_EQ(j["table"].size(), 10u);
  EXPECT_TRUE(fs::exists(dir_ / "sel" / "selection.csv"));
}

TEST_F(CliTest, SelectAicWarnsAndCvRuns) {
  const auto input = (kData / "sim_k2" / "masked.csv").string();
  const auto aic = invoke({"select", "--input", input, "--variant", "covariance", "--rule", "aic", "--k-max", "3",
                           "--out", path("aic")});
  ASSERT_EQ(aic.code, 0) << aic.err;
  EXPECT_NE(aic.err.find("AIC is inconsistent"), std::string::npos);
  const auto cv = invoke({"select", "--input", input, "--variant", "covariance", "--rule", "cv", "--k-max", "4",
                          "--cv-reps", "2", "--out", path("cv")});
  ASSERT_EQ(cv.code, 0) << cv.err;
  EXPECT_EQ(json("cv/selection.json")["chosen_k"], 2);
  const auto gic = invoke({"select", "--input", input, "--variant", "covariance", "--rule", "gic:7.5", "--k-max", "3",
                           "--out", path("gic")});
  ASSERT_EQ(gic.code, 0) << gic.err;
  EXPECT_DOUBLE_EQ(json("gic/selection.json")["kappa"].get<double>(), 7.5);
}

TEST_F(CliTest, DecomposeAndPredict) {
  const auto input = (kData / "sim_k2" / "masked.csv").string();
  ASSERT_EQ(invoke({"fit", "--input", input, "--variant", "covariance", "--k", "2", "--out", path("fit")}).code, 0);
  const auto d = invoke({"decompose", "--fit", path("fit"), "--out", path("dec")});
  ASSERT_EQ(d.code, 0) << d.err;
  const auto pcs = fpca::read_matrix_csv(dir_ / "dec" / "pcs.csv");
  EXPECT_EQ(pcs.rows(), 30);
  EXPECT_EQ(pcs.cols(), 2);
  EXPECT_TRUE(fs::exists(dir_ / "dec" / "explained.csv"));

  const auto p = invoke({"predict", "--fit", path("fit"), "--cells", "all", "--difference", "--out", path("pred")});
  ASSERT_EQ(p.code, 0) << p.err;
  EXPECT_EQ(read_cells(dir_ / "pred" / "predictions.csv").size(), 900u);
  EXPECT_EQ(read_cells(dir_ / "pred" / "difference.csv").size(), 817u);

  fpca::write_text_file(dir_ / "cells.csv", "row,col\n0,0\n29,29\n");
  ASSERT_EQ(invoke({"predict", "--fit", path("fit"), "--cells", path("cells.csv"), "--out", path("few")}).code, 0);
  EXPECT_EQ(read_cells(dir_ / "few" / "predictions.csv").size(), 2u);
  fpca::write_text_file(dir_ / "bad.csv", "row,col\n30,0\n");
  EXPECT_EQ(invoke({"predict", "--fit", path("fit"), "--cells", path("bad.csv"), "--out", path("bad")}).code, 1);
}

TEST_F(CliTest, WindowMinusWindowImageGolden) {
  const auto image = (kData / "image" / "image.csv").string();
  const std::vector<std::string> region = {"--input", image, "--window", "5,5,35,35", "--hole", "15,15,25,25",
                                           "--variant", "simple", "--seed", "3"};
  auto sel = region;
  sel.insert(sel.begin(), "select");
  sel.insert(sel.end(), {"--rule", "bic", "--out", path("sel")});
  ASSERT_EQ(invoke(sel).code, 0);
  EXPECT_EQ(fpca::read_text_file(dir_ / "sel" / "selection.csv"),
            fpca::read_text_file(kData / "image" / "golden" / "selection.csv"));

  auto fit = region;
  fit.insert(fit.begin(), "fit");
  fit.insert(fit.end(), {"--k", "3", "--out", path("fit")});
  ASSERT_EQ(invoke(fit).code, 0);
  ASSERT_EQ(invoke({"predict", "--fit", path("fit"), "--difference", "--out", path("pred")}).code, 0);
  for (const char* f : {"predictions.csv", "difference.csv"}) {
    const auto got = read_cells(dir_ / "pred" / f);
    const auto want = read_cells(kData / "image" / "golden" / f);
    ASSERT_EQ(got.size(), want.size()) << f;
    for (const auto& [cell, v] : want) {
      ASSERT_TRUE(got.count(cell));
      EXPECT_NEAR(got.at(cell), v, 1e-8 * (1.0 + std::abs(v))) << f;
    }
  }
  // The hole is predicted too, in the original image coordinates.
  EXPECT_EQ(read_cells(dir_ / "pred" / "predictions.csv").count({20, 20}), 1u);
}

TEST_F(CliTest, UnknownFlagSuggestsClosest) {
  const auto r = invoke({"fit", "--inptu", "x.csv", "--k", "1"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("did you mean --input"), std::string::npos) << r.err;
  EXPECT_EQ(invoke({"transform"}).code, 1);
  EXPECT_EQ(invoke({}).code, 1);
}

TEST_F(CliTest, ExitCodes) {
  fpca::write_text_file(dir_ / "bin.csv", "row,col,value\n0,0,2\n0,1,1\n1,0,0\n1,1,1\n");
  EXPECT_EQ(invoke({"fit", "--input", path("bin.csv"), "--family", "bernoulli", "--k", "1", "--out", path("o")}).code, 2);
  fpca::write_text_file(dir_ / "broken.csv", "row,col,value\n0,0,abc\n");
  const auto r = invoke({"fit", "--input", path("broken.csv"), "--k", "1", "--out", path("o")});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
  EXPECT_EQ(invoke({"fit", "--input", path("bin.csv"), "--k", "0"}).code, 1);
  EXPECT_EQ(invoke({"select", "--input", path("bin.csv"), "--rule", "hqc", "--out", path("o")}).code, 1);
  EXPECT_EQ(invoke({"--help"}).code, 0);
}

TEST_F(CliTest, SeedFromEnvironment) {
  const auto input = (kData / "sim_k2" / "masked.csv").string();
  ::setenv("FPCA_SEED", "123", 1);
  const auto r = invoke({"fit", "--input", input, "--k", "1", "--out", path("env")});
  ::unsetenv("FPCA_SEED");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json("env/fit.json")["seed"], 123);
  ASSERT_EQ(invoke({"fit", "--input", input, "--k", "1", "--seed", "123", "--out", path("flag")}).code, 0);
  EXPECT_EQ(fpca::read_text_file(dir_ / "env" / "fit.json"), fpca::read_text_file(dir_ / "flag" / "fit.json"));
}

TEST_F(CliTest, OutputsIndependentOfThreadCount) {
  const auto input = (kData / "sim_k2" / "masked.csv").string();
  for (const char* t : {"1", "4"}) {
    ASSERT_EQ(invoke({"fit", "--input", input, "--variant", "covariance", "--k", "3", "--threads", t, "--out",
                      path(std::string("t") + t)})
                  .code,
              0);
  }
  for (const char* f : {"fit.json", "alpha.csv", "beta.csv", "gamma.csv"}) {
    EXPECT_EQ(fpca::read_text_file(dir_ / "t1" / f), fpca::read_text_file(dir_ / "t4" / f)) << f;
  }
}

TEST_F(CliTest, SimulateWritesReports) {
  const auto r = invoke({"simulate", "--n", "12", "--p", "10", "--k-true", "1", "--tau", "0.1", "--replications", "3",
                         "--rules", "bic,aic", "--k-max", "3", "--out", path("sim")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = json("sim/simreport.json");
  EXPECT_EQ(j["records"].size(), 3u);
  EXPECT_EQ(j["summaries"].size(), 2u);
  EXPECT_TRUE(fs::exists(dir_ / "sim" / "simreport.csv"));
  EXPECT_EQ(invoke({"simulate", "--rules", "bic,xyz", "--out", path("bad")}).code, 1);
}
