#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cli_config.hpp"

namespace fs = std::filesystem;
using weakpheno::cli::ConfigError;
using weakpheno::cli::SimulateFlags;

namespace {

struct RunResult {
  int code = -1;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / ("weakpheno_cli_test_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

RunResult run(const std::string& args) {
  const fs::path err = scratch() / "stderr.txt";
  const std::string cmd = std::string(WEAKPHENO_CLI) + " " + args + " > /dev/null 2> " + err.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.err = slurp(err);
  return r;
}

}  // namespace

TEST(CliConfig, DefaultsAndOverrides) {
  SimulateFlags f;
  f.replicates = 3;
  f.algorithms = "phenorm_v1,map_v2";
  const auto r = weakpheno::cli::resolve_simulate(f);
  EXPECT_EQ(r.config.replicates, 3);
  EXPECT_EQ(r.config.n, 10000u);
  EXPECT_EQ(r.config.test_size, 200u);
  ASSERT_EQ(r.config.algorithms.size(), 2u);
  EXPECT_EQ(r.config.algorithms[1], weakpheno::Algorithm::MapV2);
}

TEST(CliConfig, InvalidFieldsNamed) {
  auto field_of = [](SimulateFlags f) {
    try {
      weakpheno::cli::resolve_simulate(f);
    } catch (const ConfigError& e) {
      return e.field;
    }
    return std::string("none");
  };
  SimulateFlags f;
  f.replicates = 0;
  EXPECT_EQ(field_of(f), "--replicates");
  f = {};
  f.test_size = 20000;
  EXPECT_EQ(field_of(f), "--test-size");
  f = {};
  f.algorithms = "phenorm_v9";
  EXPECT_EQ(field_of(f), "--algorithms");
  f = {};
  f.threshold = 1.5;
  EXPECT_EQ(field_of(f), "--threshold");
}

TEST(CliConfig, ConfigFileMergedUnderFlags) {
  const fs::path p = scratch() / "cfg.json";
  std::ofstream(p) << R"({"replicates": 7, "n": 500, "seed": 4})";
  SimulateFlags f;
  f.config_file = p.string();
  f.n = 600;
  const auto r = weakpheno::cli::resolve_simulate(f);
  EXPECT_EQ(r.config.replicates, 7);
  EXPECT_EQ(r.config.n, 600u);
  EXPECT_EQ(r.config.seed, 4u);
  std::ofstream(p) << R"({"replicates": "many"})";
  EXPECT_THROW(weakpheno::cli::resolve_simulate(f), ConfigError);
}

TEST(Cli, UsageErrorsExitTwoWithJson) {
  auto r = run("");
  EXPECT_EQ(r.code, 2);
  r = run("simulate --bogus 3");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("\"kind\""), std::string::npos);
  r = run("simulate --replicates 0 --out " + (scratch() / "x").string());
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("replicates"), std::string::npos);
  r = run("fit --input " + (scratch() / "missing.csv").string());
  EXPECT_EQ(r.code, 2);
  r = run("generate --generator nope --out " + (scratch() / "g").string());
  EXPECT_NE(r.code, 0);
}

TEST(Cli, GenerateFitSelect) {
  const fs::path g = scratch() / "gen";
  ASSERT_EQ(run("generate --generator simplified --scenario common_informative --n 1100 --seed 3 --out " + g.string()).code, 0);
  const std::string cohort = slurp(g / "cohort.csv");
  EXPECT_EQ(cohort.rfind("# weakpheno seed=3 config_hash=", 0), 0u);

  const fs::path f = scratch() / "fit";
  auto r = run("fit --input " + (g / "cohort.csv").string() +
               " --algorithms phenorm_v1,map_v1 --dropout-repetitions 2 --a-grid-points 21 --out " + f.string());
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream pred(slurp(f / "predictions.csv"));
  std::string line;
  std::getline(pred, line);
  while (!line.empty() && line[0] == '#') std::getline(pred, line);
  EXPECT_EQ(line, "id,phenorm_v1,map_v1");
  int rows = 0;
  while (std::getline(pred, line)) rows += !line.empty();
  EXPECT_EQ(rows, 1100);

  const fs::path s = scratch() / "sel";
  r = run("select-charts --input " + (f / "predictions.csv").string() + " --column phenorm_v1 --seed 2 --out " + s.string());
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream sample(slurp(s / "chart_sample.csv"));
  int n = 0;
  while (std::getline(sample, line)) n += !line.empty() && line[0] != '#';
  EXPECT_EQ(n, 201);

  r = run("select-charts --input " + (f / "predictions.csv").string() + " --column phenorm_v1 --top 500 --out " + s.string());
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("StratumExhausted"), std::string::npos);

  const fs::path c = scratch() / "cmp";
  r = run("compare --features " + (g / "cohort.csv").string() + " --groups " + (s / "chart_sample.csv").string() +
          " --columns s_icd,s_nlp --out " + c.string());
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(slurp(c / "comparison.csv").find("feature,H,df,p"), std::string::npos);
}

TEST(Cli, SimulateIdenticalAcrossWorkers) {
  const std::string common =
      "simulate --generator simplified --scenario rare_informative --algorithms icd_logit,map_v1 --replicates 3 --n 600 "
      "--test-size 100 --seed 5 --dropout-repetitions 2 --a-grid-points 21 --out ";
  const fs::path a = scratch() / "w1", b = scratch() / "w3";
  ASSERT_EQ(run(common + a.string() + " --workers 1").code, 0);
  ASSERT_EQ(run(common + b.string() + " --workers 3").code, 0);
  EXPECT_EQ(slurp(a / "summary.csv"), slurp(b / "summary.csv"));
  EXPECT_EQ(slurp(a / "report.csv"), slurp(b / "report.csv"));
  EXPECT_NE(slurp(a / "provenance.json").find("config_hash"), std::string::npos);
}
