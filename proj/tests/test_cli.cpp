#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kel/cli.hpp"
#include "kel/json_util.hpp"

namespace kel {
namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = 0;
  std::string out;
  std::string err;
};

CliRun run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("kel-cli-" + name);
  fs::remove_all(dir);
  return dir;
}

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

TEST(Cli, CheckReportsContractionRate) {
  const CliRun r = run({"check", "--preset", "granular", "--beta", "1", "--theta", "0.05", "--alpha", "0.02"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_NEAR(j.at("kappa").get<double>(), 0.21760296, 1e-7);
  EXPECT_EQ(j.at("kalman_index"), 0);
  EXPECT_EQ(j.at("config").at("model").at("alpha"), 0.02);
  EXPECT_EQ(j.at("config_hash").get<std::string>().size(), 16u);
}

TEST(Cli, GramianOfKineticModel) {
  const CliRun r = run({"gramian", "--t", "1", "--s", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_NEAR(j.at("Q").at(0).at(0).get<double>(), 1.0 / 6.0, 1e-12);
  EXPECT_NEAR(j.at("lambda_min").get<double>(), 1.0 / 6.0, 1e-12);
}

TEST(Cli, UnknownFlagIsValidationErrorWithoutOutput) {
  const fs::path dir = scratch("unknown-flag");
  const CliRun r = run({"simulate", "--bogus", "1", "--out", dir.string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("error"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Cli, MissingOrUnknownSubcommandIsValidationError) {
  EXPECT_EQ(run({}).code, 2);
  const fs::path dir = scratch("unknown-sub");
  EXPECT_EQ(run({"run", "--bogus", "--out", dir.string()}).code, 2);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Cli, UnknownConfigKeyIsValidationError) {
  const fs::path dir = scratch("unknown-key");
  write(dir / "cfg.json", R"({"model": "kinetic-ou", "bogus": 1})");
  const CliRun r = run({"check", "--config", (dir / "cfg.json").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("bogus"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Cli, MismatchedSubcommandInConfigIsRejected) {
  const fs::path dir = scratch("wrong-sub");
  write(dir / "cfg.json", R"({"subcommand": "simulate"})");
  EXPECT_EQ(run({"check", "--config", (dir / "cfg.json").string()}).code, 2);
  fs::remove_all(dir);
}

TEST(Cli, NumericalFailureExitsThree) {
  const fs::path dir = scratch("numerical");
  write(dir / "cfg.json", R"({
    "model": {"preset": "linear", "A": [[0]], "B": [[0]], "Z_matrix": [[0, 0]], "sigma": [[1]]},
    "t": 1,
    "s_grid": [0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1]
  })");
  const CliRun r = run({"gramian", "--config", (dir / "cfg.json").string()});
  EXPECT_EQ(r.code, 3) << r.err;
  EXPECT_NE(r.err.find("NotPositiveDefinite"), std::string::npos) << r.err;
  fs::remove_all(dir);
}

TEST(Cli, HelpAndVersionExitZero) {
  const CliRun help = run({"--help"});
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.out.find("selftest"), std::string::npos);
  EXPECT_EQ(run({"simulate", "--help"}).code, 0);
  EXPECT_EQ(run({"--version"}).code, 0);
}

TEST(Cli, DivergenceFromCsvFiles) {
  const fs::path dir = scratch("divergence");
  write(dir / "x.csv", "a,b\n0,0\n1,0\n");
  write(dir / "y.csv", "# shifted\n1,1\n0,1\n");
  const CliRun r = run({"divergence", "--estimator", "exact", "--x", (dir / "x.csv").string(), "--y",
                     (dir / "y.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const Json j = Json::parse(r.out);
  EXPECT_DOUBLE_EQ(j.at("value").get<double>(), 1.0);
  EXPECT_EQ(j.at("estimator"), "exact_assignment");
  fs::remove_all(dir);
}

TEST(Cli, DivergenceOfGaussiansFromConfig) {
  const fs::path dir = scratch("gaussian");
  write(dir / "cfg.json", R"({"estimator": "gaussian-kl",
    "x": {"mean": [0], "cov": [[1]]}, "y": {"mean": [1], "cov": [[1]]}})");
  const CliRun r = run({"divergence", "--config", (dir / "cfg.json").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NEAR(Json::parse(r.out).at("value").get<double>(), 0.5, 1e-14);
  fs::remove_all(dir);
}

TEST(Cli, SimulateIsByteIdenticalAcrossRunsAndThreads) {
  const fs::path a = scratch("sim-a");
  const fs::path b = scratch("sim-b");
  const std::vector<std::string> base{"simulate", "--N", "200", "--T", "0.2", "--snapshot-every", "0.1",
                                      "--theta", "0.1", "--alpha", "0.05", "--seed", "9"};
  auto with = [&](const fs::path& out, const char* threads) {
    std::vector<std::string> args = base;
    args.insert(args.end(), {"--out", out.string(), "--threads", threads});
    return run(args);
  };
  ASSERT_EQ(with(a, "1").code, 0);
  ASSERT_EQ(with(b, "4").code, 0);
  const std::string first = slurp(a / "snapshots.csv");
  EXPECT_FALSE(first.empty());
  EXPECT_EQ(first, slurp(b / "snapshots.csv"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Cli, ExperimentWritesReport) {
  const fs::path dir = scratch("experiment");
  const CliRun r = run({"experiment", "shorttime", "--out", dir.string(), "--format", "json,csv,svg"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(dir / "shorttime-scaling.json"));
  EXPECT_TRUE(fs::exists(dir / "shorttime-scaling.csv"));
  EXPECT_TRUE(fs::exists(dir / "shorttime-scaling.svg"));
  fs::remove_all(dir);
}

TEST(Cli, SelftestSingleCriterion) {
  const fs::path dir = scratch("selftest");
  const CliRun r = run({"selftest", "--criteria", "1", "--out", dir.string()});
  EXPECT_EQ(r.code, 0) << r.out << r.err;
  EXPECT_NE(r.out.find("criterion 1 [PASS]"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("selftest: 1/1 passed"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "selftest" / "snapshots.csv"));
  fs::remove_all(dir);
}

}  // namespace
}  // namespace kel
