// End-to-end tests that drive the installed command-line binary as a
// subprocess and check exit codes, output files, and manifests.

#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "hazard/hazard.hpp"

namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

struct TempDir {
  fs::path path;

  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("hazard_cli_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }

  fs::path file(const std::string& name) const { return path / name; }
};

struct CliResult {
  int code = -1;
  std::string output;  // stdout and stderr, merged
};

CliResult run_cli(const TempDir& dir, const std::string& args) {
  static int log_counter = 0;
  fs::path log = dir.path / (".log_" + std::to_string(log_counter++) + ".txt");
  std::string command =
      std::string(HAZARD_CLI_PATH) + " " + args + " > \"" + log.string() + "\" 2>&1";
  int status = std::system(command.c_str());
  CliResult result;
  if (WIFEXITED(status)) {
    result.code = WEXITSTATUS(status);
  }
  result.output = read_file(log);
  return result;
}

// The two-item model whose observable distribution has closed forms.
hazard::ParamMatrix reference_pair_model() {
  return hazard::ParamMatrix::from_rows({{0.0, 4.0}, {0.0, -4.0}});
}

fs::path write_pair_model(const TempDir& dir, const std::string& name = "truth.json") {
  fs::path path = dir.file(name);
  hazard::save_model(path.string(), reference_pair_model());
  return path;
}

fs::path write_three_item_model(const TempDir& dir) {
  hazard::ParamMatrix theta = hazard::ParamMatrix::from_rows({
      {-0.3, 0.8, -0.4},
      {0.0, -1.1, 0.6},
      {0.5, -0.2, -0.7},
  });
  theta.item_names = {"alpha", "beta", "gamma"};
  fs::path path = dir.file("three.json");
  hazard::save_model(path.string(), theta);
  return path;
}

}  // namespace

TEST(Cli, VersionAndHelpExitZero) {
  TempDir dir;
  CliResult version = run_cli(dir, "--version");
  EXPECT_EQ(version.code, 0);
  EXPECT_NE(version.output.find(hazard::kVersion), std::string::npos);

  CliResult help = run_cli(dir, "--help");
  EXPECT_EQ(help.code, 0);
  EXPECT_NE(help.output.find("simulate"), std::string::npos);
  EXPECT_NE(help.output.find("fit"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  TempDir dir;
  EXPECT_EQ(run_cli(dir, "simulate --bogus-flag 3").code, 2);
  EXPECT_EQ(run_cli(dir, "fit").code, 2);  // --data is required
  EXPECT_EQ(run_cli(dir, "definitely-not-a-command").code, 2);
  EXPECT_EQ(run_cli(dir, "eval").code, 2);  // needs a sub-analysis
}

TEST(Cli, DataErrorsExitThree) {
  TempDir dir;
  EXPECT_EQ(run_cli(dir, "simulate --model " + dir.file("missing.json").string() +
                             " --samples 5")
                .code,
            3);

  std::ofstream(dir.file("broken.json")) << "{ this is not json";
  EXPECT_EQ(run_cli(dir, "simulate --model " + dir.file("broken.json").string() +
                             " --samples 5")
                .code,
            3);

  CliResult family = run_cli(dir, "family --alpha 4 --s 0.1");
  EXPECT_EQ(family.code, 3);
  EXPECT_NE(family.output.find("interval"), std::string::npos);
}

TEST(Cli, NumericalErrorsExitFour) {
  TempDir dir;
  fs::path model = write_pair_model(dir);
  fs::path data = dir.file("data.json");
  ASSERT_EQ(run_cli(dir, "simulate --model " + model.string() +
                             " --samples 30 --seed 1 --out " + data.string())
                .code,
            0);
  // A huge step size blows the parameters up to overflow within an epoch.
  CliResult fit = run_cli(dir, "fit --data " + data.string() +
                                   " --step 1e8 --epochs 3 --pretrain-epochs 2"
                                   " --mcmc-samples 5 --burn-in 1 --seed 1 --out " +
                                   dir.file("fit.json").string());
  EXPECT_EQ(fit.code, 4);
}

TEST(Cli, SimulateWritesDatasetAndManifest) {
  TempDir dir;
  fs::path model = write_three_item_model(dir);
  fs::path data = dir.file("data.csv");
  CliResult result = run_cli(dir, "simulate --model " + model.string() +
                                      " --samples 40 --seed 9 --with-times --out " +
                                      data.string());
  ASSERT_EQ(result.code, 0) << result.output;
  ASSERT_TRUE(fs::exists(data));

  hazard::Dataset loaded = hazard::load_dataset(data.string());
  EXPECT_EQ(loaded.samples.size(), 40u);
  EXPECT_EQ(loaded.times.size(), 40u);
  EXPECT_EQ(loaded.item_names, (std::vector<std::string>{"alpha", "beta", "gamma"}));

  fs::path manifest_path = dir.file("data.csv.manifest.json");
  ASSERT_TRUE(fs::exists(manifest_path));
  hazard::json manifest = hazard::json::parse(read_file(manifest_path));
  EXPECT_EQ(manifest.at("tool"), hazard::kToolName);
  EXPECT_EQ(manifest.at("command"), "simulate");
  EXPECT_EQ(manifest.at("seed").get<std::uint64_t>(), 9u);
  EXPECT_TRUE(manifest.contains("wall_time_seconds"));
}

TEST(Cli, SimulateStdoutFallback) {
  TempDir dir;
  fs::path model = write_pair_model(dir);
  CliResult result = run_cli(dir, "simulate --model " + model.string() +
                                      " --samples 5 --seed 3");
  ASSERT_EQ(result.code, 0) << result.output;
  hazard::json doc = hazard::json::parse(result.output);
  EXPECT_EQ(doc.at("samples").size(), 5u);
}

TEST(Cli, OutputsAreByteIdenticalAcrossThreadCountsAndReruns) {
  TempDir dir;
  fs::path model = write_three_item_model(dir);

  auto simulate = [&](const std::string& name, int threads, int seed) {
    fs::path out = dir.file(name);
    CliResult r = run_cli(dir, "simulate --model " + model.string() +
                                   " --samples 200 --with-times --seed " +
                                   std::to_string(seed) + " --threads " +
                                   std::to_string(threads) + " --out " + out.string());
    EXPECT_EQ(r.code, 0) << r.output;
    return read_file(out);
  };
  std::string one_thread = simulate("a.csv", 1, 11);
  std::string four_threads = simulate("b.csv", 4, 11);
  std::string rerun = simulate("c.csv", 4, 11);
  std::string other_seed = simulate("d.csv", 1, 12);
  EXPECT_EQ(one_thread, four_threads);
  EXPECT_EQ(four_threads, rerun);
  EXPECT_NE(one_thread, other_seed);

  auto fit = [&](const std::string& data_name, const std::string& out_name, int threads) {
    fs::path out = dir.file(out_name);
    CliResult r = run_cli(dir, "fit --data " + dir.file(data_name).string() +
                                   " --epochs 3 --pretrain-epochs 2 --mcmc-samples 8"
                                   " --burn-in 2 --seed 21 --threads " +
                                   std::to_string(threads) + " --out " + out.string());
    EXPECT_EQ(r.code, 0) << r.output;
    return read_file(out);
  };
  std::string fit_one = fit("a.csv", "fit1.json", 1);
  std::string fit_four = fit("a.csv", "fit4.json", 4);
  EXPECT_EQ(fit_one, fit_four);
}

TEST(Cli, FitWritesModelAndReport) {
  TempDir dir;
  fs::path model = write_pair_model(dir);
  fs::path data = dir.file("data.json");
  ASSERT_EQ(run_cli(dir, "simulate --model " + model.string() +
                             " --samples 60 --seed 2 --out " + data.string())
                .code,
            0);

  fs::path fit_out = dir.file("fit.json");
  fs::path report_out = dir.file("report.json");
  CliResult result = run_cli(dir, "fit --data " + data.string() +
                                      " --epochs 4 --pretrain-epochs 3 --mcmc-samples 8"
                                      " --burn-in 2 --seed 5 --out " +
                                      fit_out.string() + " --report " + report_out.string());
  ASSERT_EQ(result.code, 0) << result.output;

  hazard::ParamMatrix fitted = hazard::load_model(fit_out.string());
  EXPECT_EQ(fitted.n, 2);

  hazard::json report = hazard::json::parse(read_file(report_out));
  EXPECT_TRUE(report.contains("model"));
  EXPECT_TRUE(report.contains("config"));
  ASSERT_TRUE(report.contains("objective_trace"));
  EXPECT_EQ(report.at("objective_trace").size(), 4u);
  EXPECT_FALSE(report.contains("wall_time"));
}

TEST(Cli, BoundsReportMatchesClosedForms) {
  TempDir dir;
  fs::path out = dir.file("bounds.json");
  ASSERT_EQ(run_cli(dir, "eval bounds --theta-plus 0 --t-star 1 --out " + out.string()).code,
            0);
  hazard::json doc = hazard::json::parse(read_file(out));
  EXPECT_NEAR(doc.at("c1").get<double>(), 2.718281828459045235, 1e-12);
  EXPECT_NEAR(doc.at("c2").get<double>(), 4.436563656918090471, 1e-12);
  EXPECT_EQ(doc.at("w_plus").get<double>(), 1.0);
}

TEST(Cli, TimePosteriorSummaryMatchesClosedForm) {
  TempDir dir;
  fs::path out = dir.file("summary.json");
  ASSERT_EQ(run_cli(dir, "eval time-posterior --theta-plus 0 --m 10 --k 5 --out " +
                             out.string())
                .code,
            0);
  hazard::json doc = hazard::json::parse(read_file(out));
  EXPECT_NEAR(doc.at("mean").get<double>(), 0.736544011544011544, 1e-10);
  EXPECT_EQ(doc.at("alpha").get<double>(), 6.0);
  EXPECT_EQ(doc.at("beta").get<double>(), 6.0);
  EXPECT_GT(doc.at("variance").get<double>(), 0.0);
}

TEST(Cli, TimePosteriorDensityIsDeterministicCsv) {
  TempDir dir;
  fs::path model = write_pair_model(dir);
  auto density = [&](const std::string& name) {
    fs::path out = dir.file(name);
    CliResult r = run_cli(dir, "eval time-posterior --model " + model.string() +
                                   " --items 1 --out " + out.string());
    EXPECT_EQ(r.code, 0) << r.output;
    return read_file(out);
  };
  std::string first = density("d1.csv");
  std::string second = density("d2.csv");
  EXPECT_EQ(first, second);
  EXPECT_EQ(first.rfind("t,density\n", 0), 0u);
  EXPECT_GT(std::count(first.begin(), first.end(), '\n'), 1000);
}

TEST(Cli, FamilyAtUnitCoordinateRecoversReferenceModel) {
  TempDir dir;
  fs::path out = dir.file("family.json");
  ASSERT_EQ(run_cli(dir, "family --alpha 4 --s 1 --out " + out.string()).code, 0);
  hazard::ParamMatrix theta = hazard::load_model(out.string());
  ASSERT_EQ(theta.n, 2);
  EXPECT_NEAR(theta.at(0, 0), 0.0, 1e-9);
  EXPECT_NEAR(theta.at(0, 1), 4.0, 1e-9);
  EXPECT_NEAR(theta.at(1, 0), 0.0, 1e-9);
  EXPECT_NEAR(theta.at(1, 1), -4.0, 1e-9);
}

TEST(Cli, OrderProportionMatchesClosedForm) {
  TempDir dir;
  fs::path model = write_pair_model(dir);
  fs::path out = dir.file("order.json");
  ASSERT_EQ(run_cli(dir, "eval order --model " + model.string() +
                             " --pair 1,2 --draws 40000 --seed 2 --out " + out.string())
                .code,
            0);
  hazard::json doc = hazard::json::parse(read_file(out));
  EXPECT_TRUE(doc.at("defined").get<bool>());
  EXPECT_GT(doc.at("num_cooccurrences").get<long long>(), 1000);
  // P(first before second | both observed) = 1 / (1 + e^-4).
  EXPECT_NEAR(doc.at("prop_a_first").get<double>(), 0.982013790037908442, 4e-3);
  EXPECT_EQ(doc.at("item_a").get<int>(), 1);
  EXPECT_EQ(doc.at("item_b").get<int>(), 2);
}

TEST(Cli, KlReportForQuickRefit) {
  TempDir dir;
  fs::path truth = write_pair_model(dir);
  fs::path data = dir.file("data.json");
  ASSERT_EQ(run_cli(dir, "simulate --model " + truth.string() +
                             " --samples 300 --seed 7 --out " + data.string())
                .code,
            0);
  fs::path fitted = dir.file("fit.json");
  ASSERT_EQ(run_cli(dir, "fit --data " + data.string() +
                             " --epochs 8 --pretrain-epochs 6 --mcmc-samples 20"
                             " --burn-in 4 --seed 7 --out " + fitted.string())
                .code,
            0);
  fs::path out = dir.file("kl.json");
  CliResult result = run_cli(dir, "eval kl --fit " + fitted.string() + " --truth " +
                                      truth.string() + " --draws 30000 --seed 3 --out " +
                                      out.string());
  ASSERT_EQ(result.code, 0) << result.output;
  hazard::json doc = hazard::json::parse(read_file(out));
  double kl = doc.at("kl").get<double>();
  EXPECT_TRUE(std::isfinite(kl));
  EXPECT_GT(kl, -0.05);
  EXPECT_LT(kl, 5.0);
  EXPECT_EQ(doc.at("restricted_items"), hazard::json::array({1, 2}));
}

TEST(Cli, StabilityReportSmoke) {
  TempDir dir;
  fs::path truth = write_pair_model(dir);
  fs::path data = dir.file("data.json");
  ASSERT_EQ(run_cli(dir, "simulate --model " + truth.string() +
                             " --samples 100 --seed 4 --out " + data.string())
                .code,
            0);
  fs::path out = dir.file("stability.json");
  CliResult result = run_cli(dir, "eval stability --data " + data.string() +
                                      " --num-inits 2 --draws 4000"
                                      " --epochs 3 --pretrain-epochs 2 --mcmc-samples 6"
                                      " --burn-in 1 --seed 4 --out " +
                                      out.string());
  ASSERT_EQ(result.code, 0) << result.output;
  hazard::json doc = hazard::json::parse(read_file(out));
  EXPECT_EQ(doc.at("num_inits").get<int>(), 2);
  ASSERT_EQ(doc.at("theta_range").size(), 2u);  // nested rows, one per item
  for (const auto& row : doc.at("theta_range")) {
    for (const auto& cell : row) {
      EXPECT_GE(cell.get<double>(), 0.0);
    }
  }
  EXPECT_EQ(doc.at("pair_spread").size(), 1u);
}

TEST(Cli, VarianceSweepCsvIsThreadIndependent) {
  TempDir dir;
  auto sweep = [&](const std::string& name, int threads) {
    fs::path out = dir.file(name);
    CliResult r = run_cli(dir, "eval variance-sweep --theta-plus 0 --m 5,10 --pairs 40"
                               " --seed 5 --threads " +
                                   std::to_string(threads) + " --out " + out.string());
    EXPECT_EQ(r.code, 0) << r.output;
    return read_file(out);
  };
  std::string one = sweep("s1.csv", 1);
  std::string three = sweep("s3.csv", 3);
  EXPECT_EQ(one, three);
  EXPECT_EQ(one.rfind("m,mean_variance,stderr_variance\n", 0), 0u);
  EXPECT_EQ(std::count(one.begin(), one.end(), '\n'), 3);
}

TEST(Cli, ReproQuickWritesAllTables) {
  TempDir dir;
  fs::path out_dir = dir.file("tables");
  CliResult result =
      run_cli(dir, "repro --quick --seed 6 --out " + out_dir.string());
  ASSERT_EQ(result.code, 0) << result.output;
  for (const char* name : {"two_item_recovery.csv", "proposal_comparison.csv",
                           "family_order.csv", "variance_sweep.csv", "block_variance.csv",
                           "repro.manifest.json"}) {
    EXPECT_TRUE(fs::exists(out_dir / name)) << name;
  }
  std::string two_item = read_file(out_dir / "two_item_recovery.csv");
  EXPECT_NE(two_item.find("baseline,"), std::string::npos);
}
