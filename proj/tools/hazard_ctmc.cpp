#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hazard/hazard.hpp"

// Command line front end. Subcommands: simulate, fit, eval (kl, order,
// stability, time-posterior, variance-sweep, bounds), family, repro.
// Exit codes: 0 success, 2 usage, 3 bad data or file, 4 numerical failure.
// Every file written via --out gets a <path>.manifest.json sidecar; outputs
// are byte-identical for identical flags and seed regardless of --threads.

namespace {

using hazard::json;

std::vector<int> parse_index_list(const std::string& text, int n, const std::string& what) {
  std::vector<int> out;
  std::istringstream stream(text);
  std::string field;
  while (std::getline(stream, field, ',')) {
    try {
      std::size_t consumed = 0;
      int value = std::stoi(field, &consumed);
      if (consumed != field.size()) throw std::invalid_argument{field};
      if (value < 1 || value > n) {
        throw hazard::DataError{what + ": index " + std::to_string(value) +
                                " out of range 1.." + std::to_string(n)};
      }
      out.push_back(value - 1);
    } catch (const hazard::DataError&) {
      throw;
    } catch (const std::exception&) {
      throw hazard::DataError{what + ": \"" + field + "\" is not an index"};
    }
  }
  if (out.empty()) throw hazard::DataError{what + ": empty list"};
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const std::string& what) {
  std::vector<int> out;
  std::istringstream stream(text);
  std::string field;
  while (std::getline(stream, field, ',')) {
    try {
      std::size_t consumed = 0;
      int value = std::stoi(field, &consumed);
      if (consumed != field.size()) throw std::invalid_argument{field};
      out.push_back(value);
    } catch (const std::exception&) {
      throw hazard::DataError{what + ": \"" + field + "\" is not an integer"};
    }
  }
  if (out.empty()) throw hazard::DataError{what + ": empty list"};
  return out;
}

// Emits to --out (with manifest sidecar) or stdout when --out is empty.
void deliver(const std::string& out_path, const std::string& content,
             hazard::RunManifest manifest,
             std::chrono::steady_clock::time_point started) {
  if (out_path.empty()) {
    std::cout << content;
    return;
  }
  hazard::detail::write_text_file(out_path, content);
  manifest.outputs.push_back(out_path);
  manifest.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  hazard::write_manifest(out_path, manifest);
}

hazard::RunManifest base_manifest(const std::string& command, int argc, char** argv,
                                  std::uint64_t seed) {
  hazard::RunManifest manifest;
  manifest.command = command;
  for (int i = 0; i < argc; ++i) manifest.argv.emplace_back(argv[i]);
  manifest.seed = seed;
  return manifest;
}

struct FitFlags {
  std::string mode = "marginal";
  std::string proposal = "guided";
  hazard::FitConfig config;
  bool exact_gradients = false;
  bool no_trace = false;
  bool progress = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--epochs", config.epochs, "Training epochs after pretraining");
    cmd->add_option("--pretrain-epochs", config.diag_pretrain_epochs,
                    "Diagonal-only pretraining epochs");
    cmd->add_option("--lambda", config.reg_weight, "Off-diagonal L1 weight");
    cmd->add_option("--step", config.step_size, "AdaGrad step size");
    cmd->add_option("--mcmc-samples", config.mcmc.num_samples,
                    "Chain samples per gradient estimate");
    cmd->add_option("--burn-in", config.mcmc.burn_in, "Chain burn-in steps");
    cmd->add_option("--proposal", proposal, "Chain proposal: guided or uniform");
    cmd->add_option("--mode", mode, "marginal, given-times, or diagonal-only");
    cmd->add_option("--enum-cap", config.enum_cap, "Max permutations enumerated exactly");
    cmd->add_option("--seed", config.seed, "Random seed");
    cmd->add_option("--threads", config.threads, "Worker threads (0 = automatic)");
    cmd->add_flag("--exact-gradients", exact_gradients,
                  "Enumerate gradients exactly instead of sampling");
    cmd->add_flag("--no-trace", no_trace, "Skip the per-epoch objective trace");
    cmd->add_flag("--progress", progress, "Report epochs on stderr");
  }

  hazard::FitConfig resolve() const {
    hazard::FitConfig out = config;
    out.mode = hazard::fit_mode_from_name(mode);
    out.mcmc.proposal = hazard::proposal_from_name(proposal);
    out.use_exact_gradients = exact_gradients;
    out.trace_objective = !no_trace;
    out.progress = progress;
    return out;
  }
};

int run(int argc, char** argv) {
  auto started = std::chrono::steady_clock::now();
  CLI::App app{"Cumulative continuous-time Markov chain models over item sets"};
  app.set_version_flag("--version",
                       std::string(hazard::kToolName) + " " + std::string(hazard::kVersion));
  app.require_subcommand(1);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Sample a dataset from a model");
  std::string sim_model;
  int sim_samples = 0;
  std::uint64_t sim_seed = 0;
  bool sim_with_times = false;
  int sim_threads = 0;
  std::string sim_out;
  simulate->add_option("--model", sim_model, "Model JSON")->required();
  simulate->add_option("--samples", sim_samples, "Number of samples")->required();
  simulate->add_option("--seed", sim_seed, "Random seed");
  simulate->add_flag("--with-times", sim_with_times, "Record observation times");
  simulate->add_option("--threads", sim_threads, "Worker threads (0 = automatic)");
  simulate->add_option("--out", sim_out, "Output dataset (.json or .csv; default stdout)");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "Learn a model from a dataset");
  std::string fit_data;
  std::string fit_out;
  std::string fit_report_path;
  FitFlags fit_flags;
  fit_cmd->add_option("--data", fit_data, "Dataset (.json or .csv)")->required();
  fit_cmd->add_option("--out", fit_out, "Output model JSON (default stdout)");
  fit_cmd->add_option("--report", fit_report_path, "Also write the full fit report JSON");
  fit_flags.attach(fit_cmd);

  // eval
  auto* eval = app.add_subcommand("eval", "Analyze fitted models");
  eval->require_subcommand(1);

  auto* eval_kl = eval->add_subcommand("kl", "KL divergence of a fit from a true model");
  std::string kl_fit, kl_truth, kl_restrict, kl_out;
  long long kl_draws = 1000000;
  std::uint64_t kl_seed = 0;
  int kl_threads = 0;
  eval_kl->add_option("--fit", kl_fit, "Fitted model JSON")->required();
  eval_kl->add_option("--truth", kl_truth, "True model JSON")->required();
  eval_kl->add_option("--restrict", kl_restrict,
                      "Fitted-model items to keep, 1-based (default: first items)");
  eval_kl->add_option("--draws", kl_draws, "Monte Carlo draws");
  eval_kl->add_option("--seed", kl_seed, "Random seed");
  eval_kl->add_option("--threads", kl_threads, "Worker threads");
  eval_kl->add_option("--out", kl_out, "Output report JSON (default stdout)");

  auto* eval_order = eval->add_subcommand("order", "Pairwise order proportion");
  std::string order_model, order_pair, order_out;
  long long order_draws = 1000000;
  std::uint64_t order_seed = 0;
  int order_threads = 0;
  eval_order->add_option("--model", order_model, "Model JSON")->required();
  eval_order->add_option("--pair", order_pair, "Two 1-based items, e.g. 1,2")->required();
  eval_order->add_option("--draws", order_draws, "Monte Carlo draws");
  eval_order->add_option("--seed", order_seed, "Random seed");
  eval_order->add_option("--threads", order_threads, "Worker threads");
  eval_order->add_option("--out", order_out, "Output report JSON (default stdout)");

  auto* eval_stab = eval->add_subcommand("stability", "Refit under several seeds");
  std::string stab_data, stab_out;
  int stab_inits = 5;
  long long stab_draws = 100000;
  FitFlags stab_flags;
  eval_stab->add_option("--data", stab_data, "Dataset (.json or .csv)")->required();
  eval_stab->add_option("--num-inits", stab_inits, "Number of fits");
  eval_stab->add_option("--draws", stab_draws, "Order-proportion draws per fit");
  eval_stab->add_option("--out", stab_out, "Output report JSON (default stdout)");
  stab_flags.attach(eval_stab);

  auto* eval_time = eval->add_subcommand(
      "time-posterior", "Observation-time posterior given occurrence counts");
  double tp_theta_plus = 0.0;
  bool tp_theta_plus_set = false;
  int tp_m = 0, tp_k = 0;
  std::string tp_model, tp_items, tp_out;
  int tp_enum_cap = hazard::kDefaultEnumCap;
  auto* tp_theta_opt = eval_time->add_option("--theta-plus", tp_theta_plus,
                                             "Shared log rate of independent items");
  eval_time->add_option("--m", tp_m, "Number of independent items");
  eval_time->add_option("--k", tp_k, "Number observed present");
  eval_time->add_option("--model", tp_model, "Block-diagonal model JSON for a gridded density");
  eval_time->add_option("--items", tp_items, "Observed items, 1-based, for the gridded density");
  eval_time->add_option("--enum-cap", tp_enum_cap, "Max permutations enumerated per block");
  eval_time->add_option("--out", tp_out, "Output (.json summary or .csv density; default stdout)");

  auto* eval_sweep = eval->add_subcommand(
      "variance-sweep", "Posterior variance versus number of independent items");
  double sweep_theta_plus = 0.0;
  std::string sweep_m = "5,10,20,50,100";
  long long sweep_pairs = 1000;
  std::uint64_t sweep_seed = 0;
  int sweep_threads = 0;
  std::string sweep_out;
  eval_sweep->add_option("--theta-plus", sweep_theta_plus, "Shared log rate")->required();
  eval_sweep->add_option("--m", sweep_m, "Comma-separated item counts");
  eval_sweep->add_option("--pairs", sweep_pairs, "Sampled (time, outcome) pairs per count");
  eval_sweep->add_option("--seed", sweep_seed, "Random seed");
  eval_sweep->add_option("--threads", sweep_threads, "Worker threads");
  eval_sweep->add_option("--out", sweep_out, "Output CSV (default stdout)");

  auto* eval_bounds = eval->add_subcommand("bounds", "Constants in the posterior error bounds");
  double bounds_theta_plus = 0.0, bounds_t_star = 1.0;
  std::string bounds_out;
  eval_bounds->add_option("--theta-plus", bounds_theta_plus, "Shared log rate")->required();
  eval_bounds->add_option("--t-star", bounds_t_star, "Observation time");
  eval_bounds->add_option("--out", bounds_out, "Output JSON (default stdout)");

  // family
  auto* family = app.add_subcommand(
      "family", "Two-item model with the same marginal set distribution as the reference");
  double family_alpha = 4.0, family_s = 0.0;
  std::string family_out;
  family->add_option("--alpha", family_alpha, "Reference model stiffness");
  family->add_option("--s", family_s, "Family coordinate")->required();
  family->add_option("--out", family_out, "Output model JSON (default stdout)");

  // repro
  auto* repro = app.add_subcommand("repro", "Regenerate the synthetic study tables");
  std::string repro_out;
  std::uint64_t repro_seed = 0;
  int repro_threads = 0;
  bool repro_quick = false;
  repro->add_option("--out", repro_out, "Output directory")->required();
  repro->add_option("--seed", repro_seed, "Random seed");
  repro->add_option("--threads", repro_threads, "Worker threads");
  repro->add_flag("--quick", repro_quick, "Smaller replicate counts for a fast pass");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (simulate->parsed()) {
    hazard::ParamMatrix theta = hazard::load_model(sim_model);
    hazard::RngState rng(sim_seed);
    hazard::Dataset data =
        hazard::generate_dataset(theta, sim_samples, sim_with_times, rng, sim_threads);
    hazard::RunManifest manifest = base_manifest("simulate", argc, argv, sim_seed);
    manifest.inputs.push_back(sim_model);
    manifest.config["samples"] = sim_samples;
    manifest.config["with_times"] = sim_with_times;
    std::string content = hazard::detail::ends_with(sim_out, ".csv")
                              ? hazard::dataset_to_csv(data)
                              : hazard::dataset_to_json(data).dump(2) + "\n";
    deliver(sim_out, content, std::move(manifest), started);
    return 0;
  }

  if (fit_cmd->parsed()) {
    hazard::Dataset data = hazard::load_dataset(fit_data);
    hazard::FitConfig config = fit_flags.resolve();
    hazard::FitReport report = hazard::fit(data, config);
    hazard::RunManifest manifest = base_manifest("fit", argc, argv, config.seed);
    manifest.inputs.push_back(fit_data);
    manifest.config = hazard::fit_config_to_json(config);
    if (!fit_report_path.empty()) {
      hazard::detail::write_text_file(fit_report_path,
                                      hazard::fit_report_to_json(report).dump(2) + "\n");
      manifest.outputs.push_back(fit_report_path);
    }
    deliver(fit_out, hazard::model_to_json(report.theta_hat).dump(2) + "\n", std::move(manifest),
            started);
    return 0;
  }

  if (eval_kl->parsed()) {
    hazard::ParamMatrix theta_hat = hazard::load_model(kl_fit);
    hazard::ParamMatrix theta_true = hazard::load_model(kl_truth);
    hazard::ItemSet restrict_items(theta_hat.n);
    if (kl_restrict.empty()) {
      for (int j = 0; j < theta_true.n && j < theta_hat.n; ++j) restrict_items.add(j);
    } else {
      for (int x : parse_index_list(kl_restrict, theta_hat.n, "--restrict")) {
        restrict_items.add(x);
      }
    }
    hazard::RngState rng(kl_seed);
    hazard::KlReport report =
        hazard::kl_recovery(theta_hat, theta_true, restrict_items, kl_draws, rng, kl_threads);
    hazard::RunManifest manifest = base_manifest("eval kl", argc, argv, kl_seed);
    manifest.inputs = {kl_fit, kl_truth};
    manifest.config["draws"] = kl_draws;
    deliver(kl_out, hazard::kl_report_to_json(report).dump(2) + "\n", std::move(manifest),
            started);
    return 0;
  }

  if (eval_order->parsed()) {
    hazard::ParamMatrix theta = hazard::load_model(order_model);
    std::vector<int> pair = parse_index_list(order_pair, theta.n, "--pair");
    if (pair.size() != 2) throw hazard::DataError{"--pair: expected exactly two items"};
    hazard::RngState rng(order_seed);
    hazard::OrderReport report =
        hazard::order_proportion(theta, pair[0], pair[1], order_draws, rng, order_threads);
    hazard::RunManifest manifest = base_manifest("eval order", argc, argv, order_seed);
    manifest.inputs.push_back(order_model);
    manifest.config["draws"] = order_draws;
    deliver(order_out, hazard::order_report_to_json(report).dump(2) + "\n", std::move(manifest),
            started);
    return 0;
  }

  if (eval_stab->parsed()) {
    hazard::Dataset data = hazard::load_dataset(stab_data);
    hazard::FitConfig config = stab_flags.resolve();
    hazard::RngState rng(hazard::RngState(config.seed).child(0xdefaced).next_u64());
    hazard::StabilityReport report =
        hazard::stability_report(data, config, stab_inits, rng, stab_draws);
    hazard::RunManifest manifest = base_manifest("eval stability", argc, argv, config.seed);
    manifest.inputs.push_back(stab_data);
    manifest.config = hazard::fit_config_to_json(config);
    manifest.config["num_inits"] = stab_inits;
    manifest.config["draws"] = stab_draws;
    deliver(stab_out, hazard::stability_report_to_json(report).dump(2) + "\n",
            std::move(manifest), started);
    return 0;
  }

  if (eval_time->parsed()) {
    hazard::RunManifest manifest = base_manifest("eval time-posterior", argc, argv, 0);
    tp_theta_plus_set = tp_theta_opt->count() > 0;
    if (tp_theta_plus_set) {
      hazard::PosteriorSummary summary =
          hazard::iid_posterior_summary(tp_theta_plus, tp_m, tp_k);
      manifest.config["theta_plus"] = tp_theta_plus;
      manifest.config["m"] = tp_m;
      manifest.config["k"] = tp_k;
      deliver(tp_out, hazard::posterior_summary_to_json(summary).dump(2) + "\n",
              std::move(manifest), started);
      return 0;
    }
    if (tp_model.empty() || tp_items.empty()) {
      throw hazard::DataError{
          "time-posterior needs either --theta-plus with --m/--k or --model with --items"};
    }
    hazard::ParamMatrix theta = hazard::load_model(tp_model);
    hazard::ItemSet observed(theta.n);
    for (int x : parse_index_list(tp_items, theta.n, "--items")) observed.add(x);
    std::vector<std::pair<double, double>> density = hazard::block_posterior_density(
        theta, observed, hazard::make_time_grid(), tp_enum_cap);
    manifest.inputs.push_back(tp_model);
    deliver(tp_out, hazard::density_to_csv(density), std::move(manifest), started);
    return 0;
  }

  if (eval_sweep->parsed()) {
    std::vector<int> m_values = parse_int_list(sweep_m, "--m");
    hazard::RngState rng(sweep_seed);
    std::vector<hazard::VarianceSweepRow> rows = hazard::posterior_variance_sweep(
        sweep_theta_plus, m_values, sweep_pairs, rng, sweep_threads);
    std::vector<std::pair<double, double>> points;
    for (const auto& row : rows) {
      points.emplace_back(static_cast<double>(row.m), row.mean_variance);
    }
    std::cerr << "log-log slope: " << hazard::log_log_slope(points) << "\n";
    hazard::RunManifest manifest = base_manifest("eval variance-sweep", argc, argv, sweep_seed);
    manifest.config["theta_plus"] = sweep_theta_plus;
    manifest.config["pairs"] = sweep_pairs;
    deliver(sweep_out, hazard::variance_sweep_to_csv(rows), std::move(manifest), started);
    return 0;
  }

  if (eval_bounds->parsed()) {
    hazard::BoundConstants bounds = hazard::bound_constants(bounds_theta_plus, bounds_t_star);
    hazard::RunManifest manifest = base_manifest("eval bounds", argc, argv, 0);
    manifest.config["theta_plus"] = bounds_theta_plus;
    manifest.config["t_star"] = bounds_t_star;
    deliver(bounds_out, hazard::bound_constants_to_json(bounds).dump(2) + "\n",
            std::move(manifest), started);
    return 0;
  }

  if (family->parsed()) {
    hazard::ParamMatrix theta = hazard::prop1_family(family_alpha, family_s);
    hazard::RunManifest manifest = base_manifest("family", argc, argv, 0);
    manifest.config["alpha"] = family_alpha;
    manifest.config["s"] = family_s;
    deliver(family_out, hazard::model_to_json(theta).dump(2) + "\n", std::move(manifest),
            started);
    return 0;
  }

  if (repro->parsed()) {
    namespace fs = std::filesystem;
    fs::create_directories(repro_out);
    hazard::RunManifest manifest = base_manifest("repro", argc, argv, repro_seed);
    manifest.config["quick"] = repro_quick;
    auto emit = [&](const std::string& name, const std::string& content) {
      std::string path = (fs::path(repro_out) / name).string();
      hazard::detail::write_text_file(path, content);
      manifest.outputs.push_back(path);
      std::cerr << "wrote " << path << "\n";
    };

    {
      hazard::TwoItemExperimentConfig config;
      config.seed = repro_seed;
      config.fit.threads = repro_threads;
      config.replicates = repro_quick ? 2 : 8;
      config.kl_draws = repro_quick ? 50000 : 1000000;
      if (repro_quick) {
        config.fit.epochs = 5;
        config.fit.diag_pretrain_epochs = 5;
      }
      hazard::TwoItemExperimentResult result = hazard::two_item_recovery_experiment(config);
      std::string csv = hazard::kl_sweep_to_csv(result);
      csv += "baseline," + hazard::detail::format_double(result.baseline_kl_mean) + "," +
             hazard::detail::format_double(result.baseline_kl_stderr) + "\n";
      emit("two_item_recovery.csv", csv);
    }
    {
      hazard::ProposalComparisonConfig config;
      config.seed = repro_seed;
      config.replicates = repro_quick ? 3 : 20;
      emit("proposal_comparison.csv",
           hazard::proposal_comparison_to_csv(hazard::proposal_comparison_experiment(config)));
    }
    {
      hazard::RngState rng(repro_seed);
      hazard::RngState stream = rng.child(11);
      emit("family_order.csv",
           hazard::family_order_to_csv(hazard::family_order_sweep(
               4.0, repro_quick ? 5 : 15, repro_quick ? 20000 : 100000, stream, repro_threads)));
    }
    {
      std::ostringstream csv;
      csv << "theta_plus,m,mean_variance,stderr_variance,slope\n";
      for (double theta_plus : {-3.0, -2.0, -1.0}) {
        hazard::RngState rng(repro_seed);
        hazard::RngState stream = rng.child(12, static_cast<std::uint64_t>(-theta_plus));
        std::vector<hazard::VarianceSweepRow> rows = hazard::posterior_variance_sweep(
            theta_plus, {5, 10, 20, 50, 100}, repro_quick ? 100 : 1000, stream, repro_threads);
        std::vector<std::pair<double, double>> points;
        for (const auto& row : rows) {
          points.emplace_back(static_cast<double>(row.m), row.mean_variance);
        }
        double slope = hazard::log_log_slope(points);
        for (const auto& row : rows) {
          csv << hazard::detail::format_double(theta_plus) << ',' << row.m << ','
              << hazard::detail::format_double(row.mean_variance) << ','
              << hazard::detail::format_double(row.stderr_variance) << ','
              << hazard::detail::format_double(slope) << '\n';
        }
      }
      emit("variance_sweep.csv", csv.str());
    }
    {
      std::ostringstream csv;
      csv << "gamma,m,mean_variance,stderr_variance\n";
      std::vector<double> grid = hazard::make_time_grid();
      for (double gamma : {0.0, 1.0, 2.0}) {
        for (int m : {4, 8, 16}) {
          hazard::RngState rng(repro_seed);
          hazard::RngState stream =
              rng.child(13, static_cast<std::uint64_t>(gamma * 2),
                        static_cast<std::uint64_t>(m));
          hazard::BlockVarianceResult result = hazard::block_variance_experiment(
              gamma, 0.3, m, repro_quick ? 12 : 200, stream, grid, repro_threads);
          csv << hazard::detail::format_double(gamma) << ',' << m << ','
              << hazard::detail::format_double(result.mean_variance) << ','
              << hazard::detail::format_double(result.stderr_variance) << '\n';
        }
      }
      emit("block_variance.csv", csv.str());
    }
    manifest.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    hazard::write_manifest((fs::path(repro_out) / "repro").string(), manifest);
    return 0;
  }

  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const hazard::DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const hazard::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
