#pragma once

#include <cctype>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hazard/analysis.hpp"
#include "hazard/errors.hpp"
#include "hazard/experiments.hpp"
#include "hazard/model.hpp"
#include "hazard/time_posterior.hpp"
#include "hazard/trainer.hpp"
#include "hazard/version.hpp"

// Serialization: models and datasets as JSON (datasets also as CSV), report
// objects as JSON, plot-ready CSV tables, and run manifests. All indices in
// files are 1-based; in-memory indices are 0-based throughout.

namespace hazard {

using json = nlohmann::ordered_json;

namespace detail {

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError{"cannot open " + path};
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (!in.good() && !in.eof()) throw DataError{"cannot read " + path};
  return buffer.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError{"cannot open " + path + " for writing"};
  out << content;
  if (!out.good()) throw DataError{"cannot write " + path};
}

inline json parse_json(const std::string& text, const std::string& what) {
  json parsed = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) throw DataError{what + ": invalid JSON"};
  return parsed;
}

// Shortest representation that round-trips to the same double.
inline std::string format_double(double x) { return json(x).dump(); }

inline bool ends_with(std::string_view text, std::string_view suffix) {
  return text.size() >= suffix.size() && text.substr(text.size() - suffix.size()) == suffix;
}

inline std::string trim(const std::string& text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return text.substr(begin, end - begin);
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream stream(line);
  while (std::getline(stream, field, ',')) fields.push_back(trim(field));
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

}  // namespace detail

// --- Models ---

inline json model_to_json(const ParamMatrix& theta) {
  json out;
  out["n"] = theta.n;
  if (!theta.item_names.empty()) out["item_names"] = theta.item_names;
  json rows = json::array();
  for (int i = 0; i < theta.n; ++i) {
    json row = json::array();
    for (int j = 0; j < theta.n; ++j) row.push_back(theta.at(i, j));
    rows.push_back(std::move(row));
  }
  out["theta"] = std::move(rows);
  if (!theta.blocks.empty()) {
    json blocks = json::array();
    for (const auto& [first, last] : theta.blocks) {
      blocks.push_back(json::array({first + 1, last + 1}));
    }
    out["blocks"] = std::move(blocks);
  }
  return out;
}

inline ParamMatrix model_from_json(const json& in) {
  if (!in.is_object() || !in.contains("n") || !in.contains("theta")) {
    throw DataError{"model: expected an object with \"n\" and \"theta\""};
  }
  if (!in["n"].is_number_integer()) throw DataError{"model: \"n\" must be an integer"};
  int n = in["n"].get<int>();
  if (n < 1 || n > kMaxItems) throw DataError{"model: n out of range"};
  ParamMatrix theta = ParamMatrix::zeros(n);
  const json& rows = in["theta"];
  if (!rows.is_array() || static_cast<int>(rows.size()) != n) {
    throw DataError{"model: \"theta\" must have n rows"};
  }
  for (int i = 0; i < n; ++i) {
    const json& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<int>(row.size()) != n) {
      throw DataError{"model: row " + std::to_string(i + 1) + " must have n entries"};
    }
    for (int j = 0; j < n; ++j) {
      const json& cell = row[static_cast<std::size_t>(j)];
      if (!cell.is_number()) throw DataError{"model: parameters must be numbers"};
      theta.at(i, j) = cell.get<double>();
    }
  }
  if (in.contains("item_names")) {
    const json& names = in["item_names"];
    if (!names.is_array() || static_cast<int>(names.size()) != n) {
      throw DataError{"model: \"item_names\" must list n names"};
    }
    for (const json& name : names) {
      if (!name.is_string()) throw DataError{"model: item names must be strings"};
      theta.item_names.push_back(name.get<std::string>());
    }
  }
  if (in.contains("blocks")) {
    const json& blocks = in["blocks"];
    if (!blocks.is_array()) throw DataError{"model: \"blocks\" must be an array"};
    for (const json& block : blocks) {
      if (!block.is_array() || block.size() != 2 || !block[0].is_number_integer() ||
          !block[1].is_number_integer()) {
        throw DataError{"model: each block must be a pair of 1-based item indices"};
      }
      int first = block[0].get<int>() - 1;
      int last = block[1].get<int>() - 1;
      if (first < 0 || last < first || last >= n) throw DataError{"model: block out of range"};
      theta.blocks.emplace_back(first, last);
    }
  }
  validate_finite(theta);
  return theta;
}

inline void save_model(const std::string& path, const ParamMatrix& theta) {
  detail::write_text_file(path, model_to_json(theta).dump(2) + "\n");
}

inline ParamMatrix load_model(const std::string& path) {
  return model_from_json(detail::parse_json(detail::read_text_file(path), path));
}

// --- Datasets ---

inline json dataset_to_json(const Dataset& data) {
  json out;
  out["n"] = data.n;
  if (!data.item_names.empty()) out["item_names"] = data.item_names;
  json samples = json::array();
  for (const ItemSet& s : data.samples) {
    json sample = json::array();
    for (int x : s.items()) sample.push_back(x + 1);
    samples.push_back(std::move(sample));
  }
  out["samples"] = std::move(samples);
  if (data.has_times()) out["times"] = data.times;
  return out;
}

inline Dataset dataset_from_json(const json& in) {
  if (!in.is_object() || !in.contains("n") || !in.contains("samples")) {
    throw DataError{"dataset: expected an object with \"n\" and \"samples\""};
  }
  if (!in["n"].is_number_integer()) throw DataError{"dataset: \"n\" must be an integer"};
  Dataset data;
  data.n = in["n"].get<int>();
  if (data.n < 1 || data.n > kMaxItems) throw DataError{"dataset: n out of range"};
  const json& samples = in["samples"];
  if (!samples.is_array()) throw DataError{"dataset: \"samples\" must be an array"};
  for (const json& sample : samples) {
    if (!sample.is_array()) throw DataError{"dataset: each sample must list item indices"};
    ItemSet s(data.n);
    for (const json& item : sample) {
      if (!item.is_number_integer()) throw DataError{"dataset: item indices must be integers"};
      int x = item.get<int>() - 1;
      if (x < 0 || x >= data.n) {
        throw DataError{"dataset: item index " + std::to_string(x + 1) + " out of range"};
      }
      if (s.contains(x)) throw DataError{"dataset: duplicate item in a sample"};
      s.add(x);
    }
    data.samples.push_back(s);
  }
  if (in.contains("times")) {
    const json& times = in["times"];
    if (!times.is_array() || times.size() != samples.size()) {
      throw DataError{"dataset: \"times\" must match the number of samples"};
    }
    for (const json& t : times) {
      if (!t.is_number()) throw DataError{"dataset: times must be numbers"};
      data.times.push_back(t.get<double>());
    }
  }
  if (in.contains("item_names")) {
    const json& names = in["item_names"];
    if (!names.is_array() || static_cast<int>(names.size()) != data.n) {
      throw DataError{"dataset: \"item_names\" must list n names"};
    }
    for (const json& name : names) {
      if (!name.is_string()) throw DataError{"dataset: item names must be strings"};
      data.item_names.push_back(name.get<std::string>());
    }
  }
  validate_dataset(data);
  return data;
}

inline std::string dataset_to_csv(const Dataset& data) {
  std::ostringstream out;
  for (int j = 0; j < data.n; ++j) {
    if (j > 0) out << ',';
    if (static_cast<int>(data.item_names.size()) == data.n) {
      out << data.item_names[static_cast<std::size_t>(j)];
    } else {
      out << "item_" << (j + 1);
    }
  }
  if (data.has_times()) out << ",time";
  out << '\n';
  for (std::size_t d = 0; d < data.samples.size(); ++d) {
    for (int j = 0; j < data.n; ++j) {
      if (j > 0) out << ',';
      out << (data.samples[d].contains(j) ? '1' : '0');
    }
    if (data.has_times()) out << ',' << detail::format_double(data.times[d]);
    out << '\n';
  }
  return out.str();
}

inline Dataset dataset_from_csv(const std::string& text) {
  std::istringstream stream(text);
  std::string line;
  if (!std::getline(stream, line)) throw DataError{"dataset: empty CSV"};
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> header = detail::split_csv_line(line);
  if (header.empty()) throw DataError{"dataset: empty CSV header"};
  bool has_time = header.back() == "time";
  int n = static_cast<int>(header.size()) - (has_time ? 1 : 0);
  if (n < 1 || n > kMaxItems) throw DataError{"dataset: item count out of range"};
  Dataset data;
  data.n = n;
  bool default_names = true;
  for (int j = 0; j < n; ++j) {
    if (header[static_cast<std::size_t>(j)] != "item_" + std::to_string(j + 1)) {
      default_names = false;
    }
  }
  if (!default_names) {
    data.item_names.assign(header.begin(), header.begin() + n);
  }
  int line_number = 1;
  while (std::getline(stream, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError{"dataset: line " + std::to_string(line_number) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size())};
    }
    ItemSet s(n);
    for (int j = 0; j < n; ++j) {
      const std::string& field = fields[static_cast<std::size_t>(j)];
      if (field == "1") {
        s.add(j);
      } else if (field != "0") {
        throw DataError{"dataset: line " + std::to_string(line_number) +
                        ": item columns must be 0 or 1"};
      }
    }
    data.samples.push_back(s);
    if (has_time) {
      const std::string& field = fields.back();
      std::size_t consumed = 0;
      double t = 0.0;
      try {
        t = std::stod(field, &consumed);
      } catch (const std::exception&) {
        throw DataError{"dataset: line " + std::to_string(line_number) + ": bad time value"};
      }
      if (consumed != field.size()) {
        throw DataError{"dataset: line " + std::to_string(line_number) + ": bad time value"};
      }
      data.times.push_back(t);
    }
  }
  validate_dataset(data);
  return data;
}

inline void save_dataset(const std::string& path, const Dataset& data) {
  if (detail::ends_with(path, ".csv")) {
    detail::write_text_file(path, dataset_to_csv(data));
  } else {
    detail::write_text_file(path, dataset_to_json(data).dump(2) + "\n");
  }
}

inline Dataset load_dataset(const std::string& path) {
  std::string text = detail::read_text_file(path);
  if (detail::ends_with(path, ".csv")) return dataset_from_csv(text);
  return dataset_from_json(detail::parse_json(text, path));
}

// --- Config and report objects ---

inline std::string_view fit_mode_name(FitMode mode) {
  switch (mode) {
    case FitMode::marginal: return "marginal";
    case FitMode::given_times: return "given-times";
    case FitMode::diagonal_only: return "diagonal-only";
  }
  return "marginal";
}

inline FitMode fit_mode_from_name(std::string_view name) {
  if (name == "marginal") return FitMode::marginal;
  if (name == "given-times") return FitMode::given_times;
  if (name == "diagonal-only") return FitMode::diagonal_only;
  throw DataError{"unknown mode \"" + std::string(name) +
                  "\" (expected marginal, given-times, or diagonal-only)"};
}

inline std::string_view proposal_name(Proposal proposal) {
  return proposal == Proposal::guided ? "guided" : "uniform";
}

inline Proposal proposal_from_name(std::string_view name) {
  if (name == "guided") return Proposal::guided;
  if (name == "uniform") return Proposal::uniform;
  throw DataError{"unknown proposal \"" + std::string(name) +
                  "\" (expected guided or uniform)"};
}

inline json fit_config_to_json(const FitConfig& config) {
  json out;
  out["step_size"] = config.step_size;
  out["reg_weight"] = config.reg_weight;
  out["epochs"] = config.epochs;
  out["diag_pretrain_epochs"] = config.diag_pretrain_epochs;
  out["init_offdiag_halfwidth"] = config.init_offdiag_halfwidth;
  out["mcmc_samples"] = config.mcmc.num_samples;
  out["burn_in"] = config.mcmc.burn_in;
  out["proposal"] = proposal_name(config.mcmc.proposal);
  out["seed"] = config.seed;
  out["mode"] = fit_mode_name(config.mode);
  out["adagrad_epsilon"] = config.adagrad_epsilon;
  out["enum_cap"] = config.enum_cap;
  out["threads"] = config.threads;
  out["use_exact_gradients"] = config.use_exact_gradients;
  out["trace_objective"] = config.trace_objective;
  out["trace_draws"] = config.trace_draws;
  return out;
}

// Omits wall time so rerunning identical flags yields identical bytes.
inline json fit_report_to_json(const FitReport& report) {
  json out;
  out["model"] = model_to_json(report.theta_hat);
  out["objective_trace"] = report.objective_trace;
  out["trace_kind"] = report.trace_kind;
  out["warnings"] = report.warnings;
  out["config"] = fit_config_to_json(report.config);
  return out;
}

inline json kl_report_to_json(const KlReport& report) {
  json out;
  out["kl"] = report.kl;
  out["stderr"] = report.stderr_kl;
  out["num_draws"] = report.num_draws;
  json restricted = json::array();
  for (int x : report.restricted_items.items()) restricted.push_back(x + 1);
  out["restricted_items"] = std::move(restricted);
  out["histogram_support"] = report.histogram_support;
  out["negative_flagged"] = report.negative_flagged;
  return out;
}

inline json order_report_to_json(const OrderReport& report) {
  json out;
  out["item_a"] = report.item_a + 1;
  out["item_b"] = report.item_b + 1;
  out["defined"] = report.defined;
  if (report.defined) {
    out["prop_a_first"] = report.prop_a_first;
  } else {
    out["prop_a_first"] = nullptr;
  }
  out["num_cooccurrences"] = report.num_cooccurrences;
  out["num_draws"] = report.num_draws;
  return out;
}

inline json stability_report_to_json(const StabilityReport& report) {
  json out;
  out["num_inits"] = report.num_inits;
  out["theta_min"] = model_to_json(report.theta_min)["theta"];
  out["theta_max"] = model_to_json(report.theta_max)["theta"];
  out["theta_range"] = model_to_json(report.theta_range)["theta"];
  json spreads = json::array();
  for (const PairSpread& spread : report.pair_spread) {
    json row;
    row["item_a"] = spread.item_a + 1;
    row["item_b"] = spread.item_b + 1;
    row["min_prop"] = spread.min_prop;
    row["max_prop"] = spread.max_prop;
    row["spread"] = spread.max_prop - spread.min_prop;
    spreads.push_back(std::move(row));
  }
  out["pair_spread"] = std::move(spreads);
  return out;
}

inline json posterior_summary_to_json(const PosteriorSummary& summary) {
  json out;
  out["mean"] = summary.mean;
  out["variance"] = summary.variance;
  out["alpha"] = summary.alpha;
  out["beta"] = summary.beta;
  out["w_plus"] = summary.w_plus;
  return out;
}

inline json bound_constants_to_json(const BoundConstants& bounds) {
  json out;
  out["c1"] = bounds.c1;
  out["c2"] = bounds.c2;
  out["w_plus"] = bounds.w_plus;
  out["t_star"] = bounds.t_star;
  return out;
}

// --- Plot-ready CSV tables ---

inline std::string kl_sweep_to_csv(const TwoItemExperimentResult& result) {
  std::ostringstream out;
  out << "m,kl_mean,kl_stderr\n";
  for (const KlSweepPoint& point : result.marginal) {
    out << point.num_extra << ',' << detail::format_double(point.kl_mean) << ','
        << detail::format_double(point.kl_stderr) << '\n';
  }
  return out.str();
}

inline std::string proposal_comparison_to_csv(const std::vector<ProposalErrorRow>& rows) {
  std::ostringstream out;
  out << "num_mcmc_samples,guided_mean_error,guided_stderr,uniform_mean_error,uniform_stderr\n";
  for (const ProposalErrorRow& row : rows) {
    out << row.num_mcmc_samples << ',' << detail::format_double(row.guided_mean_error) << ','
        << detail::format_double(row.guided_stderr) << ','
        << detail::format_double(row.uniform_mean_error) << ','
        << detail::format_double(row.uniform_stderr) << '\n';
  }
  return out.str();
}

inline std::string variance_sweep_to_csv(const std::vector<VarianceSweepRow>& rows) {
  std::ostringstream out;
  out << "m,mean_variance,stderr_variance\n";
  for (const VarianceSweepRow& row : rows) {
    out << row.m << ',' << detail::format_double(row.mean_variance) << ','
        << detail::format_double(row.stderr_variance) << '\n';
  }
  return out.str();
}

inline std::string density_to_csv(const std::vector<std::pair<double, double>>& density) {
  std::ostringstream out;
  out << "t,density\n";
  for (const auto& [t, value] : density) {
    out << detail::format_double(t) << ',' << detail::format_double(value) << '\n';
  }
  return out.str();
}

inline std::string family_order_to_csv(const std::vector<FamilyOrderRow>& rows) {
  std::ostringstream out;
  out << "s,prop_first,stderr\n";
  for (const FamilyOrderRow& row : rows) {
    out << detail::format_double(row.s) << ',' << detail::format_double(row.prop_first_item)
        << ',' << detail::format_double(row.stderr_prop) << '\n';
  }
  return out.str();
}

// --- Run manifests ---

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  std::uint64_t seed = 0;
  json config = json::object();
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  double wall_time_seconds = 0.0;  // informational; varies run to run
};

// Sidecar written next to each output as <out>.manifest.json. Every field
// except wall_time_seconds is deterministic for fixed flags and seed.
inline void write_manifest(const std::string& out_path, const RunManifest& manifest) {
  json doc;
  doc["tool"] = std::string(kToolName);
  doc["version"] = std::string(kVersion);
  doc["command"] = manifest.command;
  doc["argv"] = manifest.argv;
  doc["seed"] = manifest.seed;
  doc["config"] = manifest.config;
  doc["inputs"] = manifest.inputs;
  doc["outputs"] = manifest.outputs;
  doc["wall_time_seconds"] = manifest.wall_time_seconds;
  detail::write_text_file(out_path + ".manifest.json", doc.dump(2) + "\n");
}

}  // namespace hazard
