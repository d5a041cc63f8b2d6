// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wavespec/data.hpp"
#include "wavespec/errors.hpp"
#include "wavespec/filter_bank.hpp"
#include "wavespec/reasoning.hpp"
#include "wavespec/training.hpp"

namespace wavespec {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

struct GradcheckSettings {
  std::size_t trials = 20;
  Dims dims{8, 8, 8};
  std::uint64_t seed = 0;
};

struct ExperimentConfig {
  DatasetSpec dataset{DatasetKind::piecewise_constant, 32, {8, 8, 8}, 0};
  std::vector<std::string> bases{"haar", "db4"};
  TrainConfig train;
  std::optional<std::string> rules_file;
  std::string output_dir = "out";
  GradcheckSettings gradcheck;

  void validate() const {
    if (dataset.count < 2) throw ConfigError("dataset.count must be >= 2 (train/validation split)");
    for (std::size_t a = 0; a < 3; ++a) {
      if (dataset.dims[a] < 2 || dataset.dims[a] % 2 != 0) {
        throw ConfigError("dataset.dims must be even and >= 2, got " + dataset.dims.str());
      }
    }
    if (bases.empty()) throw ConfigError("bases must list at least one basis");
    std::set<std::string> seen;
    for (const auto& b : bases) {
      try {
        basis_by_name(b);
      } catch (const LookupError& e) {
        throw ConfigError(e.what());
      }
      if (!seen.insert(b).second) throw ConfigError("basis '" + b + "' listed twice");
    }
    if (gradcheck.trials == 0) throw ConfigError("gradcheck.trials must be >= 1");
    train.validate();
  }

  std::vector<FilterBank> filter_banks() const {
    std::vector<FilterBank> out;
    for (const auto& b : bases) out.push_back(basis_by_name(b));
    return out;
  }
};

namespace detail {

/// f64 as JSON: finite values as numbers (nlohmann writes 17 significant digits,
/// which round-trips exactly), non-finite values as the strings "inf", "-inf", "nan".
inline Json f64_to_json(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

inline double f64_from_json(const Json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw ConfigError(where + ": expected a number");
}

inline Json dims_to_json(Dims d) { return Json::array({d.d, d.h, d.w}); }

inline Dims dims_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected [D, H, W]");
  Dims d;
  for (std::size_t a = 0; a < 3; ++a) {
    if (!j[a].is_number_unsigned() || j[a].get<std::size_t>() == 0) throw ConfigError(where + ": dims must be positive integers");
    d[a] = j[a].get<std::size_t>();
  }
  return d;
}

/// Reads typed optional keys from an object and rejects unknown ones.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    const Json& v = j_.at(key);
    const std::string path = where_ + "." + key;
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path + ": expected true/false");
      out = v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(path + ": expected an integer");
      if (std::is_unsigned_v<T> && !v.is_number_unsigned()) throw ConfigError(path + ": must be >= 0");
      out = v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      out = f64_from_json(v, path);
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path + ": expected a string");
      out = v.get<std::string>();
    } else {
      static_assert(sizeof(T) == 0, "unsupported config field type");
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.contains(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace detail

inline Json to_json(const TrainConfig& c) {
  return Json{{"beta", c.beta},
              {"noise_sigma", c.noise_sigma},
              {"noise_relative", c.noise_relative},
              {"dilation_interval", c.dilation_interval},
              {"max_dilation", c.max_dilation},
              {"lr", c.lr},
              {"beta1", c.beta1},
              {"beta2", c.beta2},
              {"eps", c.eps},
              {"epochs", c.epochs},
              {"batch_size", c.batch_size},
              {"seed", c.seed},
              {"boundary", std::string(to_string(c.boundary))},
              {"shared_params", c.shared_params},
              {"lambda_init_scale", c.lambda_init_scale},
              {"prune_tau", c.prune_tau},
              {"prune_window", c.prune_window},
              {"lambda_prune", c.lambda_prune},
              {"fixed_noise", c.fixed_noise},
              {"val_fraction", c.val_fraction},
              {"threads", c.threads}};
}

inline TrainConfig train_config_from_json(const Json& j) {
  TrainConfig c;
  detail::ObjectReader r(j, "train");
  r.read("beta", c.beta);
  r.read("noise_sigma", c.noise_sigma);
  r.read("noise_relative", c.noise_relative);
  r.read("dilation_interval", c.dilation_interval);
  r.read("max_dilation", c.max_dilation);
  r.read("lr", c.lr);
  r.read("beta1", c.beta1);
  r.read("beta2", c.beta2);
  r.read("eps", c.eps);
  r.read("epochs", c.epochs);
  r.read("batch_size", c.batch_size);
  r.read("seed", c.seed);
  std::string boundary(to_string(c.boundary));
  r.read("boundary", boundary);
  try {
    c.boundary = boundary_from_string(boundary);
  } catch (const Error& e) {
    throw ConfigError(std::string("train.boundary: ") + e.what());
  }
  r.read("shared_params", c.shared_params);
  r.read("lambda_init_scale", c.lambda_init_scale);
  r.read("prune_tau", c.prune_tau);
  r.read("prune_window", c.prune_window);
  r.read("lambda_prune", c.lambda_prune);
  r.read("fixed_noise", c.fixed_noise);
  r.read("val_fraction", c.val_fraction);
  r.read("threads", c.threads);
  r.finish();
  return c;
}

inline Json to_json(const ExperimentConfig& c) {
  Json j{{"dataset",
          {{"kind", std::string(to_string(c.dataset.kind))},
           {"count", c.dataset.count},
           {"dims", detail::dims_to_json(c.dataset.dims)},
           {"seed", c.dataset.seed}}},
         {"bases", c.bases},
         {"train", to_json(c.train)}};
  if (c.rules_file) j["rules_file"] = *c.rules_file;
  j["output_dir"] = c.output_dir;
  j["gradcheck"] = {{"trials", c.gradcheck.trials},
                    {"dims", detail::dims_to_json(c.gradcheck.dims)},
                    {"seed", c.gradcheck.seed}};
  return j;
}

inline ExperimentConfig experiment_config_from_json(const Json& j) {
  ExperimentConfig c;
  detail::ObjectReader r(j, "config");
  if (const Json* d = r.child("dataset")) {
    detail::ObjectReader dr(*d, "dataset");
    std::string kind(to_string(c.dataset.kind));
    dr.read("kind", kind);
    c.dataset.kind = dataset_kind_from_string(kind);
    dr.read("count", c.dataset.count);
    if (const Json* dims = dr.child("dims")) c.dataset.dims = detail::dims_from_json(*dims, "dataset.dims");
    dr.read("seed", c.dataset.seed);
    dr.finish();
  }
  if (const Json* b = r.child("bases")) {
    if (!b->is_array()) throw ConfigError("bases: expected a list of basis names");
    c.bases.clear();
    for (const auto& n : *b) {
      if (!n.is_string()) throw ConfigError("bases: expected a list of basis names");
      c.bases.push_back(n.get<std::string>());
    }
  }
  if (const Json* t = r.child("train")) c.train = train_config_from_json(*t);
  if (const Json* rf = r.child("rules_file")) {
    if (!rf->is_null()) {
      if (!rf->is_string()) throw ConfigError("rules_file: expected a path string");
      c.rules_file = rf->get<std::string>();
    }
  }
  r.read("output_dir", c.output_dir);
  if (const Json* g = r.child("gradcheck")) {
    detail::ObjectReader gr(*g, "gradcheck");
    gr.read("trials", c.gradcheck.trials);
    if (const Json* dims = gr.child("dims")) c.gradcheck.dims = detail::dims_from_json(*dims, "gradcheck.dims");
    gr.read("seed", c.gradcheck.seed);
    gr.finish();
  }
  r.finish();
  c.validate();
  return c;
}

inline std::string read_text_file(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(std::string("cannot open ") + what + " '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Json parse_json_text(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError(where + ": invalid JSON: " + e.what());
  }
}

/// Loads a config file; a relative rules_file is resolved against the config's directory.
inline ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  ExperimentConfig c = experiment_config_from_json(parse_json_text(read_text_file(path, "config file"), path.string()));
  if (c.rules_file && std::filesystem::path(*c.rules_file).is_relative()) {
    c.rules_file = (path.parent_path() / *c.rules_file).string();
  }
  return c;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr int kCheckpointVersion = 1;

inline Json to_json(const SpectralParams& p) {
  return Json{{"raw_lambda_a", detail::f64_to_json(p.raw_lambda_a)},
              {"raw_lambda_d", detail::f64_to_json(p.raw_lambda_d)},
              {"raw_gamma", detail::f64_to_json(p.raw_gamma)},
              {"theta", detail::f64_to_json(p.theta)}};
}

inline SpectralParams spectral_params_from_json(const Json& j) {
  SpectralParams p;
  detail::ObjectReader r(j, "params");
  r.read("raw_lambda_a", p.raw_lambda_a);
  r.read("raw_lambda_d", p.raw_lambda_d);
  r.read("raw_gamma", p.raw_gamma);
  r.read("theta", p.theta);
  r.finish();
  return p;
}

namespace detail {

inline Json f64_array(std::span<const double> v) {
  Json a = Json::array();
  for (double x : v) a.push_back(f64_to_json(x));
  return a;
}

inline std::vector<double> f64_vector(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  std::vector<double> out;
  for (const auto& x : j) out.push_back(f64_from_json(x, where));
  return out;
}

}  // namespace detail

/// Complete training state plus the config that produced it.
inline Json checkpoint_to_json(const ModelState& s, const ExperimentConfig& config) {
  Json params = Json::array();
  for (const auto& p : s.params) params.push_back(to_json(p));
  Json bases = Json::array(), active = Json::array(), history = Json::array();
  for (std::size_t k = 0; k < s.bank.size(); ++k) {
    bases.push_back(s.bank.name(k));
    active.push_back(s.bank.is_active(k));
    const auto& h = s.bank.history(k);
    history.push_back(detail::f64_array(std::vector<double>(h.begin(), h.end())));
  }
  ExperimentConfig embedded = config;
  embedded.train = s.config;
  return Json{{"format", "wavespec-checkpoint"},
              {"version", kCheckpointVersion},
              {"config", to_json(embedded)},
              {"bases", bases},
              {"active", active},
              {"logits", detail::f64_array(s.bank.logits())},
              {"params", params},
              {"dilation", s.dilation},
              {"adam", {{"step", s.adam.step}, {"m", detail::f64_array(s.adam.m)}, {"v", detail::f64_array(s.adam.v)}}},
              {"history", history}};
}

struct Checkpoint {
  ModelState state;
  ExperimentConfig config;
};

inline Checkpoint checkpoint_from_json(const Json& j) {
  try {
    if (j.value("format", std::string()) != "wavespec-checkpoint") throw ConfigError("not a wavespec checkpoint");
    if (j.value("version", 0) != kCheckpointVersion) {
      throw ConfigError("unsupported checkpoint version " + j.value("version", Json()).dump());
    }
    Checkpoint c;
    c.config = experiment_config_from_json(j.at("config"));
    std::vector<FilterBank> banks;
    for (const auto& n : j.at("bases")) banks.push_back(basis_by_name(n.get<std::string>()));
    c.state = make_state(banks, c.config.train);
    const auto logits = detail::f64_vector(j.at("logits"), "logits");
    if (logits.size() != banks.size()) throw ConfigError("checkpoint: logits/bases length mismatch");
    c.state.bank.logits() = logits;
    const auto& params = j.at("params");
    if (params.size() != c.state.params.size()) throw ConfigError("checkpoint: params length mismatch");
    for (std::size_t i = 0; i < params.size(); ++i) c.state.params[i] = spectral_params_from_json(params[i]);
    const auto& active = j.at("active");
    const auto& history = j.at("history");
    if (active.size() != banks.size() || history.size() != banks.size()) {
      throw ConfigError("checkpoint: active/history length mismatch");
    }
    for (std::size_t k = 0; k < banks.size(); ++k) {
      if (!active[k].get<bool>() && !c.state.bank.set_active(k, false)) {
        throw ConfigError("checkpoint: no active basis");
      }
      const auto h = detail::f64_vector(history[k], "history");
      c.state.bank.set_history(k, std::deque<double>(h.begin(), h.end()));
    }
    c.state.dilation = j.at("dilation").get<int>();
    const auto& adam = j.at("adam");
    c.state.adam.step = adam.at("step").get<std::uint64_t>();
    c.state.adam.m = detail::f64_vector(adam.at("m"), "adam.m");
    c.state.adam.v = detail::f64_vector(adam.at("v"), "adam.v");
    if (c.state.adam.m.size() != c.state.parameter_count() || c.state.adam.v.size() != c.state.parameter_count()) {
      throw ConfigError("checkpoint: optimizer moment length mismatch");
    }
    return c;
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("malformed checkpoint: ") + e.what());
  } catch (const LookupError& e) {
    throw ConfigError(std::string("checkpoint: ") + e.what());
  }
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  out << text;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelState& s, const ExperimentConfig& config) {
  write_text_file(path, checkpoint_to_json(s, config).dump(2) + "\n");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_json(parse_json_text(read_text_file(path, "checkpoint"), path.string()));
}

// ---------------------------------------------------------------------------
// Logs
// ---------------------------------------------------------------------------

/// One metrics record. Wall-clock time is kept out so the stream is reproducible.
inline Json metrics_to_json(const EpochMetrics& m) {
  Json weights = Json::object();
  for (const auto& [name, w] : m.weights) weights[name] = detail::f64_to_json(w);
  return Json{{"epoch", m.epoch},
              {"total_loss", detail::f64_to_json(m.total_loss)},
              {"train_mse", detail::f64_to_json(m.train_mse)},
              {"mse", detail::f64_to_json(m.mse)},
              {"psnr", detail::f64_to_json(m.psnr)},
              {"noisy_mse", detail::f64_to_json(m.noisy_mse)},
              {"entropy", detail::f64_to_json(m.entropy)},
              {"prune_penalty", detail::f64_to_json(m.prune_penalty)},
              {"weights", weights},
              {"active", m.active},
              {"dilation", m.dilation},
              {"pruned", m.pruned}};
}

inline Json prune_record_to_json(const PruneRecord& r) {
  return Json{{"step", r.step},
              {"epoch", r.epoch},
              {"basis", r.event.basis},
              {"window_weights", detail::f64_array(r.event.window_weights)}};
}

inline Json rule_trace_to_json(const RuleTrace& t) {
  Json conds = Json::array();
  for (const auto& c : t.conditions) {
    conds.push_back({{"subband", std::string(label(c.condition.subband))},
                     {"stat", std::string(to_string(c.condition.stat))},
                     {"value", detail::f64_to_json(c.value)},
                     {"cmp", std::string(to_string(c.condition.cmp))},
                     {"threshold", detail::f64_to_json(c.condition.threshold)},
                     {"holds", c.holds}});
  }
  return Json{{"rule", t.rule_index}, {"fired", t.fired}, {"conditions", conds},
              {"action", t.action},   {"applied", t.applied}, {"note", t.note}};
}

inline std::string csv_header() { return "epoch,mse,psnr,entropy,top_basis,top_weight,dilation\n"; }

inline std::string csv_row(const EpochMetrics& m) {
  std::size_t top = 0;
  for (std::size_t k = 1; k < m.weights.size(); ++k) {
    if (m.weights[k].second > m.weights[top].second) top = k;
  }
  std::ostringstream o;
  o << std::setprecision(17) << m.epoch << ',' << m.mse << ',' << m.psnr << ',' << m.entropy << ','
    << m.weights[top].first << ',' << m.weights[top].second << ',' << m.dilation << '\n';
  return o.str();
}

// ---------------------------------------------------------------------------
// End-to-end runs
// ---------------------------------------------------------------------------

struct RunOutputs {
  std::filesystem::path metrics = "metrics.jsonl";
  std::filesystem::path checkpoint = "checkpoint.json";
  std::filesystem::path summary = "summary.csv";
  std::filesystem::path prune_events = "prune_events.jsonl";
  std::filesystem::path timing = "timing.jsonl";
  std::filesystem::path rules_trace = "rules_trace.jsonl";
};

/// Generates the dataset, trains, and writes every artifact under `dir`.
/// `progress` (optional) receives each epoch record as it completes.
inline TrainResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& dir,
                                  const EpochCallback& progress = {}) {
  config.validate();
  std::filesystem::create_directories(dir);
  const RunOutputs names;
  std::optional<RuleProgram> rules;
  if (config.rules_file) rules = parse_rules(read_text_file(*config.rules_file, "rules file"));

  const auto dataset = gen_dataset(config.dataset);
  std::ofstream metrics(dir / names.metrics, std::ios::binary);
  std::ofstream summary(dir / names.summary, std::ios::binary);
  std::ofstream timing(dir / names.timing, std::ios::binary);
  if (!metrics || !summary || !timing) throw ConfigError("cannot write into output directory '" + dir.string() + "'");
  summary << csv_header();

  InitHook init;
  if (rules) {
    init = [&](ModelState& s, std::span<const Volume> batch) {
      const std::size_t k = s.bank.hard_select();
      const auto coeffs = dwt3d(batch.front(), s.bank.basis(k), s.config.boundary, s.dilation);
      std::ofstream trace(dir / names.rules_trace, std::ios::binary);
      for (const auto& t : eval_rules(*rules, coeffs, s.bank)) trace << rule_trace_to_json(t).dump() << '\n';
    };
  }
  const auto on_epoch = [&](const EpochMetrics& m) {
    metrics << metrics_to_json(m).dump() << '\n';
    metrics.flush();
    summary << csv_row(m);
    timing << Json{{"epoch", m.epoch}, {"wall_seconds", m.wall_seconds}}.dump() << '\n';
    if (progress) progress(m);
  };
  TrainResult result = train(dataset, config.filter_banks(), config.train, on_epoch, init);

  std::ofstream prune(dir / names.prune_events, std::ios::binary);
  for (const auto& r : result.prune_log) prune << prune_record_to_json(r).dump() << '\n';
  save_checkpoint(dir / names.checkpoint, result.state, config);
  return result;
}

/// Validation metrics of a saved model on the config's dataset split.
inline EvalMetrics evaluate_checkpoint(const Checkpoint& ckpt, const ExperimentConfig& config) {
  config.validate();
  const auto split = split_dataset(gen_dataset(config.dataset), config.train);
  return evaluate(ckpt.state, split.val);
}

}  // namespace wavespec
