// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors
//
// wavespec command-line driver.
//
// Exit codes: 0 success, 1 configuration/usage/parse errors, 2 numerical
// failures (non-finite loss, failed gradient check).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wavespec/experiment.hpp"

namespace ws = wavespec;
namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;

struct Options {
  std::string config;
  std::string checkpoint;
  std::string output_dir;
  std::string volume;
  std::string volume_b;
  std::string rules;
  std::string basis = "haar";
  std::string boundary = "periodic";
  std::string out;
  std::string kind = "piecewise_constant";
  std::vector<std::size_t> dims{8, 8, 8};
  std::size_t count = 4;
  std::size_t levels = 1;
  std::size_t trials = 0;
  std::size_t threads = 0;
  std::uint64_t seed = 0;
  int dilation = 0;
  double gamma = 1.0;
  double lambda = 0.0;
  bool quiet = false;
};

ws::Dims to_dims(const std::vector<std::size_t>& v) { return {v.at(0), v.at(1), v.at(2)}; }

int cmd_train(const Options& o) {
  ws::ExperimentConfig cfg = ws::load_experiment_config(o.config);
  if (o.threads > 0) cfg.train.threads = o.threads;
  const fs::path dir = o.output_dir.empty() ? fs::path(cfg.output_dir) : fs::path(o.output_dir);
  const auto result = ws::run_experiment(cfg, dir, [&](const ws::EpochMetrics& m) {
    if (o.quiet) return;
    std::fprintf(stderr, "epoch %3d  loss %.6g  val_mse %.6g  psnr %.3f dB  dilation %d  active %zu%s\n", m.epoch,
                 m.total_loss, m.mse, m.psnr, m.dilation, m.active.size(), m.pruned.empty() ? "" : "  (pruned)");
  });
  ws::Json summary{{"output_dir", dir.string()}, {"epochs", result.metrics.size()}, {"sigma", result.sigma}};
  if (!result.metrics.empty()) {
    const auto& last = result.metrics.back();
    summary["mse"] = last.mse;
    summary["noisy_mse"] = last.noisy_mse;
    summary["psnr"] = last.psnr;
    ws::Json w = ws::Json::object();
    for (const auto& [name, v] : last.weights) w[name] = v;
    summary["weights"] = w;
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const auto ckpt = ws::load_checkpoint(o.checkpoint);
  const auto cfg = ws::load_experiment_config(o.config);
  const auto m = ws::evaluate_checkpoint(ckpt, cfg);
  ws::Json w = ws::Json::object();
  const auto full = ckpt.state.bank.full_weights();
  for (std::size_t k = 0; k < full.size(); ++k) w[ckpt.state.bank.name(k)] = full[k];
  std::cout << ws::Json{{"mse", m.mse}, {"psnr", m.psnr}, {"noisy_mse", m.noisy_mse}, {"weights", w}}.dump(2) << "\n";
  return 0;
}

int cmd_transform(const Options& o) {
  const ws::Volume x = ws::read_volume(o.volume);
  const auto fb = ws::basis_by_name(o.basis);
  const auto boundary = ws::boundary_from_string(o.boundary);
  const auto c = o.levels > 1 ? ws::dwt3d_multilevel(x, fb, boundary, o.levels) : ws::dwt3d(x, fb, boundary, o.dilation);
  ws::Json levels = ws::Json::array();
  for (std::size_t l = 0; l < c.levels.size(); ++l) {
    ws::Json sub = ws::Json::object();
    for (ws::Subband s : ws::kAllSubbands) {
      if (c.levels[l].has(s)) sub[std::string(ws::label(s))] = c.levels[l].at(s).sum_squares();
    }
    levels.push_back({{"level", l + 1}, {"energy", sub}});
  }
  const ws::Json out{{"basis", fb.name},
                     {"boundary", std::string(ws::to_string(boundary))},
                     {"dilation", c.dilation},
                     {"dims", ws::detail::dims_to_json(x.dims())},
                     {"input_energy", x.sum_squares()},
                     {"total_energy", c.energy()},
                     {"levels", levels}};
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_rules(const Options& o) {
  const auto program = ws::parse_rules(ws::read_text_file(o.rules, "rules file"));
  const ws::Volume x = ws::read_volume(o.volume);
  const auto fb = ws::basis_by_name(o.basis);
  const auto c = ws::dwt3d(x, fb, ws::boundary_from_string(o.boundary));
  ws::BasisBank bank(ws::all_registered_bases());
  for (const auto& t : ws::eval_rules(program, c, bank)) {
    std::cout << ws::rule_trace_to_json(t).dump() << "\n";
    if (!o.quiet) std::cerr << ws::to_string(t) << "\n";
  }
  ws::Json active = ws::Json::array();
  for (std::size_t k : bank.active_indices()) active.push_back(bank.name(k));
  std::cout << ws::Json{{"active", active}}.dump() << "\n";
  return 0;
}

int cmd_gradcheck(const Options& o) {
  const auto cfg = ws::load_experiment_config(o.config);
  const std::size_t trials = o.trials > 0 ? o.trials : cfg.gradcheck.trials;
  const auto report = ws::gradcheck_suite(cfg.filter_banks(), cfg.train, cfg.gradcheck.dims, trials, cfg.gradcheck.seed);
  std::size_t failed = 0;
  for (const auto& e : report.entries) {
    if (e.ok) continue;
    ++failed;
    std::cerr << "MISMATCH " << e.parameter << ": analytic " << e.analytic << " numeric " << e.numeric << "\n";
  }
  std::cout << ws::Json{{"instances", report.instances},
                        {"checked", report.entries.size()},
                        {"failed", failed},
                        {"resampled", report.resampled},
                        {"max_rel_error", report.max_rel_error()},
                        {"passed", report.passed()}}
                   .dump(2)
            << "\n";
  return report.passed() ? 0 : kExitNumerical;
}

int cmd_generate(const Options& o) {
  ws::DatasetSpec spec{ws::dataset_kind_from_string(o.kind), o.count, to_dims(o.dims), o.seed};
  const auto vols = ws::gen_dataset(spec);
  fs::create_directories(o.out);
  for (std::size_t i = 0; i < vols.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "vol_%04zu.wvol", i);
    ws::write_volume(fs::path(o.out) / name, vols[i]);
    if (!o.quiet) std::cout << (fs::path(o.out) / name).string() << "\n";
  }
  return 0;
}

int cmd_compose(const Options& o) {
  const ws::Volume a = ws::read_volume(o.volume), b = ws::read_volume(o.volume_b);
  const ws::Volume r = ws::rule_compose(a, b, o.gamma, o.lambda);
  std::size_t nonzero = 0;
  for (double v : r.values()) nonzero += v != 0.0 ? 1 : 0;
  if (!o.out.empty()) ws::write_volume(o.out, r);
  std::cout << ws::Json{{"nonzero", nonzero}, {"size", r.size()}, {"energy", r.sum_squares()}, {"max", r.max_abs()}}.dump(2)
            << "\n";
  return 0;
}

int cmd_init_config(const Options& o) {
  const std::string text = ws::to_json(ws::ExperimentConfig{}).dump(2) + "\n";
  if (o.out.empty()) {
    std::cout << text;
  } else {
    ws::write_text_file(o.out, text);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wavespec: adaptive wavelet-basis spectral denoising"};
  app.require_subcommand(1);
  Options o;
  int (*action)(const Options&) = nullptr;

  auto* train = app.add_subcommand("train", "Train on a synthetic dataset and write metrics, checkpoint and summary");
  train->add_option("config", o.config, "Experiment config (JSON)")->required();
  train->add_option("-o,--output-dir", o.output_dir, "Override the config's output_dir");
  train->add_option("-j,--threads", o.threads, "Worker threads per batch (results do not depend on this)");
  train->add_flag("-q,--quiet", o.quiet, "No per-epoch progress on stderr");
  train->callback([&] { action = cmd_train; });

  auto* eval = app.add_subcommand("eval", "Validation metrics of a checkpoint");
  eval->add_option("checkpoint", o.checkpoint, "Checkpoint file")->required();
  eval->add_option("config", o.config, "Experiment config (JSON)")->required();
  eval->callback([&] { action = cmd_eval; });

  auto* transform = app.add_subcommand("transform", "Subband energies of a volume file as JSON");
  transform->add_option("volume", o.volume, "Volume file")->required();
  transform->add_option("-b,--basis", o.basis, "Basis name");
  transform->add_option("--boundary", o.boundary, "periodic or symmetric");
  transform->add_option("-L,--levels", o.levels, "Decomposition levels")->check(CLI::PositiveNumber);
  transform->add_option("-s,--dilation", o.dilation, "A trous dilation factor (single level)")->check(CLI::NonNegativeNumber);
  transform->callback([&] { action = cmd_transform; });

  auto* rules = app.add_subcommand("rules", "Parse a rule program and evaluate it on a volume");
  rules->add_option("rules", o.rules, "Rule file")->required();
  rules->add_option("volume", o.volume, "Volume file")->required();
  rules->add_option("-b,--basis", o.basis, "Basis used to compute the level-1 subbands");
  rules->add_option("--boundary", o.boundary, "periodic or symmetric");
  rules->add_flag("-q,--quiet", o.quiet, "No human-readable trace on stderr");
  rules->callback([&] { action = cmd_rules; });

  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
  gradcheck->add_option("config", o.config, "Experiment config (JSON)")->required();
  gradcheck->add_option("-n,--trials", o.trials, "Random instances (default: config gradcheck.trials)");
  gradcheck->callback([&] { action = cmd_gradcheck; });

  auto* generate = app.add_subcommand("generate", "Write synthetic volumes as volume files");
  generate->add_option("-k,--kind", o.kind, "piecewise_constant, smooth_blobs or mixed");
  generate->add_option("-n,--count", o.count, "Number of volumes");
  generate->add_option("-d,--dims", o.dims, "D H W")->expected(3);
  generate->add_option("--seed", o.seed, "Dataset seed");
  generate->add_option("-o,--out", o.out, "Output directory")->required();
  generate->add_flag("-q,--quiet", o.quiet, "Do not list written files");
  generate->callback([&] { action = cmd_generate; });

  auto* compose = app.add_subcommand("compose", "Elementwise rule map gamma * relu(a*b - lambda) of two volumes");
  compose->add_option("a", o.volume, "First volume file")->required();
  compose->add_option("b", o.volume_b, "Second volume file")->required();
  compose->add_option("-g,--gamma", o.gamma, "Gain");
  compose->add_option("-l,--lambda", o.lambda, "Threshold");
  compose->add_option("-o,--out", o.out, "Write the result to this volume file");
  compose->callback([&] { action = cmd_compose; });

  auto* init = app.add_subcommand("init-config", "Print the default experiment config");
  init->add_option("-o,--out", o.out, "Write to a file instead of stdout");
  init->callback([&] { action = cmd_init_config; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    return action(o);
  } catch (const ws::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const ws::ParseError& e) {
    std::cerr << "parse error: " << (o.rules.empty() ? std::string() : o.rules + ":") << e.what() << "\n";
    return kExitConfig;
  } catch (const ws::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}
