// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors

#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "wavespec/basis_mixture.hpp"
#include "wavespec/data.hpp"
#include "wavespec/errors.hpp"
#include "wavespec/spectral_ops.hpp"
#include "wavespec/volume.hpp"
#include "wavespec/wavelet.hpp"

namespace wavespec {

/// Training hyperparameters.
///
/// The objective is  L = MSE + beta * H(w)  with H(w) = -sum_k w_k log w_k, so a
/// positive beta pushes the basis weights towards a single basis. A negative
/// beta gives the literal  MSE + |beta| * sum_k w_k log w_k  form, which
/// favours uniform weights.
struct TrainConfig {
  double beta = 0.01;
  double noise_sigma = 0.5;
  bool noise_relative = true;  // sigma = noise_sigma * std(clean training data)
  int dilation_interval = 10;  // T_d, in epochs
  int max_dilation = 0;        // s_max
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int epochs = 40;
  std::size_t batch_size = 4;
  std::uint64_t seed = 0;
  Boundary boundary = Boundary::periodic;
  bool shared_params = false;
  double lambda_init_scale = 0.01;  // initial lambda = scale * std(first-batch coefficients)
  double prune_tau = 0.02;
  std::size_t prune_window = 50;
  double lambda_prune = 0.0;  // indicator penalty, reported only (no gradient)
  bool fixed_noise = false;
  double val_fraction = 0.1;
  std::size_t threads = 1;

  void validate() const {
    if (dilation_interval < 1) throw ConfigError("dilation_interval (T_d) must be >= 1");
    if (max_dilation < 0) throw ConfigError("max_dilation (s_max) must be >= 0");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(noise_sigma >= 0.0)) throw ConfigError("noise_sigma must be >= 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
      throw ConfigError("Adam betas must lie in [0, 1)");
    }
    if (!(eps > 0.0)) throw ConfigError("eps must be > 0");
    if (epochs < 0) throw ConfigError("epochs must be >= 0");
    if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
    if (prune_window == 0) throw ConfigError("prune_window must be >= 1");
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
    if (!std::isfinite(beta)) throw ConfigError("beta must be finite");
  }
};

/// s(t) = min(floor(t / T_d), s_max).
inline int dilation_schedule(int epoch, int interval, int max_dilation) {
  if (interval < 1) throw ConfigError("dilation interval must be >= 1");
  if (epoch < 0) throw ConfigError("epoch must be >= 0");
  return std::min(epoch / interval, max_dilation);
}

struct AdamMoments {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// Everything that evolves during training.
struct ModelState {
  BasisBank bank;
  std::vector<SpectralParams> params;  // one per basis, or a single shared set
  int dilation = 0;
  TrainConfig config;
  AdamMoments adam;
  std::uint64_t version = 0;  // bumped on every mutation; guards forward caches

  std::size_t param_index(std::size_t basis) const { return config.shared_params ? 0 : basis; }
  const SpectralParams& params_for(std::size_t basis) const { return params.at(param_index(basis)); }

  /// Number of learnable scalars: 4 per parameter set plus one logit per basis.
  std::size_t parameter_count() const { return 4 * params.size() + bank.size(); }
};

/// Fresh state: uniform logits and identity shrinkage parameters.
inline ModelState make_state(std::vector<FilterBank> bases, const TrainConfig& config) {
  config.validate();
  ModelState s;
  s.bank = BasisBank(std::move(bases), config.prune_window);
  s.config = config;
  s.params.assign(config.shared_params ? 1 : s.bank.size(), SpectralParams::identity());
  s.adam.m.assign(s.parameter_count(), 0.0);
  s.adam.v.assign(s.parameter_count(), 0.0);
  return s;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------

struct BasisCache {
  std::size_t basis = 0;  // bank index
  WaveletCoeffs coeffs;   // before the nonlinearity
  Volume recon;           // x^(k)
};

struct ForwardCache {
  std::vector<BasisCache> per_basis;  // active bases only, bank order
  std::vector<double> weights;        // softmax over the active logits
  std::uint64_t state_version = 0;
  int dilation = 0;
  Dims dims{};
};

struct ForwardResult {
  Volume x_hat;
  ForwardCache cache;
};

/// x_hat = sum_k w_k IDWT_k(phi_k(DWT_k(x_noisy))) over the active bases.
inline ForwardResult forward(const Volume& x_noisy, const ModelState& state) {
  ForwardResult r;
  auto& cache = r.cache;
  cache.state_version = state.version;
  cache.dilation = state.dilation;
  cache.dims = x_noisy.dims();
  cache.weights = state.bank.weights();
  const auto active = state.bank.active_indices();
  std::vector<Volume> recons;
  for (std::size_t k : active) {
    const FilterBank& fb = state.bank.basis(k);
    BasisCache bc;
    bc.basis = k;
    bc.coeffs = dwt3d(x_noisy, fb, state.config.boundary, state.dilation);
    bc.recon = idwt3d(apply_nonlinearity(bc.coeffs, state.params_for(k)), fb);
    recons.push_back(bc.recon);
    cache.per_basis.push_back(std::move(bc));
  }
  r.x_hat = combine(recons, cache.weights);
  return r;
}

// ---------------------------------------------------------------------------
// Loss and gradients
// ---------------------------------------------------------------------------

/// (1/N)||x_hat - x||^2 - beta * sum_k w_k log w_k.
inline double loss(const Volume& x_hat, const Volume& x_clean, std::span<const double> w, double beta) {
  return mean_squared_error(x_hat, x_clean) - beta * entropy_term(w);
}

struct ParamGrad {
  double d_lambda_a = 0.0;
  double d_lambda_d = 0.0;
  double d_gamma = 0.0;
  double d_theta = 0.0;
};

/// Gradients with respect to the materialized parameters (lambda, gamma, theta)
/// and the logits. Entries of pruned bases are zero.
struct GradientSet {
  std::vector<ParamGrad> params;
  std::vector<double> d_logits;

  GradientSet& operator+=(const GradientSet& o) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i].d_lambda_a += o.params[i].d_lambda_a;
      params[i].d_lambda_d += o.params[i].d_lambda_d;
      params[i].d_gamma += o.params[i].d_gamma;
      params[i].d_theta += o.params[i].d_theta;
    }
    for (std::size_t i = 0; i < d_logits.size(); ++i) d_logits[i] += o.d_logits[i];
    return *this;
  }

  GradientSet& operator*=(double s) {
    for (auto& p : params) {
      p.d_lambda_a *= s;
      p.d_lambda_d *= s;
      p.d_gamma *= s;
      p.d_theta *= s;
    }
    for (double& g : d_logits) g *= s;
    return *this;
  }
};

inline GradientSet zero_gradients(const ModelState& state) {
  return {std::vector<ParamGrad>(state.params.size()), std::vector<double>(state.bank.size(), 0.0)};
}

/// Exact gradients of `loss` for one sample.
///
/// dL/dx_hat = (2/N)(x_hat - x) is pulled back through each inverse transform
/// with its adjoint, then through phi elementwise. The logits see
/// <dL/dx_hat, x^(k)> through the softmax Jacobian plus the entropy term.
inline GradientSet backward(const ForwardCache& cache, const Volume& x_hat, const Volume& x_clean,
                            const ModelState& state) {
  if (cache.state_version != state.version || cache.dilation != state.dilation) {
    throw ContractError("forward cache is stale: state changed since the forward pass");
  }
  if (x_hat.dims() != cache.dims || x_clean.dims() != cache.dims) {
    throw ContractError("backward: volume dims do not match the forward cache");
  }
  const auto active = state.bank.active_indices();
  if (active.size() != cache.per_basis.size()) throw ContractError("backward: active basis set changed");

  GradientSet grads = zero_gradients(state);
  Volume g = x_hat - x_clean;
  g *= 2.0 / static_cast<double>(x_hat.size());

  std::vector<double> dl_dw(active.size());
  for (std::size_t i = 0; i < active.size(); ++i) {
    const BasisCache& bc = cache.per_basis[i];
    if (bc.basis != active[i]) throw ContractError("backward: cache/basis order mismatch");
    const FilterBank& fb = state.bank.basis(bc.basis);
    const SpectralParams& p = state.params_for(bc.basis);
    ParamGrad& pg = grads.params[state.param_index(bc.basis)];

    dl_dw[i] = dot(g, bc.recon);

    const WaveletCoeffs coeff_bar = idwt3d_adjoint(cache.weights[i] * g, fb, bc.coeffs.boundary, bc.coeffs.dilation);
    const double la = p.lambda_a(), ld = p.lambda_d(), gam = p.gamma(), th = p.theta;
    for (std::size_t l = 0; l < bc.coeffs.levels.size(); ++l) {
      for (Subband s : kAllSubbands) {
        if (!bc.coeffs.levels[l].has(s)) continue;
        const Volume& z = bc.coeffs.levels[l].at(s);
        const Volume& zb = coeff_bar.levels[l].at(s);
        const bool approx = s == Subband::aaa;
        const double lam = approx ? la : ld;
        double d_lam = 0.0, d_gam = 0.0, d_th = 0.0;
        for (std::size_t n = 0; n < z.size(); ++n) {
          const PhiGrad d = phi_grad(z[n], lam, gam, th);
          d_lam += zb[n] * d.dlambda;
          d_gam += zb[n] * d.dgamma;
          d_th += zb[n] * d.dtheta;
        }
        (approx ? pg.d_lambda_a : pg.d_lambda_d) += d_lam;
        pg.d_gamma += d_gam;
        pg.d_theta += d_th;
      }
    }
  }

  std::vector<double> active_logits;
  for (std::size_t k : active) active_logits.push_back(state.bank.logits()[k]);
  const auto d_recon = softmax_backward(cache.weights, dl_dw);
  const auto d_entropy = entropy_grad_logits(active_logits);
  for (std::size_t i = 0; i < active.size(); ++i) {
    grads.d_logits[active[i]] = d_recon[i] - state.config.beta * d_entropy[i];
  }
  return grads;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update; `step` is 1-based. Frozen entries are left
/// untouched, moments included.
inline void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                        std::span<double> v, std::uint64_t step, const AdamOptions& opt,
                        std::span<const std::uint8_t> frozen = {}) {
  const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!frozen.empty() && frozen[i]) continue;
    m[i] = opt.beta1 * m[i] + (1.0 - opt.beta1) * grads[i];
    v[i] = opt.beta2 * v[i] + (1.0 - opt.beta2) * grads[i] * grads[i];
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    params[i] -= opt.lr * mhat / (std::sqrt(vhat) + opt.eps);
  }
}

namespace detail {

inline std::string param_label(const ModelState& s, std::size_t flat) {
  static constexpr std::array<const char*, 4> kNames{"lambda_A", "lambda_D", "gamma", "theta"};
  const std::size_t np = 4 * s.params.size();
  if (flat < np) {
    const std::size_t set = flat / 4;
    const std::string owner = s.config.shared_params ? std::string("shared") : s.bank.name(set);
    return owner + "." + kNames[flat % 4];
  }
  return s.bank.name(flat - np) + ".logit";
}

}  // namespace detail

/// Adam step on the unconstrained parameterization. Gradients for softplus-mapped
/// parameters are chained through the softplus derivative. Pruned bases stay frozen.
inline void adam_step(ModelState& state, const GradientSet& grads) {
  const std::size_t n = state.parameter_count();
  std::vector<double> flat(n), g(n);
  std::vector<std::uint8_t> frozen(n, 0);
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    const SpectralParams& p = state.params[i];
    const ParamGrad& pg = grads.params.at(i);
    flat[4 * i + 0] = p.raw_lambda_a;
    flat[4 * i + 1] = p.raw_lambda_d;
    flat[4 * i + 2] = p.raw_gamma;
    flat[4 * i + 3] = p.theta;
    g[4 * i + 0] = pg.d_lambda_a * sigmoid(p.raw_lambda_a);
    g[4 * i + 1] = pg.d_lambda_d * sigmoid(p.raw_lambda_d);
    g[4 * i + 2] = pg.d_gamma * sigmoid(p.raw_gamma);
    g[4 * i + 3] = pg.d_theta;
    if (!state.config.shared_params && !state.bank.is_active(i)) {
      for (std::size_t j = 0; j < 4; ++j) frozen[4 * i + j] = 1;
    }
  }
  const std::size_t base = 4 * state.params.size();
  for (std::size_t k = 0; k < state.bank.size(); ++k) {
    flat[base + k] = state.bank.logits()[k];
    g[base + k] = grads.d_logits.at(k);
    if (!state.bank.is_active(k)) frozen[base + k] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(g[i])) {
      throw NumericalError("non-finite gradient for parameter " + detail::param_label(state, i));
    }
  }
  if (state.adam.m.size() != n) {
    state.adam.m.assign(n, 0.0);
    state.adam.v.assign(n, 0.0);
  }
  state.adam.step += 1;
  const AdamOptions opt{state.config.lr, state.config.beta1, state.config.beta2, state.config.eps};
  adam_update(flat, g, state.adam.m, state.adam.v, state.adam.step, opt, frozen);

  for (std::size_t i = 0; i < state.params.size(); ++i) {
    SpectralParams& p = state.params[i];
    p.raw_lambda_a = flat[4 * i + 0];
    p.raw_lambda_d = flat[4 * i + 1];
    p.raw_gamma = flat[4 * i + 2];
    p.theta = flat[4 * i + 3];
  }
  for (std::size_t k = 0; k < state.bank.size(); ++k) state.bank.logits()[k] = flat[base + k];
  state.version += 1;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient check
// ---------------------------------------------------------------------------

struct GradCheckEntry {
  std::string parameter;
  double analytic = 0.0;
  double numeric = 0.0;
  bool ok = false;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  std::size_t instances = 0;
  std::size_t resampled = 0;  // instances redrawn because a coefficient sat near a threshold
  bool passed() const {
    return std::all_of(entries.begin(), entries.end(), [](const GradCheckEntry& e) { return e.ok; });
  }
  double max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) {
      const double d = std::abs(e.analytic - e.numeric);
      const double s = std::max(std::abs(e.analytic), std::abs(e.numeric));
      if (d > 0.0) m = std::max(m, s > 0.0 ? d / s : INFINITY);
    }
    return m;
  }
};

struct GradCheckOptions {
  double h = 1e-5;
  double rtol = 1e-4;
  double atol = 1e-9;  // floor for gradients that are zero up to roundoff
};

/// Distance from the nearest coefficient magnitude to its threshold, over active bases.
inline double kink_margin(const ModelState& state, const Volume& x_noisy) {
  double margin = INFINITY;
  for (std::size_t k : state.bank.active_indices()) {
    const SpectralParams& p = state.params_for(k);
    dwt3d(x_noisy, state.bank.basis(k), state.config.boundary, state.dilation)
        .for_each_block([&](std::size_t, Subband s, const Volume& v) {
          const double lam = s == Subband::aaa ? p.lambda_a() : p.lambda_d();
          for (double z : v.values()) margin = std::min(margin, std::abs(std::abs(z) - lam));
        });
  }
  return margin;
}

inline double total_loss(const ModelState& state, const Volume& x_noisy, const Volume& x_clean) {
  const auto fr = forward(x_noisy, state);
  return loss(fr.x_hat, x_clean, fr.cache.weights, state.config.beta);
}

/// Compares backward() with central differences of the scalar loss for every
/// parameter of every active basis: lambda_A, lambda_D, gamma (perturbed in
/// value space), theta and the logits.
inline GradCheckReport gradcheck(const ModelState& state, const Volume& x_noisy, const Volume& x_clean,
                                 const GradCheckOptions& opt = {}) {
  const auto fr = forward(x_noisy, state);
  const GradientSet g = backward(fr.cache, fr.x_hat, x_clean, state);
  GradCheckReport report;
  report.instances = 1;
  const auto check = [&](const std::string& name, double analytic, const std::function<void(ModelState&, double)>& set) {
    ModelState plus = state, minus = state;
    set(plus, opt.h);
    set(minus, -opt.h);
    const double numeric = (total_loss(plus, x_noisy, x_clean) - total_loss(minus, x_noisy, x_clean)) / (2.0 * opt.h);
    const double tol = opt.rtol * std::max(std::abs(analytic), std::abs(numeric)) + opt.atol;
    report.entries.push_back({name, analytic, numeric, std::abs(analytic - numeric) <= tol});
  };
  for (std::size_t i = 0; i < state.params.size(); ++i) {
    if (!state.config.shared_params && !state.bank.is_active(i)) continue;
    const std::string owner = state.config.shared_params ? std::string("shared") : state.bank.name(i);
    const SpectralParams& p = state.params[i];
    const auto with_values = [i](ModelState& s, double la, double ld, double ga, double th) {
      s.params[i] = SpectralParams::from_values(la, ld, ga, th);
    };
    check(owner + ".lambda_A", g.params[i].d_lambda_a, [&](ModelState& s, double d) {
      with_values(s, p.lambda_a() + d, p.lambda_d(), p.gamma(), p.theta);
    });
    check(owner + ".lambda_D", g.params[i].d_lambda_d, [&](ModelState& s, double d) {
      with_values(s, p.lambda_a(), p.lambda_d() + d, p.gamma(), p.theta);
    });
    check(owner + ".gamma", g.params[i].d_gamma, [&](ModelState& s, double d) {
      with_values(s, p.lambda_a(), p.lambda_d(), p.gamma() + d, p.theta);
    });
    check(owner + ".theta", g.params[i].d_theta, [&](ModelState& s, double d) { s.params[i].theta += d; });
  }
  for (std::size_t k : state.bank.active_indices()) {
    check(state.bank.name(k) + ".logit", g.d_logits[k], [k](ModelState& s, double d) { s.bank.logits()[k] += d; });
  }
  return report;
}

/// Random instances: `trials` volumes of `dims`, 2 or 3 bases drawn from
/// `bases`, random thresholds (a fraction of the coefficient scale so the
/// dead zone is populated), gains, phases and logits. Instances with a
/// coefficient within 10h of a threshold are redrawn, since the loss has a
/// kink there and central differences are meaningless.
inline GradCheckReport gradcheck_suite(const std::vector<FilterBank>& bases, const TrainConfig& config, Dims dims,
                                       std::size_t trials, std::uint64_t seed, const GradCheckOptions& opt = {}) {
  std::vector<FilterBank> valid;
  for (const auto& fb : bases) {
    if (validate_basis(fb, dims, config.boundary)) valid.push_back(fb);
  }
  if (valid.empty()) throw ConfigError("gradcheck: no basis is valid for dims " + dims.str());
  GradCheckReport report;
  std::mt19937_64 rng(derive_seed(seed, 0x6c4ec));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t done = 0;
  while (done < trials) {
    if (report.resampled > 100 * trials + 100) throw NumericalError("gradcheck: could not draw kink-free instances");
    std::vector<FilterBank> pick;
    const std::size_t n_bases = std::min<std::size_t>(valid.size(), 2 + (done % 2));
    const std::size_t first = static_cast<std::size_t>(rng() % valid.size());
    for (std::size_t j = 0; j < n_bases; ++j) pick.push_back(valid[(first + j) % valid.size()]);
    ModelState state = make_state(pick, config);
    state.dilation = config.max_dilation > 0 ? static_cast<int>(done % (config.max_dilation + 1)) : 0;
    for (auto& a : state.bank.logits()) a = normal(rng);
    for (auto& p : state.params) {
      p = SpectralParams::from_values(0.2 + 0.6 * unit(rng), 0.2 + 0.6 * unit(rng), 0.5 + 1.5 * unit(rng),
                                      -1.0 + 2.0 * unit(rng));
    }
    Volume clean(dims), noisy(dims);
    for (std::size_t n = 0; n < clean.size(); ++n) {
      clean[n] = normal(rng);
      noisy[n] = clean[n] + 0.5 * normal(rng);
    }
    if (kink_margin(state, noisy) < 10.0 * opt.h) {
      ++report.resampled;
      continue;
    }
    const auto r = gradcheck(state, noisy, clean, opt);
    report.entries.insert(report.entries.end(), r.entries.begin(), r.entries.end());
    ++report.instances;
    ++done;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Training loop
// ---------------------------------------------------------------------------

struct EpochMetrics {
  int epoch = 0;
  double total_loss = 0.0;  // mean training objective over the epoch's batches
  double train_mse = 0.0;
  double mse = 0.0;  // validation MSE after the epoch
  double psnr = 0.0;
  double noisy_mse = 0.0;  // validation MSE of the noisy input itself
  double entropy = 0.0;    // sum_k w_k log w_k of the active weights
  double prune_penalty = 0.0;
  std::vector<std::pair<std::string, double>> weights;  // every basis; 0 when pruned
  std::vector<std::string> active;
  int dilation = 0;
  std::vector<std::string> pruned;
  double wall_seconds = 0.0;
};

struct PruneRecord {
  std::uint64_t step = 0;
  int epoch = 0;
  PruneEvent event;
};

struct ValidationSet {
  std::vector<Volume> clean;
  std::vector<Volume> noisy;
};

struct TrainResult {
  ModelState state;
  std::vector<EpochMetrics> metrics;
  std::vector<PruneRecord> prune_log;
  double sigma = 0.0;  // absolute noise level used
};

struct EvalMetrics {
  double mse = 0.0;
  double psnr = 0.0;
  double noisy_mse = 0.0;
};

/// PSNR uses the mean MSE and the largest |x| over the clean validation volumes,
/// so every record satisfies psnr = 10 log10(peak^2 / mse).
inline EvalMetrics evaluate(const ModelState& state, const ValidationSet& val) {
  EvalMetrics m;
  if (val.clean.empty()) return m;
  double peak = 0.0;
  for (std::size_t i = 0; i < val.clean.size(); ++i) {
    const Volume x_hat = forward(val.noisy[i], state).x_hat;
    m.mse += mean_squared_error(x_hat, val.clean[i]);
    m.noisy_mse += mean_squared_error(val.noisy[i], val.clean[i]);
    peak = std::max(peak, val.clean[i].max_abs());
  }
  const double n = static_cast<double>(val.clean.size());
  m.mse /= n;
  m.noisy_mse /= n;
  m.psnr = psnr_from_mse(m.mse, peak);
  return m;
}

/// Deterministic train/validation split and noise streams shared by training and evaluation.
struct DataSplit {
  std::vector<Volume> train;
  ValidationSet val;
  double sigma = 0.0;
};

inline DataSplit split_dataset(const std::vector<Volume>& dataset, const TrainConfig& config) {
  if (dataset.size() < 2) throw ConfigError("dataset needs at least 2 volumes for a train/validation split");
  const auto n = dataset.size();
  std::size_t n_val = static_cast<std::size_t>(std::llround(config.val_fraction * static_cast<double>(n)));
  n_val = std::clamp<std::size_t>(n_val, 1, n - 1);
  DataSplit s;
  s.train.assign(dataset.begin(), dataset.end() - static_cast<std::ptrdiff_t>(n_val));
  s.val.clean.assign(dataset.end() - static_cast<std::ptrdiff_t>(n_val), dataset.end());
  s.sigma = config.noise_relative ? config.noise_sigma * dataset_std(s.train) : config.noise_sigma;
  for (std::size_t i = 0; i < s.val.clean.size(); ++i) {
    s.val.noisy.push_back(add_noise(s.val.clean[i], s.sigma, derive_seed(config.seed, i, 0x7a1)));
  }
  return s;
}

/// Initial thresholds: lambda_init_scale * std of the coefficients of the first batch.
inline void initialize_thresholds(ModelState& state, std::span<const Volume> first_batch) {
  const auto coeff_std = [&](std::span<const std::size_t> bases) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (std::size_t k : bases) {
      for (const Volume& x : first_batch) {
        dwt3d(x, state.bank.basis(k), state.config.boundary, state.dilation)
            .for_each_block([&](std::size_t, Subband, const Volume& v) {
              for (double c : v.values()) {
                sum += c;
                sq += c * c;
              }
              n += v.size();
            });
      }
    }
    if (n == 0) return 0.0;
    const double mean = sum / static_cast<double>(n);
    return std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
  };
  const double scale = state.config.lambda_init_scale;
  if (state.config.shared_params) {
    const auto all = state.bank.active_indices();
    const double lam = scale * coeff_std(all);
    state.params[0] = SpectralParams::from_values(lam, lam, 1.0, 0.0);
  } else {
    for (std::size_t k = 0; k < state.bank.size(); ++k) {
      const std::size_t one[1] = {k};
      const double lam = scale * coeff_std(one);
      state.params[k] = SpectralParams::from_values(lam, lam, 1.0, 0.0);
    }
  }
  state.version += 1;
}

/// Per-sample forward/backward over a batch; returns (mean gradients, mean loss, mean mse).
struct BatchResult {
  GradientSet grads;
  double loss = 0.0;
  double mse = 0.0;
};

inline BatchResult run_batch(const ModelState& state, std::span<const Volume> noisy, std::span<const Volume> clean) {
  struct Sample {
    GradientSet g;
    double loss = 0.0;
    double mse = 0.0;
  };
  const auto one = [&](std::size_t i) {
    auto fr = forward(noisy[i], state);
    Sample s;
    s.mse = mean_squared_error(fr.x_hat, clean[i]);
    s.loss = loss(fr.x_hat, clean[i], fr.cache.weights, state.config.beta);
    s.g = backward(fr.cache, fr.x_hat, clean[i], state);
    return s;
  };
  std::vector<Sample> samples(noisy.size());
  const std::size_t threads = std::max<std::size_t>(1, state.config.threads);
  if (threads == 1 || noisy.size() == 1) {
    for (std::size_t i = 0; i < noisy.size(); ++i) samples[i] = one(i);
  } else {
    std::vector<std::future<void>> jobs;
    for (std::size_t t = 0; t < std::min(threads, noisy.size()); ++t) {
      jobs.push_back(std::async(std::launch::async, [&, t] {
        for (std::size_t i = t; i < noisy.size(); i += threads) samples[i] = one(i);
      }));
    }
    for (auto& j : jobs) j.get();
  }
  // Fixed-order reduction keeps results independent of the thread count.
  BatchResult r{zero_gradients(state), 0.0, 0.0};
  for (const auto& s : samples) {
    r.grads += s.g;
    r.loss += s.loss;
    r.mse += s.mse;
  }
  const double inv = 1.0 / static_cast<double>(samples.size());
  r.grads *= inv;
  r.loss *= inv;
  r.mse *= inv;
  return r;
}

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Runs once after initialization with the first noisy training batch; may
/// change the active set (for example from a rule program).
using InitHook = std::function<void(ModelState&, std::span<const Volume>)>;

inline TrainResult train(const std::vector<Volume>& dataset, const std::vector<FilterBank>& candidates,
                         const TrainConfig& config, const EpochCallback& on_epoch = {},
                         const InitHook& on_init = {}) {
  config.validate();
  if (dataset.empty()) throw ConfigError("empty dataset");
  const Dims dims = dataset.front().dims();
  for (const auto& v : dataset) {
    if (v.dims() != dims) throw ShapeError("all dataset volumes must share dims");
  }
  std::vector<FilterBank> valid;
  for (const auto& fb : candidates) {
    if (validate_basis(fb, dims, config.boundary)) valid.push_back(fb);
  }
  if (valid.empty()) throw ConfigError("no candidate basis is valid for volume dims " + dims.str());

  DataSplit split = split_dataset(dataset, config);
  TrainResult result;
  result.sigma = split.sigma;
  result.state = make_state(valid, config);
  ModelState& state = result.state;

  const std::size_t n_train = split.train.size();
  const auto noisy_train = [&](int epoch) {
    const std::uint64_t stream = config.fixed_noise ? 0 : static_cast<std::uint64_t>(epoch) + 1;
    std::vector<Volume> out;
    out.reserve(n_train);
    for (std::size_t i = 0; i < n_train; ++i) {
      out.push_back(add_noise(split.train[i], split.sigma, derive_seed(config.seed, i, stream)));
    }
    return out;
  };

  state.dilation = dilation_schedule(0, config.dilation_interval, config.max_dilation);
  {
    const auto first = noisy_train(0);
    const std::size_t b = std::min(config.batch_size, n_train);
    initialize_thresholds(state, std::span<const Volume>(first.data(), b));
    if (on_init) {
      on_init(state, std::span<const Volume>(first.data(), b));
      state.version += 1;
    }
  }

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const int s = dilation_schedule(epoch, config.dilation_interval, config.max_dilation);
    if (s != state.dilation) {
      state.dilation = s;
      state.version += 1;
    }
    const auto noisy = noisy_train(epoch);
    double loss_sum = 0.0, mse_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n_train; start += config.batch_size) {
      const std::size_t len = std::min(config.batch_size, n_train - start);
      const auto br = run_batch(state, std::span<const Volume>(noisy.data() + start, len),
                                std::span<const Volume>(split.train.data() + start, len));
      if (!std::isfinite(br.loss)) throw NumericalError("training loss became non-finite");
      loss_sum += br.loss;
      mse_sum += br.mse;
      ++batches;
      adam_step(state, br.grads);
      state.bank.push_history();
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.dilation = state.dilation;
    for (auto& ev : prune_step(state.bank, config.prune_tau, config.prune_window)) {
      m.pruned.push_back(ev.basis);
      result.prune_log.push_back({state.adam.step, epoch, std::move(ev)});
    }
    if (!m.pruned.empty()) state.version += 1;

    m.total_loss = loss_sum / static_cast<double>(batches);
    m.train_mse = mse_sum / static_cast<double>(batches);
    const EvalMetrics ev = evaluate(state, split.val);
    m.mse = ev.mse;
    m.psnr = ev.psnr;
    m.noisy_mse = ev.noisy_mse;
    const auto w = state.bank.weights();
    m.entropy = entropy_term(w);
    m.prune_penalty = prune_penalty(w, config.prune_tau, config.lambda_prune);
    const auto full = state.bank.full_weights();
    for (std::size_t k = 0; k < state.bank.size(); ++k) {
      m.weights.emplace_back(state.bank.name(k), full[k]);
      if (state.bank.is_active(k)) m.active.push_back(state.bank.name(k));
    }
    if (!std::isfinite(m.mse)) throw NumericalError("validation MSE became non-finite");
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (on_epoch) on_epoch(m);
    result.metrics.push_back(std::move(m));
  }
  return result;
}

}  // namespace wavespec
