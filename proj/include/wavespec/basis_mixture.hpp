// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "wavespec/errors.hpp"
#include "wavespec/filter_bank.hpp"
#include "wavespec/volume.hpp"

namespace wavespec {

/// Numerically stable softmax.
inline std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> w(logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    w[k] = std::exp(logits[k] - m);
    z += w[k];
  }
  for (double& v : w) v /= z;
  return w;
}

/// sum_k w_k log w_k, with 0 log 0 = 0. Lies in [-log K, 0].
inline double entropy_term(std::span<const double> w) {
  double s = 0.0;
  for (double v : w) {
    if (v > 0.0) s += v * std::log(v);
  }
  return s;
}

/// Gradient of entropy_term(softmax(logits)) with respect to the logits:
/// w_j (log w_j - sum_k w_k log w_k).
inline std::vector<double> entropy_grad_logits(std::span<const double> logits) {
  const auto w = softmax(logits);
  const double e = entropy_term(w);
  std::vector<double> g(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) g[j] = w[j] > 0.0 ? w[j] * (std::log(w[j]) - e) : 0.0;
  return g;
}

/// Pulls dL/dw back through the softmax: dL/dalpha_j = w_j (dL/dw_j - sum_k w_k dL/dw_k).
inline std::vector<double> softmax_backward(std::span<const double> w, std::span<const double> dl_dw) {
  double inner = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) inner += w[k] * dl_dw[k];
  std::vector<double> g(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) g[j] = w[j] * (dl_dw[j] - inner);
  return g;
}

/// Convex combination sum_k w_k x_k.
inline Volume combine(std::span<const Volume> reconstructions, std::span<const double> w) {
  if (reconstructions.empty()) throw ShapeError("combine: no reconstructions");
  if (reconstructions.size() != w.size()) {
    throw ShapeError("combine: " + std::to_string(reconstructions.size()) + " reconstructions but " +
                     std::to_string(w.size()) + " weights");
  }
  Volume out(reconstructions.front().dims());
  for (std::size_t k = 0; k < w.size(); ++k) out.axpy(w[k], reconstructions[k]);
  return out;
}

/// lambda_prune * #{k : w_k < tau}. A loss-side indicator; it carries no gradient.
inline double prune_penalty(std::span<const double> w, double tau, double lambda_prune) {
  const auto below = std::count_if(w.begin(), w.end(), [tau](double v) { return v < tau; });
  return lambda_prune * static_cast<double>(below);
}

/// Candidate bases with their selection logits, activity mask and the recent
/// weight history used for pruning. Owned by exactly one training loop.
class BasisBank {
 public:
  BasisBank() = default;

  explicit BasisBank(std::vector<FilterBank> bases, std::size_t history_window = 50)
      : bases_(std::move(bases)),
        logits_(bases_.size(), 0.0),
        active_(bases_.size(), true),
        history_(bases_.size()),
        window_(history_window) {
    if (bases_.empty()) throw ConfigError("basis bank needs at least one basis");
    if (window_ == 0) throw ConfigError("prune window must be >= 1");
  }

  std::size_t size() const { return bases_.size(); }
  const FilterBank& basis(std::size_t k) const { return bases_.at(k); }
  const std::vector<FilterBank>& bases() const { return bases_; }
  const std::string& name(std::size_t k) const { return bases_.at(k).name; }

  std::vector<double>& logits() { return logits_; }
  const std::vector<double>& logits() const { return logits_; }

  bool is_active(std::size_t k) const { return active_.at(k); }
  const std::vector<bool>& active_mask() const { return active_; }

  std::size_t active_count() const { return static_cast<std::size_t>(std::count(active_.begin(), active_.end(), true)); }

  /// Indices of active bases in bank order.
  std::vector<std::size_t> active_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < active_.size(); ++k) {
      if (active_[k]) idx.push_back(k);
    }
    return idx;
  }

  /// Softmax over the active logits, one entry per active basis.
  std::vector<double> weights() const {
    std::vector<double> a;
    for (std::size_t k : active_indices()) a.push_back(logits_[k]);
    return softmax(a);
  }

  /// Softmax weights scattered to bank positions; inactive bases get 0.
  std::vector<double> full_weights() const {
    std::vector<double> full(size(), 0.0);
    const auto idx = active_indices();
    const auto w = weights();
    for (std::size_t i = 0; i < idx.size(); ++i) full[idx[i]] = w[i];
    return full;
  }

  /// Returns false when refusing to deactivate the last active basis.
  bool set_active(std::size_t k, bool on) {
    if (!on && active_.at(k) && active_count() == 1) return false;
    active_.at(k) = on;
    if (!on) history_.at(k).clear();
    return true;
  }

  std::size_t find(const std::string& name) const {
    for (std::size_t k = 0; k < bases_.size(); ++k) {
      if (bases_[k].name == name) return k;
    }
    return npos;
  }

  std::size_t window() const { return window_; }
  const std::deque<double>& history(std::size_t k) const { return history_.at(k); }

  /// Records the current weights of every active basis.
  void push_history() {
    const auto full = full_weights();
    for (std::size_t k = 0; k < size(); ++k) {
      if (!active_[k]) continue;
      history_[k].push_back(full[k]);
      while (history_[k].size() > window_) history_[k].pop_front();
    }
  }

  void set_history(std::size_t k, std::deque<double> h) {
    while (h.size() > window_) h.pop_front();
    history_.at(k) = std::move(h);
  }

  /// Index of the largest active weight; the inference-time hard selection.
  std::size_t hard_select() const {
    std::size_t best = npos;
    for (std::size_t k : active_indices()) {
      if (best == npos || logits_[k] > logits_[best]) best = k;
    }
    return best;
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  std::vector<FilterBank> bases_;
  std::vector<double> logits_;
  std::vector<bool> active_;
  std::vector<std::deque<double>> history_;
  std::size_t window_ = 50;
};

/// One deactivation, as written to the prune event log.
struct PruneEvent {
  std::size_t basis_index = 0;
  std::string basis;
  std::vector<double> window_weights;
};

/// Deactivates every active basis whose last `window` recorded weights are all
/// below tau. Never empties the bank: if every active basis qualifies, the one
/// with the largest current logit survives.
inline std::vector<PruneEvent> prune_step(BasisBank& bank, double tau, std::size_t window) {
  std::vector<std::size_t> candidates;
  for (std::size_t k : bank.active_indices()) {
    const auto& h = bank.history(k);
    if (window == 0 || h.size() < window) continue;
    const bool all_below = std::all_of(h.end() - static_cast<std::ptrdiff_t>(window), h.end(),
                                       [tau](double v) { return v < tau; });
    if (all_below) candidates.push_back(k);
  }
  if (candidates.size() == bank.active_count()) {
    std::size_t keep = candidates.front();
    for (std::size_t k : candidates) {
      if (bank.logits()[k] > bank.logits()[keep]) keep = k;
    }
    std::erase(candidates, keep);
  }
  std::vector<PruneEvent> events;
  for (std::size_t k : candidates) {
    const auto& h = bank.history(k);
    PruneEvent ev{k, bank.name(k), std::vector<double>(h.end() - static_cast<std::ptrdiff_t>(window), h.end())};
    bank.set_active(k, false);
    events.push_back(std::move(ev));
  }
  return events;
}

}  // namespace wavespec
