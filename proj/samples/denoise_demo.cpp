// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors
//
// Trains the adaptive basis mixture on each synthetic dataset kind and reports
// which basis wins, then reuses the trained model for a 3-layer cascade and a
// spectral-memory lookup.

#include <cstdio>

#include "wavespec/reasoning.hpp"
#include "wavespec/training.hpp"

using namespace wavespec;

int main() {
  const std::vector<FilterBank> candidates{haar(), db4(), sym4()};
  for (DatasetKind kind : {DatasetKind::piecewise_constant, DatasetKind::smooth_blobs}) {
    const auto data = gen_dataset({kind, 32, {8, 8, 8}, 7});
    TrainConfig cfg;
    cfg.seed = 7;
    const TrainResult r = train(data, candidates, cfg);
    const EpochMetrics& last = r.metrics.back();
    std::printf("%-18s val MSE %.5f (noisy %.5f), PSNR %.2f dB\n", std::string(to_string(kind)).c_str(), last.mse,
                last.noisy_mse, last.psnr);
    for (const auto& [name, w] : last.weights) std::printf("  %-6s w = %.3f\n", name.c_str(), w);
    for (const auto& p : r.prune_log) std::printf("  pruned %s at step %llu\n", p.event.basis.c_str(),
                                                  static_cast<unsigned long long>(p.step));

    const std::size_t best = r.state.bank.hard_select();
    const Volume noisy = add_noise(data.front(), r.sigma, 99);
    const CascadeResult c = cascade(noisy, r.state, 3);
    std::printf("  cascade (%s): MSE per depth", r.state.bank.name(best).c_str());
    for (std::size_t depth = 1; depth <= 3; ++depth) {
      std::printf(" %.5f", mean_squared_error(cascade(noisy, r.state, depth).output, data.front()));
    }
    std::printf("; final detail energy %.4f\n", c.layers.back().energy_out[7]);

    SpectralMemory<SpectralParams> memory;
    memory.insert(spectral_key(dwt3d(data[0], r.state.bank.basis(best)), 4), r.state.params_for(best));
    memory.insert(spectral_key(dwt3d(data[1], r.state.bank.basis(best)), 4), SpectralParams::identity());
    const auto hit = memory_conditioned_forward(noisy, r.state, memory, 4);
    std::printf("  memory lookup -> entry %zu (distance %.4f), MSE %.5f\n\n", hit.entry, hit.distance,
                mean_squared_error(hit.x_hat, data.front()));
  }
}
