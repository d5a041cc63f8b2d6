// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors

#pragma once

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "wavespec/errors.hpp"

namespace wavespec {

/// Two-channel filter bank for one wavelet basis.
///
/// All taps are stored in correlation form with the filter origin at tap 0:
/// analysis computes y[n] = sum_k f[k] * x[2n + k] and keeps even positions.
/// rec_lo / rec_hi are the dual analysis filters; synthesis applies their
/// transpose. For orthogonal banks the duals equal the analysis filters.
struct FilterBank {
  std::string name;
  std::vector<double> dec_lo;
  std::vector<double> dec_hi;
  std::vector<double> rec_lo;
  std::vector<double> rec_hi;
  bool orthogonal = true;

  std::size_t length() const { return dec_lo.size(); }
};

/// High-pass from low-pass by alternating-sign reversal: g[k] = (-1)^k h[L-1-k].
inline std::vector<double> quadrature_mirror(const std::vector<double>& lo) {
  const std::size_t n = lo.size();
  std::vector<double> hi(n);
  for (std::size_t k = 0; k < n; ++k) hi[k] = ((k % 2 == 0) ? 1.0 : -1.0) * lo[n - 1 - k];
  return hi;
}

inline FilterBank make_orthogonal_bank(std::string name, std::vector<double> lo) {
  FilterBank fb;
  fb.name = std::move(name);
  fb.dec_hi = quadrature_mirror(lo);
  fb.rec_lo = lo;
  fb.rec_hi = fb.dec_hi;
  fb.dec_lo = std::move(lo);
  fb.orthogonal = true;
  return fb;
}

/// Biorthogonal bank from an analysis low-pass and its dual. The high-passes are
/// cross mirrors: dec_hi mirrors the dual low-pass and rec_hi mirrors the analysis one.
inline FilterBank make_biorthogonal_bank(std::string name, std::vector<double> lo, std::vector<double> dual_lo) {
  FilterBank fb;
  fb.name = std::move(name);
  fb.dec_hi = quadrature_mirror(dual_lo);
  fb.rec_hi = quadrature_mirror(lo);
  fb.dec_lo = std::move(lo);
  fb.rec_lo = std::move(dual_lo);
  fb.orthogonal = false;
  return fb;
}

inline FilterBank haar() {
  const double r = 1.0 / std::sqrt(2.0);
  return make_orthogonal_bank("haar", {r, r});
}

inline FilterBank db2() {
  const double s3 = std::sqrt(3.0);
  const double n = 4.0 * std::sqrt(2.0);
  return make_orthogonal_bank("db2", {(1.0 + s3) / n, (3.0 + s3) / n, (3.0 - s3) / n, (1.0 - s3) / n});
}

inline FilterBank db4() {
  return make_orthogonal_bank("db4", {0.23037781330889650086, 0.71484657055291564709, 0.63088076792985890788,
                                      -0.027983769416859854211, -0.18703481171909308408, 0.030841381835560763627,
                                      0.032883011666885199735, -0.010597401785069032105});
}

inline FilterBank sym4() {
  return make_orthogonal_bank("sym4", {0.032223100604051467872, -0.012603967262031303754, -0.099219543576633532585,
                                       0.2978577956053060514, 0.80373875180513208088, 0.49761866763277498998,
                                       -0.029635527646002491764, -0.075765714789502213228});
}

/// Biorthogonal 1.3: box synthesis low-pass against a 6-tap analysis low-pass.
inline FilterBank bior1_3() {
  const double a = std::sqrt(2.0) / 16.0;
  const double b = 1.0 / std::sqrt(2.0);
  return make_biorthogonal_bank("bior1.3", {-a, a, b, b, a, -a}, {0.0, 0.0, b, b, 0.0, 0.0});
}

/// Stable identifiers accepted by configs and the CLI.
inline const std::vector<std::string>& registered_basis_names() {
  static const std::vector<std::string> names{"haar", "db2", "db4", "sym4", "bior1.3"};
  return names;
}

inline FilterBank basis_by_name(std::string_view name) {
  if (name == "haar") return haar();
  if (name == "db2") return db2();
  if (name == "db4") return db4();
  if (name == "sym4") return sym4();
  if (name == "bior1.3") return bior1_3();
  throw LookupError("unknown wavelet basis '" + std::string(name) + "'");
}

inline std::vector<FilterBank> all_registered_bases() {
  std::vector<FilterBank> out;
  for (const auto& n : registered_basis_names()) out.push_back(basis_by_name(n));
  return out;
}

}  // namespace wavespec
