// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "wavespec/errors.hpp"
#include "wavespec/filter_bank.hpp"
#include "wavespec/volume.hpp"

namespace wavespec {

/// Signal extension used by the analysis filters.
///
/// periodic: circular wrap, coefficient count N/2 per band; the transform is
/// orthogonal for orthogonal banks.
/// symmetric: half-sample mirror extension, coefficient count (N+L-1)/2 per band
/// (expansive for filters longer than 2). Synthesis crops to the signal support.
enum class Boundary { periodic, symmetric };

inline std::string_view to_string(Boundary b) { return b == Boundary::periodic ? "periodic" : "symmetric"; }

inline Boundary boundary_from_string(std::string_view s) {
  if (s == "periodic") return Boundary::periodic;
  if (s == "symmetric") return Boundary::symmetric;
  throw ConfigError("unknown boundary mode '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Subband labels
// ---------------------------------------------------------------------------

/// One of the 8 separable low/high combinations. Label characters are ordered
/// (depth, height, width); 'a' is low-pass, 'h' is high-pass.
enum class Subband : std::uint8_t { aaa, aah, aha, haa, ahh, hah, hha, hhh };

inline constexpr std::array<Subband, 8> kAllSubbands{Subband::aaa, Subband::aah, Subband::aha, Subband::haa,
                                                     Subband::ahh, Subband::hah, Subband::hha, Subband::hhh};
inline constexpr std::array<Subband, 7> kDetailSubbands{Subband::aah, Subband::aha, Subband::haa, Subband::ahh,
                                                        Subband::hah, Subband::hha, Subband::hhh};

inline constexpr std::string_view label(Subband s) {
  constexpr std::array<std::string_view, 8> names{"aaa", "aah", "aha", "haa", "ahh", "hah", "hha", "hhh"};
  return names[static_cast<std::size_t>(s)];
}

inline std::optional<Subband> subband_from_label(std::string_view text) {
  for (Subband s : kAllSubbands) {
    if (label(s) == text) return s;
  }
  return std::nullopt;
}

/// Bit 2 = depth high-pass, bit 1 = height, bit 0 = width.
inline constexpr unsigned axis_bit(std::size_t axis) { return 1u << (2 - axis); }

inline constexpr unsigned subband_mask(Subband s) {
  const std::string_view l = label(s);
  return (l[0] == 'h' ? 4u : 0u) | (l[1] == 'h' ? 2u : 0u) | (l[2] == 'h' ? 1u : 0u);
}

inline constexpr Subband subband_from_mask(unsigned mask) {
  for (Subband s : kAllSubbands) {
    if (subband_mask(s) == mask) return s;
  }
  return Subband::aaa;
}

inline constexpr bool is_detail(Subband s) { return s != Subband::aaa; }

// ---------------------------------------------------------------------------
// Coefficient containers
// ---------------------------------------------------------------------------

/// Blocks of one decomposition level, indexed by Subband.
struct WaveletLevel {
  std::array<std::optional<Volume>, 8> blocks;

  bool has(Subband s) const { return blocks[static_cast<std::size_t>(s)].has_value(); }

  const Volume& at(Subband s) const {
    const auto& b = blocks[static_cast<std::size_t>(s)];
    if (!b) throw StructureError("missing subband '" + std::string(label(s)) + "'");
    return *b;
  }

  Volume& at(Subband s) {
    auto& b = blocks[static_cast<std::size_t>(s)];
    if (!b) throw StructureError("missing subband '" + std::string(label(s)) + "'");
    return *b;
  }

  void set(Subband s, Volume v) { blocks[static_cast<std::size_t>(s)] = std::move(v); }
};

/// Output of a (multi-level) 3D transform. levels[0] is the finest level; only
/// the deepest level carries the 'aaa' block.
struct WaveletCoeffs {
  std::vector<WaveletLevel> levels;
  std::string basis;
  Boundary boundary = Boundary::periodic;
  int dilation = 0;

  std::size_t level_count() const { return levels.size(); }

  template <class Fn>
  void for_each_block(Fn&& fn) const {
    for (std::size_t l = 0; l < levels.size(); ++l) {
      for (Subband s : kAllSubbands) {
        if (levels[l].has(s)) fn(l, s, levels[l].at(s));
      }
    }
  }

  template <class Fn>
  void for_each_block(Fn&& fn) {
    for (std::size_t l = 0; l < levels.size(); ++l) {
      for (Subband s : kAllSubbands) {
        if (levels[l].has(s)) fn(l, s, levels[l].at(s));
      }
    }
  }

  double energy() const {
    double e = 0.0;
    for_each_block([&](std::size_t, Subband, const Volume& v) { e += v.sum_squares(); });
    return e;
  }
};

/// Blockwise inner product; both sets must share the same block structure.
inline double dot(const WaveletCoeffs& a, const WaveletCoeffs& b) {
  if (a.levels.size() != b.levels.size()) throw StructureError("dot: level count mismatch");
  double s = 0.0;
  for (std::size_t l = 0; l < a.levels.size(); ++l) {
    for (Subband sb : kAllSubbands) {
      if (a.levels[l].has(sb) != b.levels[l].has(sb)) throw StructureError("dot: block structure mismatch");
      if (a.levels[l].has(sb)) s += dot(a.levels[l].at(sb), b.levels[l].at(sb));
    }
  }
  return s;
}

/// Same structure as `like`, every block filled with zeros.
inline WaveletCoeffs zeros_like(const WaveletCoeffs& like) {
  WaveletCoeffs out = like;
  out.for_each_block([](std::size_t, Subband, Volume& v) { v *= 0.0; });
  return out;
}

// ---------------------------------------------------------------------------
// 1D line machinery
// ---------------------------------------------------------------------------

namespace detail {

enum class IndexMode { wrap, reflect, drop };

/// Placement of a filter over a line: coefficient n reads signal positions
/// stride*n + offset + spacing*k for k in [0, L).
struct LinePlan {
  std::size_t signal_len = 0;
  std::size_t coeff_len = 0;
  std::size_t stride = 2;
  std::size_t spacing = 1;
  std::ptrdiff_t offset = 0;
  double synthesis_scale = 1.0;
  IndexMode analysis_mode = IndexMode::wrap;
  IndexMode synthesis_mode = IndexMode::wrap;
};

inline std::size_t dilation_spacing(int dilation) {
  if (dilation < 0) throw ShapeError("dilation must be nonnegative, got " + std::to_string(dilation));
  if (dilation > 20) throw ShapeError("dilation " + std::to_string(dilation) + " is unreasonably large");
  return std::size_t{1} << dilation;
}

inline LinePlan make_plan(std::size_t n, std::size_t m, std::size_t taps, Boundary boundary, int dilation) {
  LinePlan p;
  p.signal_len = n;
  p.coeff_len = m;
  if (dilation == 0) {
    p.stride = 2;
    p.spacing = 1;
    p.synthesis_scale = 1.0;
    p.offset = boundary == Boundary::periodic ? 0 : -static_cast<std::ptrdiff_t>(taps) + 2;
  } else {
    p.stride = 1;
    p.spacing = dilation_spacing(dilation);
    p.synthesis_scale = 0.5;
    p.offset = boundary == Boundary::periodic ? 0 : -static_cast<std::ptrdiff_t>(p.spacing * (taps - 1));
  }
  p.analysis_mode = boundary == Boundary::periodic ? IndexMode::wrap : IndexMode::reflect;
  p.synthesis_mode = boundary == Boundary::periodic ? IndexMode::wrap : IndexMode::drop;
  return p;
}

/// Plan for analysing a signal of length n.
inline LinePlan plan_for_signal(std::size_t n, std::size_t taps, Boundary boundary, int dilation) {
  if (n == 0) throw ShapeError("cannot transform an empty signal");
  if (taps < 2 || taps % 2 != 0) throw ShapeError("filter length must be even and >= 2");
  const std::size_t spacing = dilation_spacing(dilation);
  std::size_t m = 0;
  if (dilation == 0) {
    if (n < 2 || n % 2 != 0) {
      throw ShapeError("decimating transform needs an even length >= 2, got " + std::to_string(n));
    }
    m = boundary == Boundary::periodic ? n / 2 : (n + taps - 1) / 2;
  } else {
    m = boundary == Boundary::periodic ? n : n + spacing * (taps - 1);
  }
  return make_plan(n, m, taps, boundary, dilation);
}

/// Plan recovering the signal length from a coefficient length m.
inline LinePlan plan_for_coeffs(std::size_t m, std::size_t taps, Boundary boundary, int dilation) {
  if (m == 0) throw ShapeError("cannot invert empty coefficient bands");
  const std::size_t spacing = dilation_spacing(dilation);
  std::size_t n = 0;
  if (dilation == 0) {
    if (boundary == Boundary::periodic) {
      n = 2 * m;
    } else {
      if (2 * m + 2 <= taps) throw ShapeError("coefficient band too short for filter length");
      n = 2 * m + 2 - taps;
    }
  } else {
    if (boundary == Boundary::periodic) {
      n = m;
    } else {
      if (m <= spacing * (taps - 1)) throw ShapeError("coefficient band too short for dilated filter");
      n = m - spacing * (taps - 1);
    }
  }
  return make_plan(n, m, taps, boundary, dilation);
}

/// Maps a virtual position into [0, n); returns -1 when the sample is dropped.
inline std::ptrdiff_t map_index(std::ptrdiff_t pos, std::size_t n, IndexMode mode) {
  const auto sn = static_cast<std::ptrdiff_t>(n);
  switch (mode) {
    case IndexMode::wrap: {
      std::ptrdiff_t r = pos % sn;
      return r < 0 ? r + sn : r;
    }
    case IndexMode::reflect: {
      // half-sample symmetric: ... x1 x0 | x0 x1 ... x_{n-1} | x_{n-1} ...
      const std::ptrdiff_t period = 2 * sn;
      std::ptrdiff_t r = pos % period;
      if (r < 0) r += period;
      return r < sn ? r : period - 1 - r;
    }
    case IndexMode::drop:
      return (pos < 0 || pos >= sn) ? -1 : pos;
  }
  return -1;
}

/// out[c] = sum_k f[k] * in[map(stride*c + offset + spacing*k)]
inline void analyze(std::span<const double> in, std::span<const double> f, const LinePlan& p, IndexMode mode,
                    std::span<double> out) {
  for (std::size_t c = 0; c < p.coeff_len; ++c) {
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(p.stride * c) + p.offset;
    double acc = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      const std::ptrdiff_t idx = map_index(base + static_cast<std::ptrdiff_t>(p.spacing * k), p.signal_len, mode);
      if (idx >= 0) acc += f[k] * in[static_cast<std::size_t>(idx)];
    }
    out[c] = acc;
  }
}

/// Transpose of analyze: out[map(...)] += scale * f[k] * in[c]. Accumulates into out.
inline void scatter(std::span<const double> in, std::span<const double> f, const LinePlan& p, IndexMode mode,
                    double scale, std::span<double> out) {
  for (std::size_t c = 0; c < p.coeff_len; ++c) {
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(p.stride * c) + p.offset;
    const double v = scale * in[c];
    for (std::size_t k = 0; k < f.size(); ++k) {
      const std::ptrdiff_t idx = map_index(base + static_cast<std::ptrdiff_t>(p.spacing * k), p.signal_len, mode);
      if (idx >= 0) out[static_cast<std::size_t>(idx)] += f[k] * v;
    }
  }
}

/// Which linear map a separable pass applies.
enum class LineOp {
  forward,          // signal -> (lo, hi)
  inverse_adjoint,  // signal -> (lo, hi), transpose of inverse
  inverse,          // (lo, hi) -> signal
  forward_adjoint,  // (lo, hi) -> signal, transpose of forward
};

inline void split_line(LineOp op, const FilterBank& fb, const LinePlan& p, std::span<const double> in,
                       std::span<double> lo, std::span<double> hi) {
  if (op == LineOp::forward) {
    analyze(in, fb.dec_lo, p, p.analysis_mode, lo);
    analyze(in, fb.dec_hi, p, p.analysis_mode, hi);
  } else {
    analyze(in, fb.rec_lo, p, p.synthesis_mode, lo);
    analyze(in, fb.rec_hi, p, p.synthesis_mode, hi);
    for (double& v : lo) v *= p.synthesis_scale;
    for (double& v : hi) v *= p.synthesis_scale;
  }
}

inline void merge_line(LineOp op, const FilterBank& fb, const LinePlan& p, std::span<const double> lo,
                       std::span<const double> hi, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  if (op == LineOp::inverse) {
    scatter(lo, fb.rec_lo, p, p.synthesis_mode, p.synthesis_scale, out);
    scatter(hi, fb.rec_hi, p, p.synthesis_mode, p.synthesis_scale, out);
  } else {
    scatter(lo, fb.dec_lo, p, p.analysis_mode, 1.0, out);
    scatter(hi, fb.dec_hi, p, p.analysis_mode, 1.0, out);
  }
}

inline Dims with_axis(Dims d, std::size_t axis, std::size_t len) {
  d[axis] = len;
  return d;
}

/// Applies split_line to every line of x along `axis`.
inline std::pair<Volume, Volume> split_axis(LineOp op, const FilterBank& fb, Boundary boundary, int dilation,
                                            const Volume& x, std::size_t axis) {
  const Dims dims = x.dims();
  const LinePlan plan = plan_for_signal(dims[axis], fb.length(), boundary, dilation);
  const Dims out_dims = with_axis(dims, axis, plan.coeff_len);
  Volume lo(out_dims), hi(out_dims);

  std::vector<double> line(dims[axis]), lo_line(plan.coeff_len), hi_line(plan.coeff_len);
  const std::size_t a1 = axis == 0 ? 1 : 0;
  const std::size_t a2 = axis == 2 ? 1 : 2;
  std::array<std::size_t, 3> ix{};
  for (ix[a1] = 0; ix[a1] < dims[a1]; ++ix[a1]) {
    for (ix[a2] = 0; ix[a2] < dims[a2]; ++ix[a2]) {
      for (ix[axis] = 0; ix[axis] < dims[axis]; ++ix[axis]) line[ix[axis]] = x(ix[0], ix[1], ix[2]);
      split_line(op, fb, plan, line, lo_line, hi_line);
      for (ix[axis] = 0; ix[axis] < plan.coeff_len; ++ix[axis]) {
        lo(ix[0], ix[1], ix[2]) = lo_line[ix[axis]];
        hi(ix[0], ix[1], ix[2]) = hi_line[ix[axis]];
      }
    }
  }
  return {std::move(lo), std::move(hi)};
}

inline Volume merge_axis(LineOp op, const FilterBank& fb, Boundary boundary, int dilation, const Volume& lo,
                         const Volume& hi, std::size_t axis) {
  if (lo.dims() != hi.dims()) {
    throw ShapeError("low/high blocks disagree: " + lo.dims().str() + " vs " + hi.dims().str());
  }
  const Dims dims = lo.dims();
  const LinePlan plan = plan_for_coeffs(dims[axis], fb.length(), boundary, dilation);
  Volume out(with_axis(dims, axis, plan.signal_len));

  std::vector<double> lo_line(plan.coeff_len), hi_line(plan.coeff_len), line(plan.signal_len);
  const std::size_t a1 = axis == 0 ? 1 : 0;
  const std::size_t a2 = axis == 2 ? 1 : 2;
  std::array<std::size_t, 3> ix{};
  for (ix[a1] = 0; ix[a1] < dims[a1]; ++ix[a1]) {
    for (ix[a2] = 0; ix[a2] < dims[a2]; ++ix[a2]) {
      for (ix[axis] = 0; ix[axis] < plan.coeff_len; ++ix[axis]) {
        lo_line[ix[axis]] = lo(ix[0], ix[1], ix[2]);
        hi_line[ix[axis]] = hi(ix[0], ix[1], ix[2]);
      }
      merge_line(op, fb, plan, lo_line, hi_line, line);
      for (ix[axis] = 0; ix[axis] < plan.signal_len; ++ix[axis]) out(ix[0], ix[1], ix[2]) = line[ix[axis]];
    }
  }
  return out;
}

inline void check_axis_order(const std::array<std::size_t, 3>& order) {
  std::array<bool, 3> seen{};
  for (std::size_t a : order) {
    if (a > 2 || seen[a]) throw ShapeError("axis order must be a permutation of (0, 1, 2)");
    seen[a] = true;
  }
}

/// Separable split of x into the 8 subbands of one level.
inline WaveletLevel split3d(LineOp op, const FilterBank& fb, Boundary boundary, int dilation, const Volume& x,
                            const std::array<std::size_t, 3>& order) {
  check_axis_order(order);
  std::vector<std::pair<unsigned, Volume>> parts;
  parts.emplace_back(0u, x);
  for (std::size_t axis : order) {
    std::vector<std::pair<unsigned, Volume>> next;
    next.reserve(parts.size() * 2);
    for (auto& [mask, v] : parts) {
      auto [lo, hi] = split_axis(op, fb, boundary, dilation, v, axis);
      next.emplace_back(mask, std::move(lo));
      next.emplace_back(mask | axis_bit(axis), std::move(hi));
    }
    parts = std::move(next);
  }
  WaveletLevel level;
  for (auto& [mask, v] : parts) level.set(subband_from_mask(mask), std::move(v));
  return level;
}

/// Inverse of split3d's structure: merges all 8 blocks back into one volume.
inline Volume merge3d(LineOp op, const FilterBank& fb, Boundary boundary, int dilation, const WaveletLevel& level,
                      const std::array<std::size_t, 3>& order) {
  check_axis_order(order);
  const Dims dims = level.at(Subband::aaa).dims();
  std::array<std::optional<Volume>, 8> parts;
  for (Subband s : kAllSubbands) {
    const Volume& b = level.at(s);
    if (b.dims() != dims) {
      throw ShapeError("subband '" + std::string(label(s)) + "' has dims " + b.dims().str() + ", expected " +
                       dims.str());
    }
    parts[subband_mask(s)] = b;
  }
  for (std::size_t i = 3; i-- > 0;) {
    const std::size_t axis = order[i];
    const unsigned bit = axis_bit(axis);
    for (unsigned mask = 0; mask < 8; ++mask) {
      if ((mask & bit) != 0 || !parts[mask]) continue;
      parts[mask] = merge_axis(op, fb, boundary, dilation, *parts[mask], *parts[mask | bit], axis);
      parts[mask | bit].reset();
    }
  }
  return std::move(*parts[0]);
}

inline void check_basis(const WaveletCoeffs& c, const FilterBank& fb) {
  if (!c.basis.empty() && c.basis != fb.name) {
    throw ContractError("coefficients were produced by basis '" + c.basis + "', not '" + fb.name + "'");
  }
}

inline constexpr std::array<std::size_t, 3> kDefaultAxisOrder{0, 1, 2};

}  // namespace detail

// ---------------------------------------------------------------------------
// 1D transforms
// ---------------------------------------------------------------------------

struct Bands1d {
  std::vector<double> approx;
  std::vector<double> detail;
};

/// Single-level 1D analysis. dilation > 0 selects the undecimated (a trous)
/// transform with 2^dilation - 1 zeros between taps.
inline Bands1d dwt1d(std::span<const double> signal, const FilterBank& fb, Boundary boundary = Boundary::periodic,
                     int dilation = 0) {
  const auto plan = detail::plan_for_signal(signal.size(), fb.length(), boundary, dilation);
  Bands1d out{std::vector<double>(plan.coeff_len), std::vector<double>(plan.coeff_len)};
  detail::split_line(detail::LineOp::forward, fb, plan, signal, out.approx, out.detail);
  return out;
}

inline std::vector<double> idwt1d(std::span<const double> approx, std::span<const double> detail,
                                  const FilterBank& fb, Boundary boundary = Boundary::periodic, int dilation = 0) {
  if (approx.size() != detail.size()) {
    throw ShapeError("approx/detail length mismatch: " + std::to_string(approx.size()) + " vs " +
                     std::to_string(detail.size()));
  }
  const auto plan = detail::plan_for_coeffs(approx.size(), fb.length(), boundary, dilation);
  std::vector<double> out(plan.signal_len);
  detail::merge_line(detail::LineOp::inverse, fb, plan, approx, detail, out);
  return out;
}

// ---------------------------------------------------------------------------
// 3D transforms
// ---------------------------------------------------------------------------

/// One-level separable 3D analysis, axes processed in `order` (default depth,
/// height, width).
inline WaveletCoeffs dwt3d(const Volume& x, const FilterBank& fb, Boundary boundary = Boundary::periodic,
                           int dilation = 0,
                           const std::array<std::size_t, 3>& order = detail::kDefaultAxisOrder) {
  if (x.empty()) throw ShapeError("cannot transform an empty volume");
  WaveletCoeffs c;
  c.basis = fb.name;
  c.boundary = boundary;
  c.dilation = dilation;
  c.levels.push_back(detail::split3d(detail::LineOp::forward, fb, boundary, dilation, x, order));
  return c;
}

/// Inverse of dwt3d; boundary and dilation are taken from the coefficient tags.
inline Volume idwt3d(const WaveletCoeffs& c, const FilterBank& fb,
                     const std::array<std::size_t, 3>& order = detail::kDefaultAxisOrder) {
  detail::check_basis(c, fb);
  if (c.levels.size() != 1) {
    throw StructureError("idwt3d expects a single level, got " + std::to_string(c.levels.size()));
  }
  return detail::merge3d(detail::LineOp::inverse, fb, c.boundary, c.dilation, c.levels[0], order);
}

/// Transpose of dwt3d: maps a coefficient-space vector back to signal space.
inline Volume dwt3d_adjoint(const WaveletCoeffs& c, const FilterBank& fb) {
  detail::check_basis(c, fb);
  if (c.levels.size() != 1) throw StructureError("dwt3d_adjoint expects a single level");
  return detail::merge3d(detail::LineOp::forward_adjoint, fb, c.boundary, c.dilation, c.levels[0],
                         detail::kDefaultAxisOrder);
}

/// Transpose of idwt3d: pulls a signal-space gradient back onto the coefficients.
/// For orthogonal banks with periodic boundary this coincides with dwt3d.
inline WaveletCoeffs idwt3d_adjoint(const Volume& g, const FilterBank& fb, Boundary boundary, int dilation) {
  WaveletCoeffs c;
  c.basis = fb.name;
  c.boundary = boundary;
  c.dilation = dilation;
  c.levels.push_back(
      detail::split3d(detail::LineOp::inverse_adjoint, fb, boundary, dilation, g, detail::kDefaultAxisOrder));
  return c;
}

/// Recursive decimating decomposition: each level transforms the previous 'aaa'.
inline WaveletCoeffs dwt3d_multilevel(const Volume& x, const FilterBank& fb, Boundary boundary, std::size_t levels) {
  if (levels == 0) throw ShapeError("multilevel transform needs at least one level");
  static constexpr std::array<const char*, 3> kAxisNames{"depth", "height", "width"};
  const std::size_t div = std::size_t{1} << levels;
  for (std::size_t a = 0; a < 3; ++a) {
    if (x.dims()[a] % div != 0) {
      throw ShapeError(std::string(kAxisNames[a]) + " axis of length " + std::to_string(x.dims()[a]) +
                       " is not divisible by 2^" + std::to_string(levels));
    }
  }
  WaveletCoeffs c;
  c.basis = fb.name;
  c.boundary = boundary;
  c.dilation = 0;
  Volume current = x;
  for (std::size_t l = 0; l < levels; ++l) {
    WaveletLevel level = detail::split3d(detail::LineOp::forward, fb, boundary, 0, current, detail::kDefaultAxisOrder);
    if (l + 1 < levels) {
      current = std::move(level.at(Subband::aaa));
      level.blocks[static_cast<std::size_t>(Subband::aaa)].reset();
    }
    c.levels.push_back(std::move(level));
  }
  return c;
}

inline Volume idwt3d_multilevel(const WaveletCoeffs& c, const FilterBank& fb) {
  detail::check_basis(c, fb);
  if (c.levels.empty()) throw StructureError("no levels to invert");
  if (c.dilation != 0) throw StructureError("multilevel inverse supports decimating coefficients only");
  Volume approx = c.levels.back().at(Subband::aaa);
  for (std::size_t l = c.levels.size(); l-- > 0;) {
    WaveletLevel level;
    level.set(Subband::aaa, std::move(approx));
    for (Subband s : kDetailSubbands) level.set(s, c.levels[l].at(s));
    approx = detail::merge3d(detail::LineOp::inverse, fb, c.boundary, 0, level, detail::kDefaultAxisOrder);
  }
  return approx;
}

/// Candidate filtering: true iff a forward/inverse round trip on a probe volume
/// of `dims` reproduces the dims exactly and the values within 1e-8.
inline bool validate_basis(const FilterBank& fb, const Dims& dims, Boundary boundary = Boundary::periodic,
                           int dilation = 0) {
  try {
    Volume probe(dims);
    for (std::size_t n = 0; n < probe.size(); ++n) {
      probe[n] = std::sin(0.37 * static_cast<double>(n) + 0.1) + 0.25 * std::cos(1.7 * static_cast<double>(n));
    }
    const Volume back = idwt3d(dwt3d(probe, fb, boundary, dilation), fb);
    return back.dims() == dims && max_abs_diff(back, probe) < 1e-8;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace wavespec
