// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors

#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "wavespec/errors.hpp"
#include "wavespec/volume.hpp"

namespace wavespec {

// ---------------------------------------------------------------------------
// Seeding
// ---------------------------------------------------------------------------

/// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b = 0) {
  return mix_seed(mix_seed(mix_seed(base) ^ a) ^ (b * 0x2545f4914f6cdd1dULL));
}

// ---------------------------------------------------------------------------
// Noise and metrics
// ---------------------------------------------------------------------------

/// x + eps with eps ~ N(0, sigma^2 I) drawn from a generator seeded with `seed`.
inline Volume add_noise(const Volume& x, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ConfigError("noise sigma must be >= 0");
  Volume out = x;
  if (sigma == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, sigma);
  for (double& v : out.values()) v += dist(rng);
  return out;
}

inline double psnr_from_mse(double mse, double peak) {
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

/// 10 log10(peak^2 / mse) with peak = max |x_clean|; +inf when the inputs agree.
inline double psnr(const Volume& x_hat, const Volume& x_clean) {
  return psnr_from_mse(mean_squared_error(x_hat, x_clean), x_clean.max_abs());
}

/// Population standard deviation over every voxel of every volume.
inline double dataset_std(const std::vector<Volume>& vols) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& v : vols) {
    for (double x : v.values()) {
      sum += x;
      sq += x * x;
    }
    n += v.size();
  }
  if (n == 0) return 0.0;
  const double mean = sum / static_cast<double>(n);
  return std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
}

// ---------------------------------------------------------------------------
// Synthetic datasets
// ---------------------------------------------------------------------------

enum class DatasetKind { piecewise_constant, smooth_blobs, mixed };

inline std::string_view to_string(DatasetKind k) {
  switch (k) {
    case DatasetKind::piecewise_constant:
      return "piecewise_constant";
    case DatasetKind::smooth_blobs:
      return "smooth_blobs";
    case DatasetKind::mixed:
      return "mixed";
  }
  return "?";
}

inline DatasetKind dataset_kind_from_string(std::string_view s) {
  if (s == "piecewise_constant") return DatasetKind::piecewise_constant;
  if (s == "smooth_blobs") return DatasetKind::smooth_blobs;
  if (s == "mixed") return DatasetKind::mixed;
  throw ConfigError("unknown dataset kind '" + std::string(s) + "'");
}

struct DatasetSpec {
  DatasetKind kind = DatasetKind::piecewise_constant;
  std::size_t count = 32;
  Dims dims{8, 8, 8};
  std::uint64_t seed = 0;
};

namespace detail {

/// Overlapping axis-aligned boxes of constant value on a 2-voxel lattice.
inline Volume piecewise_constant_volume(Dims dims, std::mt19937_64& rng) {
  Volume v(dims);
  std::uniform_int_distribution<int> n_boxes(2, 4);
  std::uniform_real_distribution<double> value(-1.0, 1.0);
  const int boxes = n_boxes(rng);
  for (int b = 0; b < boxes; ++b) {
    std::array<std::size_t, 3> lo{}, hi{};
    for (std::size_t a = 0; a < 3; ++a) {
      const std::size_t cells = dims[a] / 2;
      std::uniform_int_distribution<std::size_t> size(1, std::max<std::size_t>(1, cells / 2 + 1));
      const std::size_t s = std::min(size(rng), cells);
      std::uniform_int_distribution<std::size_t> start(0, cells - s);
      lo[a] = 2 * start(rng);
      hi[a] = lo[a] + 2 * s;
    }
    const double val = value(rng);
    for (std::size_t i = lo[0]; i < hi[0]; ++i)
      for (std::size_t j = lo[1]; j < hi[1]; ++j)
        for (std::size_t k = lo[2]; k < hi[2]; ++k) v(i, j, k) = val;
  }
  return v;
}

/// Periodic sum of a 1D Gaussian over its nearest images.
inline double wrapped_gaussian(double d, double period, double width) {
  double s = 0.0;
  for (int m = -2; m <= 2; ++m) {
    const double x = d + m * period;
    s += std::exp(-0.5 * x * x / (width * width));
  }
  return s;
}

/// Sum of periodic (wrapped) isotropic Gaussian blobs.
inline Volume smooth_blobs_volume(Dims dims, std::mt19937_64& rng) {
  Volume v(dims);
  std::uniform_int_distribution<int> n_blobs(2, 4);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double scale = static_cast<double>(std::min({dims.d, dims.h, dims.w})) / 8.0;
  const int blobs = n_blobs(rng);
  for (int b = 0; b < blobs; ++b) {
    std::array<double, 3> centre{};
    for (std::size_t a = 0; a < 3; ++a) centre[a] = unit(rng) * static_cast<double>(dims[a]);
    const double width = (1.5 + 1.0 * unit(rng)) * scale;
    const double amp = (unit(rng) < 0.5 ? -1.0 : 1.0) * (0.5 + unit(rng));
    std::array<std::vector<double>, 3> prof;
    for (std::size_t a = 0; a < 3; ++a) {
      prof[a].resize(dims[a]);
      for (std::size_t i = 0; i < dims[a]; ++i) {
        prof[a][i] = wrapped_gaussian(static_cast<double>(i) - centre[a], static_cast<double>(dims[a]), width);
      }
    }
    for (std::size_t i = 0; i < dims.d; ++i)
      for (std::size_t j = 0; j < dims.h; ++j)
        for (std::size_t k = 0; k < dims.w; ++k) v(i, j, k) += amp * prof[0][i] * prof[1][j] * prof[2][k];
  }
  return v;
}

}  // namespace detail

/// Deterministic synthetic volumes. piecewise_constant favours Haar (block edges
/// fall on even voxel boundaries), smooth_blobs favours longer smooth filters,
/// mixed alternates the two.
inline std::vector<Volume> gen_dataset(const DatasetSpec& spec) {
  for (std::size_t a = 0; a < 3; ++a) {
    if (spec.dims[a] < 2 || spec.dims[a] % 2 != 0) {
      throw ShapeError("dataset dims must be even and >= 2, got " + spec.dims.str());
    }
  }
  std::vector<Volume> out;
  out.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    std::mt19937_64 rng(derive_seed(spec.seed, i, 0xda7a));
    DatasetKind kind = spec.kind;
    if (kind == DatasetKind::mixed) kind = i % 2 == 0 ? DatasetKind::piecewise_constant : DatasetKind::smooth_blobs;
    out.push_back(kind == DatasetKind::piecewise_constant ? detail::piecewise_constant_volume(spec.dims, rng)
                                                          : detail::smooth_blobs_volume(spec.dims, rng));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Volume files
// ---------------------------------------------------------------------------
//
// Layout (little-endian): u32 magic 'WVOL' (bytes 57 56 4F 4C), i32 D, i32 H,
// i32 W, then D*H*W IEEE-754 binary64 values in depth-major order.

inline constexpr std::uint32_t kVolumeMagic = 0x4C4F5657u;

namespace detail {

template <class T>
void put_le(std::string& buf, T v) {
  auto bits = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  buf.append(reinterpret_cast<const char*>(bits.data()), bits.size());
}

template <class T>
T get_le(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw ConfigError("volume file truncated");
  std::array<unsigned char, sizeof(T)> bits{};
  std::memcpy(bits.data(), buf.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bits.begin(), bits.end());
  pos += sizeof(T);
  return std::bit_cast<T>(bits);
}

}  // namespace detail

inline std::string encode_volume(const Volume& v) {
  std::string buf;
  buf.reserve(16 + 8 * v.size());
  detail::put_le<std::uint32_t>(buf, kVolumeMagic);
  for (std::size_t a = 0; a < 3; ++a) detail::put_le<std::int32_t>(buf, static_cast<std::int32_t>(v.dims()[a]));
  for (double x : v.values()) detail::put_le<double>(buf, x);
  return buf;
}

inline Volume decode_volume(const std::string& buf) {
  std::size_t pos = 0;
  if (detail::get_le<std::uint32_t>(buf, pos) != kVolumeMagic) throw ConfigError("not a volume file (bad magic)");
  Dims dims;
  for (std::size_t a = 0; a < 3; ++a) {
    const auto n = detail::get_le<std::int32_t>(buf, pos);
    if (n <= 0) throw ConfigError("volume file has non-positive dimension");
    dims[a] = static_cast<std::size_t>(n);
  }
  if (buf.size() != 16 + 8 * dims.size()) {
    throw ConfigError("volume file size does not match header dims " + dims.str());
  }
  std::vector<double> data(dims.size());
  for (double& x : data) x = detail::get_le<double>(buf, pos);
  Volume v(dims, std::move(data));
  if (!v.all_finite()) throw NumericalError("volume file contains non-finite values");
  return v;
}

inline void write_volume(const std::filesystem::path& path, const Volume& v) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot open '" + path.string() + "' for writing");
  const std::string buf = encode_volume(v);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline Volume read_volume(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open volume file '" + path.string() + "'");
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_volume(buf);
}

}  // namespace wavespec
