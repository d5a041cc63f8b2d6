// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "wavespec/errors.hpp"

namespace wavespec {

/// Extents of a rank-3 array, ordered (depth, height, width).
struct Dims {
  std::size_t d = 0;
  std::size_t h = 0;
  std::size_t w = 0;

  constexpr std::size_t size() const { return d * h * w; }
  constexpr std::size_t operator[](std::size_t axis) const { return axis == 0 ? d : (axis == 1 ? h : w); }
  constexpr std::size_t& operator[](std::size_t axis) { return axis == 0 ? d : (axis == 1 ? h : w); }
  friend constexpr bool operator==(const Dims&, const Dims&) = default;

  std::string str() const {
    return std::to_string(d) + "x" + std::to_string(h) + "x" + std::to_string(w);
  }
};

/// Dense depth-major 3D array of doubles.
class Volume {
 public:
  Volume() = default;

  explicit Volume(Dims dims, double fill = 0.0) : dims_(dims), data_(dims.size(), fill) {
    if (dims.d == 0 || dims.h == 0 || dims.w == 0) {
      throw ShapeError("volume dims must be positive, got " + dims.str());
    }
  }

  Volume(Dims dims, std::vector<double> data) : dims_(dims), data_(std::move(data)) {
    if (dims.d == 0 || dims.h == 0 || dims.w == 0) {
      throw ShapeError("volume dims must be positive, got " + dims.str());
    }
    if (data_.size() != dims.size()) {
      throw ShapeError("volume data length " + std::to_string(data_.size()) + " does not match dims " +
                       dims.str());
    }
  }

  const Dims& dims() const { return dims_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t index(std::size_t i, std::size_t j, std::size_t k) const { return (i * dims_.h + j) * dims_.w + k; }
  double& operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[index(i, j, k)]; }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const { return data_[index(i, j, k)]; }
  double& operator[](std::size_t n) { return data_[n]; }
  double operator[](std::size_t n) const { return data_[n]; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }
  const std::vector<double>& data() const { return data_; }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  double sum_squares() const { return std::inner_product(data_.begin(), data_.end(), data_.begin(), 0.0); }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  Volume& operator+=(const Volume& other) {
    require_same_dims(other, "+=");
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += other.data_[n];
    return *this;
  }

  Volume& operator-=(const Volume& other) {
    require_same_dims(other, "-=");
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] -= other.data_[n];
    return *this;
  }

  Volume& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  /// this += s * other
  void axpy(double s, const Volume& other) {
    require_same_dims(other, "axpy");
    for (std::size_t n = 0; n < data_.size(); ++n) data_[n] += s * other.data_[n];
  }

  friend Volume operator+(Volume a, const Volume& b) { return a += b; }
  friend Volume operator-(Volume a, const Volume& b) { return a -= b; }
  friend Volume operator*(double s, Volume a) { return a *= s; }
  friend bool operator==(const Volume&, const Volume&) = default;

 private:
  void require_same_dims(const Volume& other, const char* op) const {
    if (other.dims_ != dims_) {
      throw ShapeError(std::string("volume ") + op + ": dims " + dims_.str() + " vs " + other.dims_.str());
    }
  }

  Dims dims_{};
  std::vector<double> data_;
};

inline double dot(const Volume& a, const Volume& b) {
  if (a.dims() != b.dims()) throw ShapeError("dot: dims " + a.dims().str() + " vs " + b.dims().str());
  return std::inner_product(a.data().begin(), a.data().end(), b.data().begin(), 0.0);
}

inline double max_abs_diff(const Volume& a, const Volume& b) {
  if (a.dims() != b.dims()) throw ShapeError("max_abs_diff: dims " + a.dims().str() + " vs " + b.dims().str());
  double m = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) m = std::max(m, std::abs(a[n] - b[n]));
  return m;
}

inline double mean_squared_error(const Volume& a, const Volume& b) {
  if (a.dims() != b.dims()) throw ShapeError("mse: dims " + a.dims().str() + " vs " + b.dims().str());
  double s = 0.0;
  for (std::size_t n = 0; n < a.size(); ++n) {
    const double e = a[n] - b[n];
    s += e * e;
  }
  return s / static_cast<double>(a.size());
}

}  // namespace wavespec
