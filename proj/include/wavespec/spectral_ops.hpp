// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors

#pragma once

#include <cmath>
#include <limits>

#include "wavespec/errors.hpp"
#include "wavespec/volume.hpp"
#include "wavespec/wavelet.hpp"

namespace wavespec {

/// log(1 + e^x) without overflow; softplus(-inf) == 0 exactly.
inline double softplus(double x) {
  if (x > 0.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

/// Inverse of softplus on [0, inf); returns -inf for 0.
inline double softplus_inverse(double y) {
  if (y < 0.0 || std::isnan(y)) throw NumericalError("softplus_inverse: value must be >= 0");
  if (y == 0.0) return -std::numeric_limits<double>::infinity();
  if (y > 30.0) return y + std::log(-std::expm1(-y));
  return std::log(std::expm1(y));
}

/// d softplus / dx.
inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Learnable shrinkage parameters for one basis.
///
/// Thresholds and gain live in an unconstrained space and are materialized
/// through softplus, so an optimizer step can never make them negative. The
/// phase is used as-is.
struct SpectralParams {
  double raw_lambda_a = -std::numeric_limits<double>::infinity();
  double raw_lambda_d = -std::numeric_limits<double>::infinity();
  double raw_gamma = softplus_inverse(1.0);
  double theta = 0.0;

  static SpectralParams from_values(double lambda_a, double lambda_d, double gamma, double theta) {
    if (!(gamma > 0.0)) throw NumericalError("gamma must be positive");
    SpectralParams p;
    p.raw_lambda_a = softplus_inverse(lambda_a);
    p.raw_lambda_d = softplus_inverse(lambda_d);
    p.raw_gamma = softplus_inverse(gamma);
    p.theta = theta;
    return p;
  }

  /// lambda = 0, gamma = 1, theta = 0: phi is the identity.
  static SpectralParams identity() { return from_values(0.0, 0.0, 1.0, 0.0); }

  double lambda_a() const { return softplus(raw_lambda_a); }
  double lambda_d() const { return softplus(raw_lambda_d); }
  double gamma() const { return softplus(raw_gamma); }

  friend bool operator==(const SpectralParams&, const SpectralParams&) = default;
};

/// Partial derivatives of phi.
struct PhiGrad {
  double dz = 0.0;
  double dlambda = 0.0;
  double dgamma = 0.0;
  double dtheta = 0.0;
};

inline double sign(double z) { return (z > 0.0) - (z < 0.0); }

/// Soft threshold with gain and phase: gamma * sign(z) * max(|z| - lambda, 0) * cos(theta).
inline double phi(double z, double lambda, double gamma, double theta) {
  const double mag = std::abs(z) - lambda;
  if (mag <= 0.0) return 0.0;
  return gamma * sign(z) * mag * std::cos(theta);
}

/// Derivatives of phi. At the kink |z| == lambda the zero subgradient is used.
inline PhiGrad phi_grad(double z, double lambda, double gamma, double theta) {
  const double mag = std::abs(z) - lambda;
  if (mag <= 0.0) return {};
  const double s = sign(z);
  const double c = std::cos(theta);
  return {gamma * c, -gamma * s * c, s * mag * c, -gamma * s * mag * std::sin(theta)};
}

/// phi over every block: 'aaa' uses lambda_A, detail blocks lambda_D.
inline WaveletCoeffs apply_nonlinearity(const WaveletCoeffs& coeffs, const SpectralParams& params) {
  WaveletCoeffs out = coeffs;
  const double la = params.lambda_a(), ld = params.lambda_d(), g = params.gamma(), th = params.theta;
  out.for_each_block([&](std::size_t, Subband s, Volume& v) {
    const double lam = s == Subband::aaa ? la : ld;
    for (double& z : v.values()) z = phi(z, lam, g, th);
  });
  return out;
}

/// Bandwise conjunction map gamma_r * max(c_alpha * c_beta - lambda_r, 0).
inline Volume rule_compose(const Volume& c_alpha, const Volume& c_beta, double gamma_r, double lambda_r) {
  if (c_alpha.dims() != c_beta.dims()) {
    throw ShapeError("rule_compose: dims " + c_alpha.dims().str() + " vs " + c_beta.dims().str());
  }
  Volume out(c_alpha.dims());
  for (std::size_t n = 0; n < out.size(); ++n) {
    out[n] = gamma_r * std::max(c_alpha[n] * c_beta[n] - lambda_r, 0.0);
  }
  return out;
}

}  // namespace wavespec
