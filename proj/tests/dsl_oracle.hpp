// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors

#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "wavespec/reasoning.hpp"

namespace wavespec::testing {

inline const std::vector<std::string> kRuleTargets{"haar", "db2", "db4", "sym4", "bior1.3"};

inline Rule random_rule(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Rule r;
  const std::size_t n = 1 + rng() % 3;
  for (std::size_t i = 0; i < n; ++i) {
    Condition c;
    c.subband = kAllSubbands[rng() % 8];
    c.stat = static_cast<Stat>(rng() % 3);
    c.cmp = static_cast<Cmp>(rng() % 4);
    // Mix of short literals, full-precision doubles and large exponents.
    switch (rng() % 3) {
      case 0:
        c.threshold = std::round(u(rng) * 100.0) / 100.0;
        break;
      case 1:
        c.threshold = u(rng);
        break;
      default:
        c.threshold = u(rng) * std::pow(10.0, static_cast<double>(rng() % 40) - 20.0);
    }
    r.conditions.push_back(c);
  }
  r.target = kRuleTargets[rng() % kRuleTargets.size()];
  r.verb = rng() % 2 ? Verb::activate : Verb::deactivate;
  return r;
}

inline RuleProgram random_program(std::mt19937_64& rng, std::size_t max_rules = 6) {
  RuleProgram p;
  const std::size_t n = rng() % (max_rules + 1);
  for (std::size_t i = 0; i < n; ++i) p.rules.push_back(random_rule(rng));
  return p;
}

/// Random program whose thresholds sit near the actual statistics of `c`, so
/// rules fire and fail in comparable numbers.
inline RuleProgram random_program_near(const WaveletCoeffs& c, std::size_t rules, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> scale(0.5, 1.5);
  RuleProgram p;
  for (std::size_t i = 0; i < rules; ++i) {
    Rule r = random_rule(rng);
    for (auto& cond : r.conditions) cond.threshold = subband_stat(c.levels[0].at(cond.subband), cond.stat) * scale(rng);
    p.rules.push_back(r);
  }
  return p;
}

/// Statistic by explicit index loops.
inline double naive_stat(const Volume& v, Stat s) {
  double acc = 0.0;
  const Dims d = v.dims();
  for (std::size_t i = 0; i < d.d; ++i)
    for (std::size_t j = 0; j < d.h; ++j)
      for (std::size_t k = 0; k < d.w; ++k) {
        const double x = v(i, j, k);
        if (s == Stat::mean_abs) acc += std::abs(x) / static_cast<double>(d.size());
        if (s == Stat::energy) acc += x * x;
        if (s == Stat::max_abs) acc = std::max(acc, std::abs(x));
      }
  return acc;
}

struct NaiveEval {
  std::vector<bool> fired;
  std::vector<bool> mask;
};

/// Re-evaluates a program against a plain activity mask over kRuleTargets.
inline NaiveEval naive_eval(const RuleProgram& p, const WaveletCoeffs& c) {
  NaiveEval out;
  out.mask.assign(kRuleTargets.size(), true);
  for (const Rule& rule : p.rules) {
    bool fired = true;
    for (const auto& cond : rule.conditions) {
      const double v = naive_stat(c.levels[0].at(cond.subband), cond.stat);
      const double t = cond.threshold;
      const bool h = cond.cmp == Cmp::lt ? v < t : cond.cmp == Cmp::le ? v <= t : cond.cmp == Cmp::gt ? v > t : v >= t;
      fired = fired && h;
    }
    out.fired.push_back(fired);
    if (!fired) continue;
    const auto k = static_cast<std::size_t>(std::find(kRuleTargets.begin(), kRuleTargets.end(), rule.target) -
                                            kRuleTargets.begin());
    const bool want = rule.verb == Verb::activate;
    const auto active = static_cast<std::size_t>(std::count(out.mask.begin(), out.mask.end(), true));
    if (!want && out.mask[k] && active == 1) continue;
    out.mask[k] = want;
  }
  return out;
}

}  // namespace wavespec::testing
