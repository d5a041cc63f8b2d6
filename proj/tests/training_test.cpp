// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wavespec Authors

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_util.hpp"
#include "wavespec/training.hpp"

namespace wavespec {
namespace {

using testing::random_volume;

std::vector<FilterBank> bases_of(std::initializer_list<const char*> names) {
  std::vector<FilterBank> out;
  for (const char* n : names) out.push_back(basis_by_name(n));
  return out;
}

ModelState random_state(std::initializer_list<const char*> names, std::mt19937_64& rng, TrainConfig cfg = {}) {
  ModelState s = make_state(bases_of(names), cfg);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (auto& a : s.bank.logits()) a = 2.0 * u(rng) - 1.0;
  for (auto& p : s.params) p = SpectralParams::from_values(0.3 * u(rng), 0.3 + 0.3 * u(rng), 0.5 + u(rng), u(rng) - 0.5);
  return s;
}

void expect_report_ok(const GradCheckReport& r) {
  for (const auto& e : r.entries) {
    EXPECT_TRUE(e.ok) << e.parameter << ": analytic " << e.analytic << " numeric " << e.numeric;
  }
  EXPECT_FALSE(r.entries.empty());
}

TEST(Forward, IdentityPipeline) {
  std::mt19937_64 rng(1);
  const Volume x = random_volume({8, 8, 8}, rng);
  for (const char* name : {"haar", "db4", "bior1.3"}) {
    const ModelState s = make_state(bases_of({name}), {});
    EXPECT_LT(max_abs_diff(forward(x, s).x_hat, x), 1e-12) << name;
  }
}

TEST(Forward, DuplicatedBasisMatchesSingle) {
  std::mt19937_64 rng(2);
  const Volume x = random_volume({8, 8, 8}, rng);
  ModelState one = make_state(bases_of({"db2"}), {});
  ModelState two = make_state(bases_of({"db2", "db2"}), {});
  const auto p = SpectralParams::from_values(0.2, 0.5, 1.3, 0.2);
  one.params[0] = p;
  two.params = {p, p};
  two.bank.logits() = {1.7, -0.4};
  EXPECT_LT(max_abs_diff(forward(x, one).x_hat, forward(x, two).x_hat), 1e-14);
}

TEST(Forward, MatchesStepByStepComposition) {
  std::mt19937_64 rng(3);
  const Volume x = random_volume({8, 8, 8}, rng);
  for (Boundary b : {Boundary::periodic, Boundary::symmetric}) {
    TrainConfig cfg;
    cfg.boundary = b;
    ModelState s = random_state({"haar", "db2", "sym4"}, rng, cfg);
    s.dilation = b == Boundary::periodic ? 1 : 0;
    const auto w = softmax(s.bank.logits());
    Volume ref({8, 8, 8});
    for (std::size_t k = 0; k < 3; ++k) {
      const FilterBank& fb = s.bank.basis(k);
      const auto c = apply_nonlinearity(dwt3d(x, fb, b, s.dilation), s.params[k]);
      ref.axpy(w[k], idwt3d(c, fb));
    }
    EXPECT_LT(max_abs_diff(forward(x, s).x_hat, ref), 1e-12);
  }
}

TEST(Loss, Examples) {
  std::mt19937_64 rng(4);
  const Volume x = random_volume({4, 4, 4}, rng);
  const std::vector<double> onehot{0.0, 1.0};
  EXPECT_EQ(loss(x, x, onehot, 0.3), 0.0);
  Volume shifted = x;
  for (double& v : shifted.values()) v += 0.25;
  EXPECT_NEAR(loss(shifted, x, onehot, 0.0), 0.0625, 1e-15);

  const Volume y = random_volume({4, 4, 4}, rng);
  const std::vector<double> w{0.3, 0.7};
  double mse = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) mse += (y[n] - x[n]) * (y[n] - x[n]);
  mse /= static_cast<double>(x.size());
  const double expected = mse - 0.05 * (0.3 * std::log(0.3) + 0.7 * std::log(0.7));
  EXPECT_NEAR(loss(y, x, w, 0.05), expected, 1e-15);
  // Positive beta penalizes diffuse weights.
  EXPECT_GT(loss(x, x, std::vector<double>{0.5, 0.5}, 0.1), loss(x, x, std::vector<double>{0.9, 0.1}, 0.1));
  EXPECT_THROW(loss(x, Volume({4, 4, 2}), w, 0.0), ShapeError);
}

TEST(Backward, MatchesFiniteDifferencesEveryBasis) {
  TrainConfig cfg;
  cfg.beta = 0.05;
  const auto report = gradcheck_suite(all_registered_bases(), cfg, {8, 8, 8}, 6, 11);
  EXPECT_EQ(report.instances, 6u);
  expect_report_ok(report);
}

TEST(Backward, MatchesFiniteDifferencesSymmetricBoundary) {
  TrainConfig cfg;
  cfg.boundary = Boundary::symmetric;
  cfg.beta = -0.02;
  expect_report_ok(gradcheck_suite(all_registered_bases(), cfg, {8, 8, 8}, 4, 12));
}

TEST(Backward, MatchesFiniteDifferencesWithDilation) {
  TrainConfig cfg;
  cfg.max_dilation = 2;
  for (Boundary b : {Boundary::periodic, Boundary::symmetric}) {
    cfg.boundary = b;
    expect_report_ok(gradcheck_suite(bases_of({"haar", "db2", "bior1.3"}), cfg, {8, 8, 8}, 3, 13));
  }
}

TEST(Backward, MatchesFiniteDifferencesSharedParams) {
  TrainConfig cfg;
  cfg.shared_params = true;
  expect_report_ok(gradcheck_suite(bases_of({"haar", "db4", "sym4"}), cfg, {8, 8, 8}, 3, 14));
}

TEST(Backward, AnisotropicVolume) {
  TrainConfig cfg;
  expect_report_ok(gradcheck_suite(bases_of({"haar", "db2"}), cfg, {4, 8, 6}, 2, 15));
}

TEST(Backward, DeadNetwork) {
  std::mt19937_64 rng(5);
  const Volume clean = random_volume({8, 8, 8}, rng);
  const Volume noisy = clean + random_volume({8, 8, 8}, rng, 0.3);
  ModelState s = make_state(bases_of({"haar", "db4"}), {});
  for (auto& p : s.params) p = SpectralParams::from_values(1e3, 1e3, 1.7, 0.4);
  const auto fr = forward(noisy, s);
  EXPECT_EQ(fr.x_hat.max_abs(), 0.0);
  const auto g = backward(fr.cache, fr.x_hat, clean, s);
  for (const auto& p : g.params) {
    EXPECT_EQ(p.d_lambda_a, 0.0);
    EXPECT_EQ(p.d_lambda_d, 0.0);
    EXPECT_EQ(p.d_gamma, 0.0);
    EXPECT_EQ(p.d_theta, 0.0);
  }
}

TEST(Backward, IdenticalBasesGetEqualLogitGradients) {
  std::mt19937_64 rng(6);
  const Volume clean = random_volume({8, 8, 8}, rng);
  const Volume noisy = clean + random_volume({8, 8, 8}, rng, 0.3);
  TrainConfig cfg;
  cfg.beta = 0.2;
  ModelState s = make_state(bases_of({"db2", "db2"}), cfg);
  const auto p = SpectralParams::from_values(0.1, 0.4, 1.2, 0.1);
  s.params = {p, p};
  const auto fr = forward(noisy, s);
  const auto g = backward(fr.cache, fr.x_hat, clean, s);
  EXPECT_EQ(g.d_logits[0], g.d_logits[1]);
  EXPECT_EQ(g.params[0].d_gamma, g.params[1].d_gamma);
}

TEST(Backward, StaleCacheIsRejected) {
  std::mt19937_64 rng(7);
  const Volume x = random_volume({4, 4, 4}, rng);
  ModelState s = make_state(bases_of({"haar", "db2"}), {});
  const auto fr = forward(x, s);
  GradientSet zero = zero_gradients(s);
  zero.d_logits[0] = 0.1;
  adam_step(s, zero);
  EXPECT_THROW(backward(fr.cache, fr.x_hat, x, s), ContractError);
  const auto fr2 = forward(x, s);
  s.dilation = 1;
  EXPECT_THROW(backward(fr2.cache, fr2.x_hat, x, s), ContractError);
}

TEST(Adam, ZeroGradientsLeaveParametersUnchanged) {
  std::mt19937_64 rng(8);
  ModelState s = random_state({"haar", "db4"}, rng);
  const ModelState before = s;
  for (int i = 0; i < 3; ++i) adam_step(s, zero_gradients(s));
  EXPECT_EQ(s.params, before.params);
  EXPECT_EQ(s.bank.logits(), before.bank.logits());
  EXPECT_EQ(s.adam.step, 3u);
}

TEST(Adam, TwoStepHandOracle) {
  std::vector<double> p{1.0}, m{0.0}, v{0.0};
  const AdamOptions opt{0.1, 0.9, 0.999, 1e-8};
  adam_update(p, std::vector<double>{0.5}, m, v, 1, opt);
  EXPECT_NEAR(p[0], 0.900000002, 1e-15);
  adam_update(p, std::vector<double>{-0.2}, m, v, 2, opt);
  EXPECT_NEAR(p[0], 0.8654394181165108, 1e-15);
  EXPECT_NEAR(m[0], 0.025, 1e-17);
  EXPECT_NEAR(v[0], 0.00028975, 1e-18);
}

TEST(Adam, ChainsThroughSoftplus) {
  TrainConfig cfg;
  cfg.lr = 0.01;
  ModelState s = make_state(bases_of({"haar"}), cfg);
  s.params[0] = SpectralParams::from_values(0.5, 0.5, 1.0, 0.0);
  const double raw0 = s.params[0].raw_lambda_d;
  GradientSet g = zero_gradients(s);
  g.params[0].d_lambda_d = 3.0;
  adam_step(s, g);
  // First Adam step moves every parameter with a nonzero gradient by lr against its sign.
  EXPECT_NEAR(s.params[0].raw_lambda_d, raw0 - 0.01, 1e-9);
  EXPECT_EQ(s.params[0].raw_lambda_a, SpectralParams::from_values(0.5, 0.5, 1.0, 0.0).raw_lambda_a);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  ModelState s = make_state(bases_of({"haar", "db4"}), {});
  GradientSet g = zero_gradients(s);
  g.params[1].d_theta = NAN;
  try {
    adam_step(s, g);
    FAIL() << "expected NumericalError";
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("db4.theta"), std::string::npos) << e.what();
  }
  g = zero_gradients(s);
  g.d_logits[0] = INFINITY;
  EXPECT_THROW(adam_step(s, g), NumericalError);
}

TEST(Adam, DeterministicTrajectories) {
  std::mt19937_64 rng(9);
  const Volume clean = random_volume({8, 8, 8}, rng);
  const Volume noisy = clean + random_volume({8, 8, 8}, rng, 0.4);
  const auto run = [&] {
    std::mt19937_64 r(10);
    ModelState s = random_state({"haar", "db2"}, r);
    for (int i = 0; i < 5; ++i) {
      const auto fr = forward(noisy, s);
      adam_step(s, backward(fr.cache, fr.x_hat, clean, s));
    }
    return s;
  };
  const ModelState a = run(), b = run();
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.bank.logits(), b.bank.logits());
}

TEST(DilationSchedule, Formula) {
  EXPECT_EQ(dilation_schedule(0, 5, 3), 0);
  EXPECT_EQ(dilation_schedule(5, 5, 3), 1);
  EXPECT_EQ(dilation_schedule(1000000, 5, 3), 3);
  for (int td = 1; td <= 7; ++td) {
    for (int smax = 0; smax <= 4; ++smax) {
      for (int t = 0; t <= 10 * td; ++t) EXPECT_EQ(dilation_schedule(t, td, smax), std::min(t / td, smax));
    }
  }
  EXPECT_THROW(dilation_schedule(3, 0, 1), ConfigError);
}

TEST(Config, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.dilation_interval = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.lr = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.noise_sigma = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.max_dilation = -1;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(LossDecrease, SmallStepDoesNotIncreaseLoss) {
  std::mt19937_64 rng(11);
  int ok = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const Volume clean = random_volume({8, 8, 8}, rng);
    const Volume noisy = clean + random_volume({8, 8, 8}, rng, 0.5);
    TrainConfig cfg;
    cfg.lr = 1e-4;
    ModelState s = random_state({"haar", "db2"}, rng, cfg);
    const double before = total_loss(s, noisy, clean);
    const auto fr = forward(noisy, s);
    adam_step(s, backward(fr.cache, fr.x_hat, clean, s));
    ok += total_loss(s, noisy, clean) <= before ? 1 : 0;
  }
  EXPECT_GE(ok, 95);
}

TEST(Pruning, PrunedBasisIsNeutral) {
  std::mt19937_64 rng(12);
  const Volume clean = random_volume({8, 8, 8}, rng);
  const Volume noisy = clean + random_volume({8, 8, 8}, rng, 0.3);
  ModelState s = random_state({"haar", "db4", "sym4"}, rng);
  ASSERT_TRUE(s.bank.set_active(1, false));
  s.version += 1;
  const Volume before = forward(noisy, s).x_hat;
  s.bank.logits()[1] += 7.5;
  EXPECT_EQ(forward(noisy, s).x_hat, before);

  const auto fr = forward(noisy, s);
  const auto g = backward(fr.cache, fr.x_hat, clean, s);
  EXPECT_EQ(g.d_logits[1], 0.0);
  EXPECT_EQ(g.params[1].d_lambda_a, 0.0);
  EXPECT_EQ(g.params[1].d_gamma, 0.0);
  const auto p1 = s.params[1];
  const double a1 = s.bank.logits()[1];
  adam_step(s, g);
  EXPECT_EQ(s.params[1], p1);
  EXPECT_EQ(s.bank.logits()[1], a1);
}

std::vector<Volume> small_dataset(DatasetKind kind, std::size_t count, std::uint64_t seed) {
  return gen_dataset({kind, count, {8, 8, 8}, seed});
}

TEST(Train, CleanIdentityStartHasOnlyEntropyLoss) {
  TrainConfig cfg;
  cfg.noise_sigma = 0.0;
  cfg.lambda_init_scale = 0.0;
  cfg.epochs = 2;
  cfg.beta = 0.01;
  const auto r = train(small_dataset(DatasetKind::piecewise_constant, 8, 1), bases_of({"haar", "db4"}), cfg);
  ASSERT_EQ(r.metrics.size(), 2u);
  EXPECT_NEAR(r.metrics[0].total_loss, 0.01 * std::log(2.0), 1e-15);
  EXPECT_LT(r.metrics[0].train_mse, 1e-20);
}

TEST(Train, DeterministicReplay) {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 42;
  const auto data = small_dataset(DatasetKind::mixed, 10, 3);
  const auto a = train(data, bases_of({"haar", "db2"}), cfg);
  cfg.threads = 3;
  const auto b = train(data, bases_of({"haar", "db2"}), cfg);
  ASSERT_EQ(a.metrics.size(), b.metrics.size());
  for (std::size_t e = 0; e < a.metrics.size(); ++e) {
    EXPECT_EQ(a.metrics[e].total_loss, b.metrics[e].total_loss);
    EXPECT_EQ(a.metrics[e].mse, b.metrics[e].mse);
    EXPECT_EQ(a.metrics[e].weights, b.metrics[e].weights);
  }
  EXPECT_EQ(a.state.params, b.state.params);
}

TEST(Train, ReducesValidationError) {
  TrainConfig cfg;
  cfg.epochs = 10;
  const auto r = train(small_dataset(DatasetKind::piecewise_constant, 16, 4), bases_of({"haar", "db4"}), cfg);
  EXPECT_LT(r.metrics.back().mse, r.metrics.back().noisy_mse);
  EXPECT_LT(r.metrics.back().mse, r.metrics.front().mse);
}

TEST(Train, DilationFollowsSchedule) {
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.dilation_interval = 2;
  cfg.max_dilation = 1;
  const auto r = train(small_dataset(DatasetKind::smooth_blobs, 6, 5), bases_of({"haar"}), cfg);
  for (const auto& m : r.metrics) EXPECT_EQ(m.dilation, std::min(m.epoch / 2, 1));
}

TEST(Train, PruneLogReportsEachBasisOnce) {
  TrainConfig cfg;
  cfg.epochs = 12;
  cfg.prune_tau = 0.45;
  cfg.prune_window = 5;
  cfg.lr = 0.2;
  cfg.beta = 0.5;
  const auto r = train(small_dataset(DatasetKind::piecewise_constant, 10, 6), bases_of({"haar", "db4", "sym4"}), cfg);
  std::map<std::string, int> seen;
  for (const auto& p : r.prune_log) seen[p.event.basis]++;
  for (const auto& [name, count] : seen) EXPECT_EQ(count, 1) << name;
  EXPECT_GE(r.state.bank.active_count(), 1u);
  for (const auto& p : r.prune_log) {
    EXPECT_FALSE(r.state.bank.is_active(p.event.basis_index));
    for (double w : p.event.window_weights) EXPECT_LT(w, 0.45);
  }
}

TEST(Train, Errors) {
  TrainConfig cfg;
  EXPECT_THROW(train({}, bases_of({"haar"}), cfg), ConfigError);
  EXPECT_THROW(train({Volume({2, 2, 2})}, bases_of({"haar"}), cfg), ConfigError);
  // Odd dims make every basis invalid.
  EXPECT_THROW(train({Volume({3, 3, 3}), Volume({3, 3, 3})}, bases_of({"haar", "db2"}), cfg), ConfigError);
}

}  // namespace
}  // namespace wavespec
