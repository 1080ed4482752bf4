#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "bayesrul/diagnostics.hpp"
#include "bayesrul/tmcmc.hpp"
#include "oracles.hpp"

using namespace bayesrul;

namespace {

TmcmcConfig long_run(MoveKind kind, std::uint64_t seed) {
  TmcmcConfig c;
  c.move_kind = kind;
  c.seed = seed;
  c.total_iters = 101000;  // 1e4 draws after burn-in 1000 and lag 10
  return c;
}

}  // namespace

TEST(TmcmcMove, FlatTargetAlwaysAccepts) {
  TmcmcConfig c;
  c.move_kind = MoveKind::Additive;
  Rng rng(1);
  TmcmcStats st;
  double x = 1.0, lx = 0.0;
  for (int i = 0; i < 1000; ++i) x = tmcmc_step(x, lx, [](double) { return 0.0; }, c, rng, &st);
  EXPECT_EQ(st.accepted, 1000);
  EXPECT_EQ(tmcmc_log_acceptance(0.0, 0.0, 0.0, true, 0.5), 0.0);
}

TEST(TmcmcMove, MultiplicativeHandComputation) {
  const auto p = tmcmc_propose(2.0, 0.5, true, MoveKind::Multiplicative);
  EXPECT_EQ(p.x, 1.0);
  EXPECT_DOUBLE_EQ(p.log_jacobian, std::log(0.5));
  auto log_pi = [](double x) { return -x; };
  const double r = tmcmc_log_acceptance(log_pi(2.0), log_pi(1.0), p.log_jacobian, true, 0.5);
  EXPECT_NEAR(std::exp(r), std::exp(-1.0) / std::exp(-2.0) * 0.5, 1e-15);
  const auto b = tmcmc_propose(2.0, 0.5, false, MoveKind::Multiplicative);
  EXPECT_EQ(b.x, 4.0);
  EXPECT_DOUBLE_EQ(b.log_jacobian, -std::log(0.5));
  const auto a = tmcmc_propose(2.0, 0.5, false, MoveKind::Additive);
  EXPECT_EQ(a.x, 1.5);
  EXPECT_EQ(a.log_jacobian, 0.0);
}

TEST(TmcmcMove, ForwardBackwardRatiosMultiplyToOne) {
  std::mt19937_64 eng(2);
  std::uniform_real_distribution<double> u(0.01, 0.99);
  auto log_pi = [](double x) { return -0.5 * std::log(x) - x * x / 3.0; };
  for (int rep = 0; rep < 1000; ++rep) {
    const double x = 5.0 * u(eng), eps = u(eng), p = u(eng);
    for (MoveKind kind : {MoveKind::Additive, MoveKind::Multiplicative}) {
      const auto fwd = tmcmc_propose(x, eps, true, kind);
      if (!(fwd.x > 0.0)) continue;
      const auto back = tmcmc_propose(fwd.x, eps, false, kind);
      EXPECT_NEAR(back.x, x, 1e-12 * x);
      const double there = tmcmc_log_acceptance(log_pi(x), log_pi(fwd.x), fwd.log_jacobian, true, p);
      const double back_ratio = tmcmc_log_acceptance(log_pi(fwd.x), log_pi(x), back.log_jacobian, false, p);
      EXPECT_NEAR(there + back_ratio, 0.0, 1e-12);
    }
  }
}

TEST(TmcmcMove, OutOfSupportRejected) {
  TmcmcConfig c;
  c.move_kind = MoveKind::Additive;
  Rng rng(3);
  TmcmcStats st;
  double x = 0.01, lx = 0.0;
  auto half_line = [](double v) { return v > 0 ? 0.0 : -std::numeric_limits<double>::infinity(); };
  for (int i = 0; i < 2000; ++i) {
    x = tmcmc_step(x, lx, half_line, c, rng, &st);
    ASSERT_GT(x, 0.0);
  }
  EXPECT_GT(st.out_of_support, 0);
}

TEST(TmcmcSample, StandardNormal) {
  const auto r = tmcmc_sample([](double x) { return -0.5 * x * x; }, long_run(MoveKind::Additive, 4));
  ASSERT_EQ(r.samples.size(), 10000u);
  EXPECT_NEAR(oracle::mean(r.samples), 0.0, 0.05);
  EXPECT_NEAR(oracle::variance(r.samples), 1.0, 0.1);
  EXPECT_LT(oracle::ks(r.samples, [](double x) { return oracle::norm_cdf(x); }), 0.03);
}

TEST(TmcmcSample, Exponential) {
  const auto r = tmcmc_sample([](double x) { return -x; }, long_run(MoveKind::Multiplicative, 5));
  EXPECT_NEAR(oracle::mean(r.samples), 1.0, 0.05);
  EXPECT_NEAR(predict_residual_life(r.samples), std::numbers::ln2, 0.03);
  EXPECT_LT(oracle::ks(r.samples, [](double x) { return 1.0 - std::exp(-x); }), 0.03);
}

TEST(TmcmcRun, ConstrainedSingleTriple) {
  const RulDistribution d({{0.0, 1.0, 1.0}}, 0.0, 0.0, true);
  const auto r = tmcmc_run(d, long_run(MoveKind::Multiplicative, 6));
  EXPECT_LT(oracle::ks(r.samples, [](double t) { return t <= 0 ? 0.0 : 2.0 * oracle::norm_cdf(t) - 1.0; }), 0.03);
  EXPECT_GT(r.stats.acceptance_rate(), 0.05);
  EXPECT_LT(r.stats.acceptance_rate(), 0.99);
}

TEST(TmcmcRun, DefaultSettingsAndDeterminism) {
  const RulDistribution d({{2.0, 3.0, 0.7}, {2.1, 3.3, 0.8}}, 1.0, 9.0, true);
  TmcmcConfig c;
  c.seed = 8;
  const auto a = tmcmc_run(d, c);
  const auto b = tmcmc_run(d, c);
  EXPECT_EQ(a.samples.size(), 900u);
  EXPECT_EQ(a.samples, b.samples);
  EXPECT_EQ(a.stats.steps, 10000);
  c.move_kind = MoveKind::Additive;
  EXPECT_THROW(tmcmc_run(d, c), InvalidInput);
}

TEST(TmcmcRun, StuckChainDetected) {
  TmcmcConfig c;
  c.move_kind = MoveKind::Multiplicative;
  c.total_iters = 200;
  c.burn_in = 10;
  // any move away from x0 = 1 lands outside the support
  auto spike = [](double x) { return x == 1.0 ? 0.0 : -std::numeric_limits<double>::infinity(); };
  EXPECT_THROW(tmcmc_sample(spike, c), StuckChain);
}

TEST(TmcmcConfig, Validation) {
  TmcmcConfig c;
  EXPECT_NO_THROW(c.validate());
  c.p_forward = 1.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c = TmcmcConfig{};
  c.x0 = -1.0;
  EXPECT_THROW(c.validate(), InvalidInput);
  c.move_kind = MoveKind::Additive;
  EXPECT_NO_THROW(c.validate());
  c.burn_in = c.total_iters;
  EXPECT_THROW(c.validate(), InvalidInput);
}

TEST(Median, Examples) {
  EXPECT_EQ(predict_residual_life({1, 2, 3}), 2.0);
  EXPECT_EQ(predict_residual_life({1, 2, 3, 10}), 2.5);
  EXPECT_EQ(predict_residual_life({10, 3, 1, 2}), 2.5);
  EXPECT_THROW(predict_residual_life({}), InvalidInput);
}

TEST(Hpd, UniformGridTieRule) {
  std::vector<double> xs(100);
  for (int i = 0; i < 100; ++i) xs[i] = 99 - i;
  const auto iv = hpd_interval(xs, 0.95);
  EXPECT_EQ(iv.width(), 94.0);
  EXPECT_EQ(iv.lo, 0.0);
  EXPECT_THROW(hpd_interval(std::vector<double>(19, 1.0)), InvalidInput);
  EXPECT_THROW(hpd_interval(xs, 1.0), InvalidInput);
}

TEST(Hpd, NormalAndSkewed) {
  std::mt19937_64 eng(9);
  std::normal_distribution<double> z(0.0, 1.0);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> xs(100000), ys(100000);
  for (double& x : xs) x = z(eng);
  for (double& y : ys) y = e(eng);
  // the window position is flat to second order, so random samples only pin the width
  const auto n = hpd_interval(xs);
  EXPECT_NEAR(n.width(), 3.92, 0.05);
  EXPECT_NEAR(n.lo, -1.96, 0.15);
  EXPECT_NEAR(n.hi, 1.96, 0.15);
  std::vector<double> qs(100000);
  for (std::size_t i = 0; i < qs.size(); ++i) qs[i] = oracle::norm_quantile((i + 0.5) / qs.size());
  const auto exact = hpd_interval(qs);
  EXPECT_NEAR(exact.lo, -1.96, 0.05);
  EXPECT_NEAR(exact.hi, 1.96, 0.05);
  const auto s = hpd_interval(ys);
  EXPECT_LT(s.lo, 0.01);
  EXPECT_LT(s.width(), quantile(ys, 0.975) - quantile(ys, 0.025));
  EXPECT_NEAR(s.hi, -std::log(0.05), 0.05);
}

TEST(Hpd, MinimalByExhaustiveScan) {
  std::mt19937_64 eng(10);
  std::gamma_distribution<double> g(2.0, 1.0);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 20 + eng() % 981;
    const double mass = 0.5 + 0.49 * (eng() % 1000) / 1000.0;
    std::vector<double> xs(n);
    for (double& x : xs) x = g(eng);
    const auto iv = hpd_interval(xs, mass);
    std::sort(xs.begin(), xs.end());
    const auto need = static_cast<std::size_t>(std::ceil(mass * n - 1e-9));
    std::size_t inside = 0;
    for (double x : xs) inside += iv.contains(x);
    EXPECT_GE(inside, need);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i; j < n; ++j) {
        if (j - i + 1 >= need) {
          best = std::min(best, xs[j] - xs[i]);
          break;
        }
      }
    }
    EXPECT_EQ(iv.width(), best);
  }
}
