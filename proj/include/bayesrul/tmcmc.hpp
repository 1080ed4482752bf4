#ifndef BAYESRUL_TMCMC_HPP_
#define BAYESRUL_TMCMC_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "bayesrul/error.hpp"
#include "bayesrul/random.hpp"
#include "bayesrul/rul.hpp"

namespace bayesrul {

/// Additive moves x +/- eps live on the real line; multiplicative moves
/// x * eps and x / eps live on (0, inf).
enum class MoveKind { Additive, Multiplicative };

struct TmcmcConfig {
  MoveKind move_kind = MoveKind::Multiplicative;
  double x0 = 1.0;
  double p_forward = 0.5;
  long total_iters = 10000;
  long burn_in = 1000;
  long thin = 10;
  /// Scale of the half-normal eps density for additive moves. The
  /// multiplicative eps is Uniform(0, 1).
  double additive_scale = 1.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(p_forward > 0.0 && p_forward < 1.0)) throw InvalidInput("p_forward must be in (0, 1)");
    if (!std::isfinite(x0)) throw InvalidInput("x0 must be finite");
    if (move_kind == MoveKind::Multiplicative && !(x0 > 0.0)) {
      throw InvalidInput("multiplicative moves need x0 > 0");
    }
    if (total_iters < 1 || burn_in < 0 || burn_in >= total_iters) {
      throw InvalidInput("need 0 <= burn_in < total_iters");
    }
    if (thin < 1) throw InvalidInput("thin must be >= 1");
    if (!(additive_scale > 0.0)) throw InvalidInput("additive_scale must be positive");
  }
};

struct TmcmcStats {
  long steps = 0;
  long accepted = 0;
  long out_of_support = 0;

  double acceptance_rate() const noexcept {
    return steps > 0 ? static_cast<double>(accepted) / static_cast<double>(steps) : 0.0;
  }
};

struct TmcmcProposal {
  double x = 0.0;
  double log_jacobian = 0.0;
};

/// Forward T(x, eps) or backward T^b(x, eps) with its log Jacobian.
inline TmcmcProposal tmcmc_propose(double x, double eps, bool forward, MoveKind kind) noexcept {
  if (kind == MoveKind::Additive) return {forward ? x + eps : x - eps, 0.0};
  return forward ? TmcmcProposal{x * eps, std::log(eps)} : TmcmcProposal{x / eps, -std::log(eps)};
}

/// Log acceptance ratio (before the min with 1) for a proposed move.
inline double tmcmc_log_acceptance(double log_target_current, double log_target_proposed,
                                   double log_jacobian, bool forward, double p_forward) noexcept {
  const double move_odds = forward ? std::log((1.0 - p_forward) / p_forward)
                                   : std::log(p_forward / (1.0 - p_forward));
  return move_odds + (log_target_proposed - log_target_current) + log_jacobian;
}

namespace detail {

inline double draw_eps(const TmcmcConfig& config, Rng& rng) {
  if (config.move_kind == MoveKind::Multiplicative) return rng.uniform();
  double eps = 0.0;
  do {
    eps = std::abs(rng.normal(0.0, config.additive_scale));
  } while (!(eps > 0.0));
  return eps;
}

}  // namespace detail

/// One transformation-based move. `log_target_x` caches log pi(x) and is
/// updated on acceptance.
template <typename LogTarget>
double tmcmc_step(double x, double& log_target_x, LogTarget&& log_target,
                  const TmcmcConfig& config, Rng& rng, TmcmcStats* stats = nullptr) {
  const double eps = detail::draw_eps(config, rng);
  const bool forward = rng.uniform() < config.p_forward;
  const auto prop = tmcmc_propose(x, eps, forward, config.move_kind);
  if (stats) ++stats->steps;
  const bool in_support =
      std::isfinite(prop.x) && (config.move_kind == MoveKind::Additive || prop.x > 0.0);
  const double log_prop = in_support ? log_target(prop.x) : -std::numeric_limits<double>::infinity();
  if (!std::isfinite(log_prop)) {
    if (stats) ++stats->out_of_support;
    return x;
  }
  const double log_ratio =
      tmcmc_log_acceptance(log_target_x, log_prop, prop.log_jacobian, forward, config.p_forward);
  if (log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio) {
    if (stats) ++stats->accepted;
    log_target_x = log_prop;
    return prop.x;
  }
  return x;
}

struct TmcmcResult {
  std::vector<double> samples;
  TmcmcStats stats;
};

/// Runs a transformation-based chain on an arbitrary log density, dropping
/// burn-in and keeping every thin-th state.
template <typename LogTarget>
TmcmcResult tmcmc_sample(LogTarget&& log_target, const TmcmcConfig& config) {
  config.validate();
  Rng rng(config.seed);
  double x = config.x0;
  double lx = log_target(x);
  if (!std::isfinite(lx)) throw InvalidInput("target density is zero at x0");
  TmcmcResult out;
  out.samples.reserve(static_cast<std::size_t>((config.total_iters - config.burn_in) / config.thin));
  for (long it = 1; it <= config.total_iters; ++it) {
    x = tmcmc_step(x, lx, log_target, config, rng, &out.stats);
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) out.samples.push_back(x);
  }
  if (out.stats.accepted == 0) throw StuckChain("transformation-based chain never moved");
  return out;
}

/// Samples the residual-life density. Constrained distributions need
/// multiplicative moves, unconstrained ones additive moves.
inline TmcmcResult tmcmc_run(const RulDistribution& dist, const TmcmcConfig& config) {
  const bool multiplicative = config.move_kind == MoveKind::Multiplicative;
  if (multiplicative != dist.constrained()) {
    throw InvalidInput("move kind does not match the support of the distribution");
  }
  return tmcmc_sample([&](double t) { return dist.log_pdf(t); }, config);
}

/// Sample median; the even-length case averages the two central values.
inline double predict_residual_life(std::vector<double> samples) {
  if (samples.empty()) throw InvalidInput("cannot take the median of no samples");
  const std::size_t n = samples.size();
  const auto mid = samples.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(samples.begin(), mid, samples.end());
  if (n % 2 == 1) return *mid;
  const double upper = *mid;
  const double lower = *std::max_element(samples.begin(), mid);
  return 0.5 * (lower + upper);
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const noexcept { return hi - lo; }
  bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

/// Shortest window [x_(j), x_(j+k)] of the sorted sample with
/// k = ceil(mass * n) - 1; ties go to the smallest lower end.
inline Interval hpd_interval(std::vector<double> samples, double mass = 0.95) {
  if (!(mass > 0.0 && mass < 1.0)) throw InvalidInput("mass must be in (0, 1)");
  if (samples.size() < 20) throw InvalidInput("hpd_interval needs at least 20 samples");
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  // the small offset keeps e.g. 0.95 * 100 from ceiling to 96
  auto need = static_cast<std::size_t>(std::ceil(mass * static_cast<double>(n) - 1e-9));
  need = std::clamp<std::size_t>(need, 1, n);
  const std::size_t k = need - 1;
  std::size_t best = 0;
  double best_width = samples[k] - samples[0];
  for (std::size_t j = 1; j + k < n; ++j) {
    const double w = samples[j + k] - samples[j];
    if (w < best_width) {
      best_width = w;
      best = j;
    }
  }
  return {samples[best], samples[best + k]};
}

}  // namespace bayesrul

#endif  // BAYESRUL_TMCMC_HPP_
