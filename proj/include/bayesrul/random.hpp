#ifndef BAYESRUL_RANDOM_HPP_
#define BAYESRUL_RANDOM_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>

#include "bayesrul/error.hpp"

namespace bayesrul {

/// SplitMix64 finalizer; used to derive independent stream seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed,
                                    std::uint64_t tag) noexcept {
  return splitmix64(splitmix64(seed) ^ splitmix64(tag + 0x632be59bd9b4e019ULL));
}

/// Seedable generator owned by a single chain. Every variate the library
/// draws goes through one of these, so a run is reproducible from its seed.
class Rng {
 public:
  using engine_type = std::mt19937_64;

  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  engine_type& engine() noexcept { return engine_; }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    double u = 0.0;
    do {
      u = std::generate_canonical<double, 53>(engine_);
    } while (u <= 0.0);
    return u;
  }

  double normal(double mean = 0.0, double sd = 1.0) {
    return std::normal_distribution<double>(mean, sd)(engine_);
  }

  double exponential(double rate) {
    return std::exponential_distribution<double>(rate)(engine_);
  }

  /// Shape-rate gamma; mean is shape / rate.
  double gamma(double shape, double rate) {
    return std::exp(log_gamma(shape, rate));
  }

  /// Logarithm of a shape-rate gamma variate. Stays finite for shapes far
  /// below one, where the variate itself underflows.
  double log_gamma(double shape, double rate) {
    if (!(shape > 0.0) || !(rate > 0.0)) {
      throw InvalidInput("gamma parameters must be positive");
    }
    if (shape >= 1.0) {
      double g = 0.0;
      do {
        g = std::gamma_distribution<double>(shape, 1.0)(engine_);
      } while (g <= 0.0);
      return std::log(g) - std::log(rate);
    }
    double g = 0.0;
    do {
      g = std::gamma_distribution<double>(shape + 1.0, 1.0)(engine_);
    } while (g <= 0.0);
    return std::log(g) + std::log(uniform()) / shape - std::log(rate);
  }

  double beta(double a, double b) {
    const double lx = log_gamma(a, 1.0);
    const double ly = log_gamma(b, 1.0);
    // x / (x + y) computed as a logistic of the log ratio
    const double d = ly - lx;
    if (d > 0.0) {
      const double e = std::exp(-d);
      return e / (1.0 + e);
    }
    return 1.0 / (1.0 + std::exp(d));
  }

  double weibull(double shape, double scale) {
    return std::weibull_distribution<double>(shape, scale)(engine_);
  }

  /// Half-Cauchy with density proportional to 1 / (1 + (x/scale)^2), x > 0.
  double half_cauchy(double scale) {
    return scale * std::tan(0.5 * std::numbers::pi * uniform());
  }

  /// Index drawn with probability proportional to exp(log_weights[i]).
  /// Normalization uses log-sum-exp so arbitrarily small weights are fine.
  std::size_t categorical_log(std::span<const double> log_weights) {
    double top = -std::numeric_limits<double>::infinity();
    for (double w : log_weights) top = std::max(top, w);
    if (!std::isfinite(top)) {
      throw InvalidInput("categorical weights are all zero or non-finite");
    }
    double total = 0.0;
    for (double w : log_weights) total += std::exp(w - top);
    double u = uniform() * total;
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
      u -= std::exp(log_weights[i] - top);
      if (u <= 0.0) return i;
    }
    // rounding left a sliver; return the last positive-weight category
    for (std::size_t i = log_weights.size(); i-- > 0;) {
      if (std::isfinite(log_weights[i])) return i;
    }
    return log_weights.size() - 1;
  }

 private:
  engine_type engine_;
};

}  // namespace bayesrul

#endif  // BAYESRUL_RANDOM_HPP_
