#ifndef BAYESRUL_DIAGNOSTICS_HPP_
#define BAYESRUL_DIAGNOSTICS_HPP_

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "bayesrul/error.hpp"

namespace bayesrul {

struct Autocorrelation {
  std::vector<double> rho;  // rho[k] for k = 0..max_lag
  bool degenerate = false;  // constant chain
};

namespace detail {

inline double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

inline double lag_covariance_sum(std::span<const double> x, double mean, std::size_t lag) {
  double acc = 0.0;
  for (std::size_t t = 0; t + lag < x.size(); ++t) acc += (x[t] - mean) * (x[t + lag] - mean);
  return acc;
}

}  // namespace detail

/// Sample autocorrelation function up to max_lag.
inline Autocorrelation autocorrelation(std::span<const double> chain, std::size_t max_lag) {
  if (chain.size() <= max_lag) throw InvalidInput("chain must be longer than max_lag");
  Autocorrelation out;
  out.rho.assign(max_lag + 1, 0.0);
  out.rho[0] = 1.0;
  const double m = detail::mean_of(chain);
  const double c0 = detail::lag_covariance_sum(chain, m, 0);
  if (!(c0 > 0.0)) {
    out.degenerate = true;
    return out;
  }
  for (std::size_t k = 1; k <= max_lag; ++k) {
    out.rho[k] = detail::lag_covariance_sum(chain, m, k) / c0;
  }
  return out;
}

/// Type-7 quantile (linear interpolation between order statistics) of a
/// sorted sample.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidInput("quantile of an empty sample");
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> sample, double q) {
  std::sort(sample.begin(), sample.end());
  return quantile_sorted(sample, q);
}

/// n / (1 + 2 * sum of rho(k)), summing k >= 1 up to the first negative
/// autocorrelation.
inline double effective_sample_size(std::span<const double> chain, bool* degenerate = nullptr) {
  const std::size_t n = chain.size();
  const double m = detail::mean_of(chain);
  const double c0 = detail::lag_covariance_sum(chain, m, 0);
  if (degenerate) *degenerate = !(c0 > 0.0);
  if (!(c0 > 0.0)) return 1.0;
  double sum = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    const double rho = detail::lag_covariance_sum(chain, m, k) / c0;
    if (rho < 0.0) break;
    sum += rho;
  }
  return static_cast<double>(n) / (1.0 + 2.0 * sum);
}

struct PosteriorSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
  double ci_lo = 0.0;  // 2.5% equal-tail
  double ci_hi = 0.0;  // 97.5% equal-tail
  double ess = 0.0;
  bool degenerate = false;
};

inline PosteriorSummary summarize(std::span<const double> chain, std::string name) {
  if (chain.size() < 2) throw InvalidInput("summarize needs at least two values");
  PosteriorSummary s;
  s.name = std::move(name);
  const double n = static_cast<double>(chain.size());
  s.mean = detail::mean_of(chain);
  double ss = 0.0;
  for (double x : chain) ss += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(ss / (n - 1.0));
  std::vector<double> sorted(chain.begin(), chain.end());
  std::sort(sorted.begin(), sorted.end());
  s.median = quantile_sorted(sorted, 0.5);
  s.ci_lo = quantile_sorted(sorted, 0.025);
  s.ci_hi = quantile_sorted(sorted, 0.975);
  s.ess = effective_sample_size(chain, &s.degenerate);
  return s;
}

}  // namespace bayesrul

#endif  // BAYESRUL_DIAGNOSTICS_HPP_
