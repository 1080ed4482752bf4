#ifndef BAYESRUL_RUL_HPP_
#define BAYESRUL_RUL_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include "bayesrul/core.hpp"
#include "bayesrul/error.hpp"
#include "bayesrul/gibbs.hpp"

namespace bayesrul {

// --- standard normal --------------------------------------------------------

inline double normal_cdf(double z) noexcept {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

inline double normal_log_pdf(double z) noexcept {
  constexpr double kLogSqrt2Pi = 0.91893853320467274178;
  return -0.5 * z * z - kLogSqrt2Pi;
}

inline double normal_pdf(double z) noexcept { return std::exp(normal_log_pdf(z)); }

// --- residual-life distribution ---------------------------------------------

/// Posterior triple entering the mixture-of-normal-crossings distribution.
struct RulTriple {
  double alpha = 0.0;
  double beta = 1.0;
  double sigma_eps = 1.0;  // standard deviation, not variance
};

/// Residual life of a unit observed up to t_k, averaged over posterior
/// triples. With `constrained` the distribution is conditioned on T > 0.
class RulDistribution {
 public:
  RulDistribution(std::vector<RulTriple> triples, double t_k, double threshold_D,
                  bool constrained)
      : triples_(std::move(triples)), t_k_(t_k), D_(threshold_D), constrained_(constrained) {
    if (triples_.empty()) throw InvalidInput("residual-life distribution needs a triple");
    if (!std::isfinite(t_k_) || t_k_ < 0.0) throw InvalidInput("t_k must be finite and >= 0");
    if (!std::isfinite(D_)) throw InvalidInput("threshold must be finite");
    for (const auto& tr : triples_) {
      if (!(tr.beta > 0.0)) throw InvalidInput("slopes must be positive");
      if (!(tr.sigma_eps > 0.0)) throw InvalidInput("sigma_eps must be positive");
    }
    double tail = 0.0;  // 1 - F(0), summed on the upper tail for accuracy
    for (const auto& tr : triples_) tail += normal_cdf(-z(tr, 0.0));
    survival_at_zero_ = tail / static_cast<double>(triples_.size());
    if (constrained_ && survival_at_zero_ < 1e-12) {
      throw DegenerateDistribution("no residual-life mass beyond t = 0");
    }
  }

  const std::vector<RulTriple>& triples() const noexcept { return triples_; }
  double t_k() const noexcept { return t_k_; }
  double threshold() const noexcept { return D_; }
  bool constrained() const noexcept { return constrained_; }
  /// 1 - F(0) of the unconstrained form.
  double survival_at_zero() const noexcept { return survival_at_zero_; }

  double cdf(double t) const {
    const double n = static_cast<double>(triples_.size());
    if (!constrained_) {
      double acc = 0.0;
      for (const auto& tr : triples_) acc += normal_cdf(z(tr, t));
      return acc / n;
    }
    if (t <= 0.0) return 0.0;
    double acc = 0.0;
    for (const auto& tr : triples_) acc += normal_cdf(z(tr, t)) - normal_cdf(z(tr, 0.0));
    return std::clamp(acc / n / survival_at_zero_, 0.0, 1.0);
  }

  double log_pdf(double t) const {
    if (constrained_ && t < 0.0) return -std::numeric_limits<double>::infinity();
    double top = -std::numeric_limits<double>::infinity();
    thread_local std::vector<double> terms;
    terms.resize(triples_.size());
    for (std::size_t i = 0; i < triples_.size(); ++i) {
      const auto& tr = triples_[i];
      terms[i] = normal_log_pdf(z(tr, t)) + std::log(tr.beta / tr.sigma_eps);
      top = std::max(top, terms[i]);
    }
    if (!std::isfinite(top)) return top;
    double acc = 0.0;
    for (double v : terms) acc += std::exp(v - top);
    double out = top + std::log(acc / static_cast<double>(triples_.size()));
    if (constrained_) out -= std::log(survival_at_zero_);
    return out;
  }

  double pdf(double t) const { return std::exp(log_pdf(t)); }

  /// Smallest t with cdf(t) >= q, by bracketing and bisection.
  double quantile(double q) const {
    if (!(q > 0.0 && q < 1.0)) throw InvalidInput("quantile level must be in (0, 1)");
    double lo = constrained_ ? 0.0 : -1.0;
    while (cdf(lo) > q) lo = lo * 2.0 - 1.0;
    double hi = 1.0;
    while (cdf(hi) < q) {
      hi *= 2.0;
      if (hi > 1e12) throw DegenerateDistribution("quantile search did not converge");
    }
    for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      (cdf(mid) < q ? lo : hi) = mid;
    }
    return hi;
  }

 private:
  double z(const RulTriple& tr, double t) const noexcept {
    return (tr.alpha + tr.beta * (t + t_k_) - D_) / tr.sigma_eps;
  }

  std::vector<RulTriple> triples_;
  double t_k_;
  double D_;
  bool constrained_;
  double survival_at_zero_ = 1.0;
};

inline double rul_cdf(const RulDistribution& dist, double t) { return dist.cdf(t); }
inline double rul_pdf(const RulDistribution& dist, double t) { return dist.pdf(t); }

/// Residual-life distribution of the unit at `unit_index` from draws whose
/// slope for that unit is positive (see filter_positive_beta).
inline RulDistribution make_rul_distribution(const std::vector<PosteriorDraw>& draws,
                                             std::size_t unit_index, double t_k,
                                             double threshold_D, bool constrained) {
  std::vector<RulTriple> triples;
  triples.reserve(draws.size());
  for (const auto& d : draws) {
    triples.push_back({d.alpha, d.betas.at(unit_index), std::sqrt(d.sigma_eps2)});
  }
  return RulDistribution(std::move(triples), t_k, threshold_D, constrained);
}

/// Single-parameter residual-life CDF; with `constrained` it is conditioned
/// on T > 0.
inline double rul_cdf_single(const LinearPathParams& params, double t_k, double D, double t,
                             bool constrained) {
  if (!(params.beta > 0.0)) throw InvalidInput("slope must be positive");
  if (!(params.sigma_eps2 > 0.0)) throw InvalidInput("sigma_eps2 must be positive");
  const double sd = std::sqrt(params.sigma_eps2);
  const double z_t = (params.alpha + params.beta * (t + t_k) - D) / sd;
  if (!constrained) return normal_cdf(z_t);
  if (t <= 0.0) return 0.0;
  const double z_0 = (params.alpha + params.beta * t_k - D) / sd;
  const double survival = normal_cdf(-z_0);
  if (survival < 1e-12) throw DegenerateDistribution("no residual-life mass beyond t = 0");
  return std::clamp((normal_cdf(z_t) - normal_cdf(z_0)) / survival, 0.0, 1.0);
}

// --- distances ----------------------------------------------------------------

/// max over the grid of |a(t) - b(t)|.
template <typename CdfA, typename CdfB>
double ks_distance(CdfA&& cdf_a, CdfB&& cdf_b, std::span<const double> grid) {
  if (grid.empty()) throw InvalidInput("ks_distance needs a non-empty grid");
  double worst = 0.0;
  for (double t : grid) worst = std::max(worst, std::abs(cdf_a(t) - cdf_b(t)));
  return worst;
}

/// Exact one-sample KS statistic of `samples` against a continuous CDF.
template <typename Cdf>
double ks_statistic(std::vector<double> samples, Cdf&& cdf) {
  if (samples.empty()) throw InvalidInput("ks_statistic needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    worst = std::max({worst, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return worst;
}

inline std::vector<double> linear_grid(double lo, double hi, std::size_t points) {
  if (points < 2) return {lo};
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) {
    grid[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
  }
  return grid;
}

/// Distance between the residual-life law of the data-generating
/// parameters (single triple, constrained) and an approximated
/// distribution, on 2000 points over [0, q], q being the larger 0.9999
/// quantile of the two.
inline double true_vs_approx_ks(const LinearPathParams& truth, const RulDistribution& approx,
                                std::size_t points = 2000) {
  const RulDistribution exact({{truth.alpha, truth.beta, std::sqrt(truth.sigma_eps2)}},
                              approx.t_k(), approx.threshold(), true);
  const double q = std::max(exact.quantile(0.9999), approx.quantile(0.9999));
  const auto grid = linear_grid(0.0, q, points);
  return ks_distance([&](double t) { return exact.cdf(t); },
                     [&](double t) { return approx.cdf(t); }, grid);
}

}  // namespace bayesrul

#endif  // BAYESRUL_RUL_HPP_
