#ifndef BAYESRUL_GIBBS_HPP_
#define BAYESRUL_GIBBS_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bayesrul/core.hpp"
#include "bayesrul/error.hpp"
#include "bayesrul/random.hpp"

namespace bayesrul {

/// Full latent state of the blocked Gibbs sampler. Component indices in K
/// are zero-based (0..N-1). The parametric model is the N == 1 case with the
/// stick-breaking layer frozen at p = (1).
struct GibbsState {
  double alpha = 0.0;
  std::vector<double> betas;
  double sigma_eps2 = 1.0;
  std::vector<std::size_t> K;
  std::vector<double> V;
  std::vector<double> p;
  std::vector<double> mu;
  std::vector<double> sigma_h2;
  double sigma_z2 = 1.0;
  double gamma = 1.0;

  std::size_t truncation() const noexcept { return mu.size(); }

  /// Throws InvalidInput when a structural invariant is broken.
  void check_invariants(double simplex_tol = 1e-10) const {
    const std::size_t N = truncation();
    if (N == 0 || V.size() != N || p.size() != N || sigma_h2.size() != N) {
      throw InvalidInput("component arrays disagree on truncation level");
    }
    if (K.size() != betas.size()) throw InvalidInput("K and betas differ in length");
    if (V.back() != 1.0) throw InvalidInput("last stick fraction must be 1");
    double total = 0.0;
    for (double w : p) {
      if (!(w >= 0.0 && w <= 1.0)) throw InvalidInput("mixture weight outside [0, 1]");
      total += w;
    }
    if (std::abs(total - 1.0) > simplex_tol) throw InvalidInput("weights do not sum to 1");
    for (std::size_t k : K) {
      if (k >= N) throw InvalidInput("classification index out of range");
    }
    if (!(sigma_eps2 > 0.0) || !(sigma_z2 > 0.0) || !(gamma > 0.0)) {
      throw InvalidInput("variance or concentration not positive");
    }
    for (double s : sigma_h2) {
      if (!(s > 0.0)) throw InvalidInput("component variance not positive");
    }
  }
};

struct ChainConfig {
  long total_iters = 50000;
  long burn_in = 5000;
  long thin = 50;
  std::uint64_t seed = 1;
  int mh_inner_steps = 1;
  bool keep_full_state = false;

  void validate() const {
    if (total_iters < 1) throw InvalidInput("total_iters must be >= 1");
    if (burn_in < 0 || burn_in >= total_iters) {
      throw InvalidInput("burn_in must be in [0, total_iters)");
    }
    if (thin < 1) throw InvalidInput("thin must be >= 1");
    if (mh_inner_steps < 1) throw InvalidInput("mh_inner_steps must be >= 1");
  }

  long retained_count() const noexcept { return (total_iters - burn_in) / thin; }
};

/// One retained sweep. betas are indexed like DegradationDataset::unit().
struct PosteriorDraw {
  long iter = 0;
  double alpha = 0.0;
  std::vector<double> betas;
  double sigma_eps2 = 1.0;
  std::optional<GibbsState> state;
};

struct NormalParams {
  double mean = 0.0;
  double var = 1.0;
};

/// Shape-rate gamma parameters of a precision.
struct GammaParams {
  double shape = 1.0;
  double rate = 1.0;
};

// --- full conditionals --------------------------------------------------------

inline NormalParams alpha_conditional(const GibbsState& s, const DegradationDataset& data,
                                      const PriorSpec& prior) {
  double resid = 0.0;
  double count = 0.0;
  for (std::size_t i = 0; i < data.unit_count(); ++i) {
    const UnitPath& u = data.unit(i);
    for (std::size_t j = 0; j < u.size(); ++j) resid += u.measurements[j] - s.betas[i] * u.times[j];
    count += static_cast<double>(u.size());
  }
  const double denom = prior.sigma_alpha2 * count + s.sigma_eps2;
  return {(prior.sigma_alpha2 * resid + s.sigma_eps2 * prior.mu_alpha) / denom,
          prior.sigma_alpha2 * s.sigma_eps2 / denom};
}

inline NormalParams beta_conditional(const GibbsState& s, const DegradationDataset& data,
                                     std::size_t i) {
  const UnitPath& u = data.unit(i);
  double stt = 0.0, sty = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) {
    stt += u.times[j] * u.times[j];
    sty += u.times[j] * (u.measurements[j] - s.alpha);
  }
  const std::size_t k = s.K[i];
  const double vk = s.sigma_h2[k];
  const double denom = vk * stt + s.sigma_eps2;
  return {(vk * sty + s.sigma_eps2 * s.mu[k]) / denom, vk * s.sigma_eps2 / denom};
}

inline double sum_squared_residuals(const GibbsState& s, const DegradationDataset& data) {
  double ssr = 0.0;
  for (std::size_t i = 0; i < data.unit_count(); ++i) {
    const UnitPath& u = data.unit(i);
    for (std::size_t j = 0; j < u.size(); ++j) {
      const double r = u.measurements[j] - s.alpha - s.betas[i] * u.times[j];
      ssr += r * r;
    }
  }
  return ssr;
}

inline GammaParams sigma_eps_conditional(const GibbsState& s, const DegradationDataset& data,
                                         const PriorSpec& prior) {
  return {prior.sigma_eps_prior.shape + 0.5 * static_cast<double>(data.total_observations()),
          prior.sigma_eps_prior.rate + 0.5 * sum_squared_residuals(s, data)};
}

/// Unnormalized log classification weights of unit i over the N components.
inline std::vector<double> K_log_weights(const GibbsState& s, std::size_t i) {
  const std::size_t N = s.truncation();
  std::vector<double> lw(N);
  for (std::size_t h = 0; h < N; ++h) {
    const double d = s.betas[i] - s.mu[h];
    lw[h] = std::log(s.p[h]) - 0.5 * std::log(s.sigma_h2[h]) - 0.5 * d * d / s.sigma_h2[h];
  }
  return lw;
}

/// Occupancy r_h over all units in the model (including the new unit).
inline std::vector<long> cluster_counts(const GibbsState& s) {
  std::vector<long> r(s.truncation(), 0);
  for (std::size_t k : s.K) ++r[k];
  return r;
}

/// Beta(1 + r_h, gamma + sum_{l>h} r_l) parameters for h = 0..N-2.
inline std::vector<std::pair<double, double>> V_conditional(const GibbsState& s) {
  const auto r = cluster_counts(s);
  const std::size_t N = s.truncation();
  std::vector<std::pair<double, double>> out;
  if (N < 2) return out;
  out.resize(N - 1);
  long tail = 0;
  for (std::size_t h = N; h-- > 0;) {
    if (h < N - 1) out[h] = {1.0 + static_cast<double>(r[h]), s.gamma + static_cast<double>(tail)};
    tail += r[h];
  }
  return out;
}

inline NormalParams mu_conditional(const GibbsState& s, const PriorSpec& prior, std::size_t h) {
  long n_h = 0;
  double sum = 0.0;
  for (std::size_t i = 0; i < s.K.size(); ++i) {
    if (s.K[i] == h) {
      ++n_h;
      sum += s.betas[i];
    }
  }
  if (n_h == 0) return {prior.m_mu, s.sigma_z2};
  const double vh = s.sigma_h2[h];
  const double var = vh * s.sigma_z2 / (static_cast<double>(n_h) * s.sigma_z2 + vh);
  return {var * (sum / vh + prior.m_mu / s.sigma_z2), var};
}

inline double mu_sum_squares(const GibbsState& s, const PriorSpec& prior) {
  double ss = 0.0;
  for (double m : s.mu) ss += (m - prior.m_mu) * (m - prior.m_mu);
  return ss;
}

/// Precision conditional of sigma_z^2 under a gamma prior.
inline GammaParams sigma_z_gamma_conditional(const GibbsState& s, const PriorSpec& prior) {
  const auto& g = std::get<GammaPrior>(prior.sigma_z_prior);
  return {g.shape + 0.5 * static_cast<double>(s.truncation()),
          g.rate + 0.5 * mu_sum_squares(s, prior)};
}

/// Unnormalized log conditional of sigma_z under the half-Cauchy prior.
inline double sigma_z_log_target(const GibbsState& s, const PriorSpec& prior, double sd) {
  if (!(sd > 0.0)) return -std::numeric_limits<double>::infinity();
  const auto& hc = std::get<HalfCauchyPrior>(prior.sigma_z_prior);
  return -static_cast<double>(s.truncation()) * std::log(sd) -
         0.5 * mu_sum_squares(s, prior) / (sd * sd) + hc.log_density(sd);
}

struct ComponentSpread {
  long r = 0;
  double ss = 0.0;  // sum over members of (beta_i - mu_h)^2
};

inline ComponentSpread component_spread(const GibbsState& s, std::size_t h) {
  ComponentSpread out;
  for (std::size_t i = 0; i < s.K.size(); ++i) {
    if (s.K[i] == h) {
      ++out.r;
      const double d = s.betas[i] - s.mu[h];
      out.ss += d * d;
    }
  }
  return out;
}

/// Precision conditional of sigma_h^2 under a gamma prior (prior itself
/// when the component is empty).
inline GammaParams sigma_h_gamma_conditional(const GibbsState& s, const PriorSpec& prior,
                                             std::size_t h) {
  const auto& g = std::get<GammaPrior>(prior.sigma_h_prior);
  const auto c = component_spread(s, h);
  return {g.shape + 0.5 * static_cast<double>(c.r), g.rate + 0.5 * c.ss};
}

inline double sigma_h_log_target(const GibbsState& s, const PriorSpec& prior, std::size_t h,
                                 double sd) {
  if (!(sd > 0.0)) return -std::numeric_limits<double>::infinity();
  const auto& hc = std::get<HalfCauchyPrior>(prior.sigma_h_prior);
  const auto c = component_spread(s, h);
  return -static_cast<double>(c.r) * std::log(sd) - 0.5 * c.ss / (sd * sd) + hc.log_density(sd);
}

inline constexpr double kMaxStickFraction = 1.0 - 1e-12;

inline GammaParams gamma_conditional(const GibbsState& s, const PriorSpec& prior) {
  const std::size_t N = s.truncation();
  double log_sum = 0.0;
  for (std::size_t k = 0; k + 1 < N; ++k) {
    log_sum += std::log1p(-std::min(s.V[k], kMaxStickFraction));
  }
  return {static_cast<double>(N) + prior.gamma_prior.shape - 1.0,
          prior.gamma_prior.rate - log_sum};
}

// --- Metropolis-Hastings for standard deviations ------------------------------

/// Metropolis-Hastings on (0, inf) with proposal Gamma(shape 1, rate =
/// current value) and the full Hastings correction for its asymmetry.
template <typename LogTarget>
double gamma_proposal_mh(double current, LogTarget&& log_target, Rng& rng, int steps = 1) {
  double log_cur = log_target(current);
  for (int step = 0; step < steps; ++step) {
    double prop = 0.0;
    do {
      prop = rng.exponential(current);
    } while (!(prop > 0.0));
    const double log_prop = log_target(prop);
    // log q(x | y) = log y - y x for the exponential proposal with rate y
    const double log_q_back = std::log(prop) - prop * current;
    const double log_q_fwd = std::log(current) - current * prop;
    const double log_ratio = log_prop - log_cur + log_q_back - log_q_fwd;
    if (log_ratio >= 0.0 || std::log(rng.uniform()) < log_ratio) {
      current = prop;
      log_cur = log_prop;
    }
  }
  return current;
}

// --- single-site updates ----------------------------------------------------

inline double update_alpha(GibbsState& s, const DegradationDataset& data, const PriorSpec& prior,
                           Rng& rng) {
  const auto c = alpha_conditional(s, data, prior);
  s.alpha = rng.normal(c.mean, std::sqrt(c.var));
  return s.alpha;
}

inline double update_beta(GibbsState& s, const DegradationDataset& data, std::size_t i,
                          Rng& rng) {
  const auto c = beta_conditional(s, data, i);
  s.betas[i] = rng.normal(c.mean, std::sqrt(c.var));
  return s.betas[i];
}

inline double update_sigma_eps(GibbsState& s, const DegradationDataset& data,
                               const PriorSpec& prior, Rng& rng) {
  const auto c = sigma_eps_conditional(s, data, prior);
  s.sigma_eps2 = std::exp(-rng.log_gamma(c.shape, c.rate));
  return s.sigma_eps2;
}

inline std::size_t update_K(GibbsState& s, std::size_t i, Rng& rng) {
  const auto lw = K_log_weights(s, i);
  s.K[i] = rng.categorical_log(lw);
  return s.K[i];
}

inline const std::vector<double>& update_V_and_p(GibbsState& s, Rng& rng) {
  const auto params = V_conditional(s);
  for (std::size_t h = 0; h < params.size(); ++h) {
    s.V[h] = std::min(rng.beta(params[h].first, params[h].second), kMaxStickFraction);
  }
  s.V.back() = 1.0;
  s.p = stick_breaking(s.V);
  return s.p;
}

inline const std::vector<double>& update_mu(GibbsState& s, const PriorSpec& prior, Rng& rng) {
  for (std::size_t h = 0; h < s.truncation(); ++h) {
    const auto c = mu_conditional(s, prior, h);
    s.mu[h] = rng.normal(c.mean, std::sqrt(c.var));
  }
  return s.mu;
}

inline double update_sigma_z(GibbsState& s, const PriorSpec& prior, Rng& rng, int mh_steps = 1) {
  if (std::holds_alternative<GammaPrior>(prior.sigma_z_prior)) {
    const auto c = sigma_z_gamma_conditional(s, prior);
    s.sigma_z2 = std::exp(-rng.log_gamma(c.shape, c.rate));
  } else {
    const double sd = gamma_proposal_mh(
        std::sqrt(s.sigma_z2), [&](double x) { return sigma_z_log_target(s, prior, x); }, rng,
        mh_steps);
    s.sigma_z2 = sd * sd;
  }
  return s.sigma_z2;
}

inline const std::vector<double>& update_sigma_h(GibbsState& s, const PriorSpec& prior, Rng& rng,
                                                 int mh_steps = 1) {
  const bool gamma_branch = std::holds_alternative<GammaPrior>(prior.sigma_h_prior);
  const auto r = cluster_counts(s);
  for (std::size_t h = 0; h < s.truncation(); ++h) {
    if (gamma_branch) {
      const auto c = sigma_h_gamma_conditional(s, prior, h);
      s.sigma_h2[h] = std::exp(-rng.log_gamma(c.shape, c.rate));
    } else if (r[h] == 0) {
      double sd = 0.0;
      do {
        sd = rng.half_cauchy(std::get<HalfCauchyPrior>(prior.sigma_h_prior).scale());
      } while (!(sd > 0.0) || !std::isfinite(sd));
      s.sigma_h2[h] = sd * sd;
    } else {
      const double sd = gamma_proposal_mh(
          std::sqrt(s.sigma_h2[h]), [&](double x) { return sigma_h_log_target(s, prior, h, x); },
          rng, mh_steps);
      s.sigma_h2[h] = sd * sd;
    }
  }
  return s.sigma_h2;
}

inline double update_gamma(GibbsState& s, const PriorSpec& prior, Rng& rng) {
  const auto c = gamma_conditional(s, prior);
  s.gamma = rng.gamma(c.shape, c.rate);
  // a concentration that underflows would freeze the sticks at V = 1
  s.gamma = std::max(s.gamma, std::numeric_limits<double>::min());
  return s.gamma;
}

// --- chain driver -------------------------------------------------------------

/// Deterministic starting point: per-unit least squares for alpha and the
/// betas, every unit in its own component, uniform mixture weights.
inline GibbsState initial_state(const DegradationDataset& data, const PriorSpec& prior) {
  const std::size_t n = data.unit_count();
  const std::size_t N = static_cast<std::size_t>(prior.resolved_truncation(n));
  GibbsState s;
  std::vector<double> intercepts;
  std::vector<std::optional<double>> slopes(n);
  for (std::size_t i = 0; i < n; ++i) {
    const UnitPath& u = data.unit(i);
    if (u.size() >= 2) {
      const auto [a, b] = least_squares_line(u.times, u.measurements);
      intercepts.push_back(a);
      slopes[i] = b;
    }
  }
  if (intercepts.empty()) {
    double ysum = 0.0;
    for (std::size_t i = 0; i < n; ++i) ysum += data.unit(i).measurements.front();
    s.alpha = ysum / static_cast<double>(n);
  } else {
    s.alpha = std::accumulate(intercepts.begin(), intercepts.end(), 0.0) /
              static_cast<double>(intercepts.size());
  }
  s.betas.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (slopes[i]) {
      s.betas[i] = *slopes[i];
    } else {
      const UnitPath& u = data.unit(i);
      s.betas[i] = u.times.back() > 0.0 ? (u.measurements.back() - s.alpha) / u.times.back()
                                        : prior.m_mu;
    }
  }
  const double beta_mean = std::accumulate(s.betas.begin(), s.betas.end(), 0.0) / n;
  double beta_var = 0.0;
  for (double b : s.betas) beta_var += (b - beta_mean) * (b - beta_mean);
  beta_var = n > 1 ? beta_var / static_cast<double>(n - 1) : 1.0;
  beta_var = std::max(beta_var, 1e-2);

  s.sigma_eps2 = std::max(sum_squared_residuals(s, data) /
                              std::max<double>(1.0, static_cast<double>(data.total_observations())),
                          1e-3);
  s.K.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.K[i] = i % N;
  s.V.resize(N);
  for (std::size_t h = 0; h < N; ++h) s.V[h] = 1.0 / static_cast<double>(N - h);
  s.V.back() = 1.0;
  s.p = stick_breaking(s.V);
  s.mu.assign(N, beta_mean);
  for (std::size_t i = 0; i < n; ++i) s.mu[s.K[i]] = s.betas[i];
  s.sigma_h2.assign(N, beta_var);
  s.sigma_z2 = beta_var;
  s.gamma = 1.0;
  return s;
}

namespace detail {

inline void require_finite(double x, const char* update, long iter) {
  if (!std::isfinite(x)) throw ChainDivergence(update, iter);
}

inline void require_finite(const std::vector<double>& xs, const char* update, long iter) {
  for (double x : xs) require_finite(x, update, iter);
}

}  // namespace detail

/// One full scan in the fixed order alpha, betas, sigma_eps^2, K, p, mu,
/// sigma_z, sigma_h, gamma. The mixture-layer updates are skipped when the
/// truncation level is 1 (parametric model).
inline void gibbs_sweep(GibbsState& s, const DegradationDataset& data, const PriorSpec& prior,
                        Rng& rng, long iter = 0, int mh_steps = 1) {
  using detail::require_finite;
  const bool mixture = s.truncation() > 1;

  require_finite(update_alpha(s, data, prior, rng), "alpha", iter);
  for (std::size_t i = 0; i < s.betas.size(); ++i) {
    require_finite(update_beta(s, data, i, rng), "beta", iter);
  }
  require_finite(update_sigma_eps(s, data, prior, rng), "sigma_eps2", iter);
  if (!(s.sigma_eps2 > 0.0)) throw ChainDivergence("sigma_eps2", iter);
  if (mixture) {
    for (std::size_t i = 0; i < s.betas.size(); ++i) update_K(s, i, rng);
    require_finite(update_V_and_p(s, rng), "p", iter);
  }
  require_finite(update_mu(s, prior, rng), "mu", iter);
  require_finite(update_sigma_z(s, prior, rng, mh_steps), "sigma_z2", iter);
  if (!(s.sigma_z2 > 0.0)) throw ChainDivergence("sigma_z2", iter);
  require_finite(update_sigma_h(s, prior, rng, mh_steps), "sigma_h2", iter);
  for (double v : s.sigma_h2) {
    if (!(v > 0.0)) throw ChainDivergence("sigma_h2", iter);
  }
  if (mixture) require_finite(update_gamma(s, prior, rng), "gamma", iter);
}

/// Runs the sampler for either model kind and returns the thinned draws.
inline std::vector<PosteriorDraw> sample_posterior(const DegradationDataset& data,
                                                   const PriorSpec& prior,
                                                   const ChainConfig& config) {
  data.validate();
  prior.validate();
  config.validate();
  GibbsState state = initial_state(data, prior);
  Rng rng(config.seed);
  std::vector<PosteriorDraw> draws;
  draws.reserve(static_cast<std::size_t>(config.retained_count()));
  for (long it = 1; it <= config.total_iters; ++it) {
    gibbs_sweep(state, data, prior, rng, it, config.mh_inner_steps);
    if (it > config.burn_in && (it - config.burn_in) % config.thin == 0) {
      PosteriorDraw d{it, state.alpha, state.betas, state.sigma_eps2, std::nullopt};
      if (config.keep_full_state) d.state = state;
      draws.push_back(std::move(d));
    }
  }
  return draws;
}

/// Blocked Gibbs sampler for the Dirichlet-process mixture model.
inline std::vector<PosteriorDraw> run_chain(const DegradationDataset& data, const PriorSpec& prior,
                                            const ChainConfig& config) {
  if (prior.kind != ModelKind::SemiParametric) {
    throw InvalidInput("run_chain expects a semi-parametric prior");
  }
  return sample_posterior(data, prior, config);
}

/// Gibbs sampler for the unimodal normal random-effect model.
inline std::vector<PosteriorDraw> run_parametric_chain(const DegradationDataset& data,
                                                       const PriorSpec& prior,
                                                       const ChainConfig& config) {
  if (prior.kind != ModelKind::Parametric) {
    throw InvalidInput("run_parametric_chain expects a parametric prior");
  }
  return sample_posterior(data, prior, config);
}

struct FilteredDraws {
  std::vector<PosteriorDraw> draws;
  double retained_fraction = 0.0;
};

/// Keeps the draws whose slope for the given unit is positive.
inline FilteredDraws filter_positive_beta(const std::vector<PosteriorDraw>& draws,
                                          std::size_t unit_index) {
  FilteredDraws out;
  for (const auto& d : draws) {
    if (unit_index >= d.betas.size()) throw InvalidInput("unit index out of range");
    if (d.betas[unit_index] > 0.0) out.draws.push_back(d);
  }
  if (out.draws.empty()) {
    throw EmptyPosterior("no posterior draw has a positive slope for unit " +
                         std::to_string(unit_index));
  }
  out.retained_fraction =
      static_cast<double>(out.draws.size()) / static_cast<double>(draws.size());
  return out;
}

}  // namespace bayesrul

#endif  // BAYESRUL_GIBBS_HPP_
