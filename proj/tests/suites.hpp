#ifndef BAYESRUL_TESTS_SUITES_HPP_
#define BAYESRUL_TESTS_SUITES_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bayesrul/diagnostics.hpp"
#include "bayesrul/gibbs.hpp"
#include "bayesrul/random.hpp"
#include "oracles.hpp"

namespace suites {

using namespace bayesrul;

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass() const { return value < tolerance; }
};

namespace detail {

/// Empirical CDF distance against the joint density tabulated along one
/// coordinate. `set` writes the coordinate into a copy of the state.
inline double ks_vs_joint(const std::vector<double>& xs, const GibbsState& base, const DegradationDataset& data,
                          const PriorSpec& prior, const std::function<void(GibbsState&, double)>& set,
                          bool positive) {
  const auto [mn, mx] = std::minmax_element(xs.begin(), xs.end());
  auto log_f = [&](double x) {
    GibbsState s = base;
    set(s, x);
    return oracle::log_joint(s, data, prior);
  };
  if (positive) {
    const oracle::GridDensity g(log_f, std::log(*mn) - 6.0, std::log(*mx) + 6.0, 200001, true);
    return oracle::ks(xs, [&](double x) { return g.cdf(x); });
  }
  const double pad = 4.0 * (*mx - *mn);
  const oracle::GridDensity g(log_f, *mn - pad, *mx + pad, 200001, false);
  return oracle::ks(xs, [&](double x) { return g.cdf(x); });
}

template <typename Update>
std::vector<double> repeat(const GibbsState& base, Rng& rng, int n, Update&& update) {
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) {
    GibbsState s = base;
    xs[i] = update(s, rng);
  }
  return xs;
}

/// Long run of an update applied to its own output, other coordinates fixed.
template <typename Update>
std::vector<double> chain(GibbsState s, Rng& rng, int n, int thin, Update&& update) {
  std::vector<double> xs(n);
  for (int i = 0; i < 1000; ++i) update(s, rng);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < thin; ++k) update(s, rng);
    xs[i] = update(s, rng);
  }
  return xs;
}

inline double discrete_distance(const std::vector<long>& counts, const std::vector<double>& probs) {
  double total = 0.0;
  for (long c : counts) total += static_cast<double>(c);
  double cf = 0.0, cp = 0.0, d = 0.0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    cf += static_cast<double>(counts[k]) / total;
    cp += probs[k];
    d = std::max(d, std::abs(cf - cp));
  }
  return d;
}

}  // namespace detail

/// Every full conditional of the sampler on the two-unit toy state: 1e5
/// single-update draws against the joint density tabulated along the
/// updated coordinate.
inline std::vector<Check> conditional_suite(std::uint64_t seed = 2024, int n = 100000, int mh_thin = 20) {
  using detail::chain;
  using detail::ks_vs_joint;
  using detail::repeat;
  const auto data = oracle::toy_data();
  const auto prior = oracle::toy_prior(false);
  const auto hc = oracle::toy_prior(true);
  const GibbsState base = oracle::toy_state();
  GibbsState pooled = base;  // both units in component 0, component 1 empty
  pooled.K = {0, 0};
  Rng rng(seed);
  std::vector<Check> out;
  constexpr double kTol = 0.01;
  constexpr double kMhTol = 0.02;

  auto inv = [](double v) { return 1.0 / v; };

  {
    const auto xs = repeat(base, rng, n, [&](GibbsState& s, Rng& r) { return update_alpha(s, data, prior, r); });
    out.push_back({"alpha", ks_vs_joint(xs, base, data, prior, [](GibbsState& s, double x) { s.alpha = x; }, false), kTol});
  }
  for (std::size_t i = 0; i < 2; ++i) {
    const auto xs = repeat(base, rng, n, [&](GibbsState& s, Rng& r) { return update_beta(s, data, i, r); });
    out.push_back({"beta_" + std::to_string(i + 1),
                   ks_vs_joint(xs, base, data, prior, [i](GibbsState& s, double x) { s.betas[i] = x; }, false), kTol});
  }
  {
    const auto xs = repeat(base, rng, n, [&](GibbsState& s, Rng& r) { return inv(update_sigma_eps(s, data, prior, r)); });
    out.push_back({"sigma_eps precision",
                   ks_vs_joint(xs, base, data, prior, [](GibbsState& s, double x) { s.sigma_eps2 = 1.0 / x; }, true),
                   kTol});
  }
  for (const GibbsState* st : std::initializer_list<const GibbsState*>{&base, &pooled}) {
    for (std::size_t i = 0; i < 2; ++i) {
      std::vector<double> lp(2);
      for (std::size_t h = 0; h < 2; ++h) {
        GibbsState s = *st;
        s.K[i] = h;
        lp[h] = oracle::log_joint(s, data, prior);
      }
      const double top = std::max(lp[0], lp[1]);
      const double z = std::exp(lp[0] - top) + std::exp(lp[1] - top);
      const std::vector<double> probs{std::exp(lp[0] - top) / z, std::exp(lp[1] - top) / z};
      std::vector<long> counts(2, 0);
      for (int k = 0; k < n; ++k) {
        GibbsState s = *st;
        ++counts[update_K(s, i, rng)];
      }
      out.push_back({"K_" + std::to_string(i + 1) + (st == &base ? "" : " (pooled)"),
                     detail::discrete_distance(counts, probs), kTol});
    }
  }
  for (const GibbsState* st : std::initializer_list<const GibbsState*>{&base, &pooled}) {
    const auto xs = repeat(*st, rng, n, [&](GibbsState& s, Rng& r) { return update_V_and_p(s, r), s.V[0]; });
    out.push_back({std::string("V_1") + (st == &base ? "" : " (pooled)"),
                   ks_vs_joint(xs, *st, data, prior, [](GibbsState& s, double x) { s.V[0] = x; }, false), kTol});
  }
  for (std::size_t h = 0; h < 2; ++h) {
    const auto xs = repeat(pooled, rng, n, [&](GibbsState& s, Rng& r) { return update_mu(s, prior, r)[h]; });
    out.push_back({"mu_" + std::to_string(h + 1) + (h == 0 ? " (occupied)" : " (empty)"),
                   ks_vs_joint(xs, pooled, data, prior, [h](GibbsState& s, double x) { s.mu[h] = x; }, false), kTol});
  }
  {
    const auto xs = repeat(base, rng, n, [&](GibbsState& s, Rng& r) { return inv(update_sigma_z(s, prior, r)); });
    out.push_back({"sigma_z precision",
                   ks_vs_joint(xs, base, data, prior, [](GibbsState& s, double x) { s.sigma_z2 = 1.0 / x; }, true),
                   kTol});
  }
  {
    const auto xs = chain(base, rng, n, mh_thin,
                          [&](GibbsState& s, Rng& r) { return std::sqrt(update_sigma_z(s, hc, r)); });
    out.push_back({"sigma_z half-Cauchy MH",
                   ks_vs_joint(xs, base, data, hc, [](GibbsState& s, double x) { s.sigma_z2 = x * x; }, true),
                   kMhTol});
  }
  for (std::size_t h = 0; h < 2; ++h) {
    const auto xs = repeat(pooled, rng, n, [&](GibbsState& s, Rng& r) { return inv(update_sigma_h(s, prior, r)[h]); });
    out.push_back({"sigma_h precision " + std::to_string(h + 1) + (h == 0 ? " (occupied)" : " (empty)"),
                   ks_vs_joint(xs, pooled, data, prior, [h](GibbsState& s, double x) { s.sigma_h2[h] = 1.0 / x; }, true),
                   kTol});
  }
  {
    const auto xs = chain(pooled, rng, n, mh_thin,
                          [&](GibbsState& s, Rng& r) { return std::sqrt(update_sigma_h(s, hc, r)[0]); });
    out.push_back({"sigma_h half-Cauchy MH (occupied)",
                   ks_vs_joint(xs, pooled, data, hc, [](GibbsState& s, double x) { s.sigma_h2[0] = x * x; }, true),
                   kMhTol});
    const auto ys = repeat(pooled, rng, n, [&](GibbsState& s, Rng& r) { return std::sqrt(update_sigma_h(s, hc, r)[1]); });
    out.push_back({"sigma_h half-Cauchy (empty)",
                   ks_vs_joint(ys, pooled, data, hc, [](GibbsState& s, double x) { s.sigma_h2[1] = x * x; }, true),
                   kTol});
  }
  {
    const auto xs = repeat(base, rng, n, [&](GibbsState& s, Rng& r) { return update_gamma(s, prior, r); });
    out.push_back({"gamma", ks_vs_joint(xs, base, data, prior, [](GibbsState& s, double x) { s.gamma = x; }, true), kTol});
  }
  return out;
}

// --- joint-distribution (Geweke) test ------------------------------------------

inline PriorSpec geweke_prior(ModelKind kind, bool half_cauchy) {
  PriorSpec p;
  p.kind = kind;
  p.mu_alpha = 1.0;
  p.sigma_alpha2 = 0.5;
  p.m_mu = 3.0;
  p.sigma_eps_prior = {3.0, 2.0};
  p.gamma_prior = {2.0, 2.0};
  if (half_cauchy) {
    p.sigma_z_prior = HalfCauchyPrior{1.0};
    p.sigma_h_prior = HalfCauchyPrior{1.0};
  } else {
    p.sigma_z_prior = GammaPrior{3.0, 1.0};
    p.sigma_h_prior = GammaPrior{3.0, 1.0};
  }
  if (kind == ModelKind::Parametric) p.truncation_N = 1;
  return p;
}

inline double draw_sd_prior(const VariancePrior& vp, Rng& rng) {
  if (const auto* g = std::get_if<GammaPrior>(&vp)) return 1.0 / std::sqrt(rng.gamma(g->shape, g->rate));
  return rng.half_cauchy(std::get<HalfCauchyPrior>(vp).scale());
}

/// Draws every parameter from the prior and new measurements given them.
inline GibbsState forward_draw(const PriorSpec& prior, std::size_t units, Rng& rng) {
  GibbsState s;
  const std::size_t N = static_cast<std::size_t>(prior.resolved_truncation(units));
  s.alpha = rng.normal(prior.mu_alpha, std::sqrt(prior.sigma_alpha2));
  s.sigma_eps2 = 1.0 / rng.gamma(prior.sigma_eps_prior.shape, prior.sigma_eps_prior.rate);
  s.gamma = N > 1 ? rng.gamma(prior.gamma_prior.shape, prior.gamma_prior.rate) : 1.0;
  s.V.assign(N, 1.0);
  for (std::size_t h = 0; h + 1 < N; ++h) s.V[h] = std::min(rng.beta(1.0, s.gamma), kMaxStickFraction);
  s.p = stick_breaking(s.V);
  const double sz = draw_sd_prior(prior.sigma_z_prior, rng);
  s.sigma_z2 = sz * sz;
  s.mu.resize(N);
  s.sigma_h2.resize(N);
  for (std::size_t h = 0; h < N; ++h) {
    s.mu[h] = rng.normal(prior.m_mu, sz);
    const double sh = draw_sd_prior(prior.sigma_h_prior, rng);
    s.sigma_h2[h] = sh * sh;
  }
  std::vector<double> lp;
  for (double w : s.p) lp.push_back(std::log(w));
  s.K.resize(units);
  s.betas.resize(units);
  for (std::size_t i = 0; i < units; ++i) {
    s.K[i] = rng.categorical_log(lp);
    s.betas[i] = rng.normal(s.mu[s.K[i]], std::sqrt(s.sigma_h2[s.K[i]]));
  }
  return s;
}

inline void regenerate_data(DegradationDataset& data, const GibbsState& s, Rng& rng) {
  for (std::size_t i = 0; i < data.units.size(); ++i) {
    auto& u = data.units[i];
    for (std::size_t j = 0; j < u.size(); ++j) {
      u.measurements[j] = rng.normal(s.alpha + s.betas[i] * u.times[j], std::sqrt(s.sigma_eps2));
    }
  }
}

struct GewekeMoment {
  std::string name;
  double forward_mean = 0.0;
  double gibbs_mean = 0.0;
  double z = 0.0;
};

/// Marginal-conditional (forward) vs successive-conditional simulation of
/// the joint law of parameters and data on the two-unit toy design.
inline std::vector<GewekeMoment> geweke(ModelKind kind, bool half_cauchy, std::uint64_t seed, long m = 200000) {
  const PriorSpec prior = geweke_prior(kind, half_cauchy);
  DegradationDataset data = oracle::toy_data();
  const std::size_t units = data.unit_count();
  Rng rng(seed);

  using Stat = std::function<double(const GibbsState&)>;
  const std::vector<std::pair<std::string, Stat>> stats{
      {"alpha", [](const GibbsState& s) { return s.alpha; }},
      {"alpha^2", [](const GibbsState& s) { return s.alpha * s.alpha; }},
      {"sigma_eps2", [](const GibbsState& s) { return s.sigma_eps2; }},
      {"1/sigma_eps2", [](const GibbsState& s) { return 1.0 / s.sigma_eps2; }},
  };
  std::vector<std::vector<double>> fw(stats.size()), gb(stats.size());
  for (long k = 0; k < m; ++k) {
    const GibbsState s = forward_draw(prior, units, rng);
    for (std::size_t q = 0; q < stats.size(); ++q) fw[q].push_back(stats[q].second(s));
  }
  GibbsState s = forward_draw(prior, units, rng);
  regenerate_data(data, s, rng);
  for (long k = 0; k < m; ++k) {
    gibbs_sweep(s, data, prior, rng, k, 1);
    regenerate_data(data, s, rng);
    for (std::size_t q = 0; q < stats.size(); ++q) gb[q].push_back(stats[q].second(s));
  }
  std::vector<GewekeMoment> out;
  for (std::size_t q = 0; q < stats.size(); ++q) {
    const double mf = oracle::mean(fw[q]);
    const double mg = oracle::mean(gb[q]);
    const double se_f2 = oracle::variance(fw[q]) / static_cast<double>(m);
    const double se_g2 = oracle::variance(gb[q]) / effective_sample_size(gb[q]);
    out.push_back({stats[q].first, mf, mg, (mg - mf) / std::sqrt(se_f2 + se_g2)});
  }
  return out;
}

}  // namespace suites

#endif  // BAYESRUL_TESTS_SUITES_HPP_
