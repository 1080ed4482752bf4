#ifndef BAYESRUL_SIM_HPP_
#define BAYESRUL_SIM_HPP_

#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include "bayesrul/core.hpp"
#include "bayesrul/error.hpp"
#include "bayesrul/gibbs.hpp"
#include "bayesrul/random.hpp"
#include "bayesrul/rul.hpp"
#include "bayesrul/tmcmc.hpp"

namespace bayesrul {

// --- random-effect mixtures -------------------------------------------------

struct NormalFamily {
  double mean = 0.0;
  double var = 1.0;
};

struct GammaFamily {
  double shape = 1.0;
  double rate = 1.0;
};

struct WeibullFamily {
  double shape = 1.0;
  double scale = 1.0;
};

using Family = std::variant<NormalFamily, GammaFamily, WeibullFamily>;

struct MixtureComponent {
  double weight = 1.0;
  Family family;
};

struct MixtureSpec {
  std::vector<MixtureComponent> components;

  void validate() const {
    if (components.empty()) throw InvalidInput("mixture has no components");
    double total = 0.0;
    for (const auto& c : components) {
      if (!(c.weight >= 0.0 && c.weight <= 1.0)) throw InvalidInput("mixture weight outside [0, 1]");
      total += c.weight;
      std::visit(
          [](const auto& f) {
            using F = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<F, NormalFamily>) {
              if (!(f.var >= 0.0)) throw InvalidInput("normal variance must be >= 0");
            } else if constexpr (std::is_same_v<F, GammaFamily>) {
              if (!(f.shape > 0.0 && f.rate > 0.0)) throw InvalidInput("bad gamma component");
            } else {
              if (!(f.shape > 0.0 && f.scale > 0.0)) throw InvalidInput("bad Weibull component");
            }
          },
          c.family);
    }
    if (std::abs(total - 1.0) > 1e-12) throw InvalidInput("mixture weights must sum to 1");
  }
};

inline double sample_family(const Family& family, Rng& rng) {
  return std::visit(
      [&](const auto& f) -> double {
        using F = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<F, NormalFamily>) {
          return f.var > 0.0 ? rng.normal(f.mean, std::sqrt(f.var)) : f.mean;
        } else if constexpr (std::is_same_v<F, GammaFamily>) {
          return rng.gamma(f.shape, f.rate);
        } else {
          return rng.weibull(f.shape, f.scale);
        }
      },
      family);
}

/// Picks a component by weight, then draws from it.
inline double sample_mixture(const MixtureSpec& spec, Rng& rng) {
  std::vector<double> lw;
  lw.reserve(spec.components.size());
  for (const auto& c : spec.components) lw.push_back(std::log(c.weight));
  return sample_family(spec.components[rng.categorical_log(lw)].family, rng);
}

// --- simulation cases -------------------------------------------------------

struct CaseSpec {
  int case_id = 1;
  double alpha_true = 2.0;
  double sigma_eps2_true = 0.7;
  double threshold_D = 11.0;
  int n_units = 10;
  int m = 31;  // observations on [0, 1] when nothing crosses
  std::uint64_t seed = 1;
  MixtureSpec mixture;

  void validate() const {
    if (n_units < 1) throw InvalidInput("need at least one unit");
    if (m < 2) throw InvalidInput("grid needs at least two points");
    if (!(sigma_eps2_true >= 0.0)) throw InvalidInput("noise variance must be >= 0");
    mixture.validate();
  }
};

/// The five benchmark scenarios: random-effect mixture, noise variance and
/// threshold per case, alpha = 2, observations on an equally spaced grid.
inline CaseSpec make_case(int case_id, int n_units, int m, std::uint64_t seed) {
  CaseSpec c;
  c.case_id = case_id;
  c.n_units = n_units;
  c.m = m;
  c.seed = seed;
  c.alpha_true = 2.0;
  auto& comps = c.mixture.components;
  switch (case_id) {
    case 1:
      comps = {{0.4, GammaFamily{40, 20}}, {0.25, GammaFamily{70, 20}}, {0.35, GammaFamily{100, 20}}};
      c.sigma_eps2_true = 0.7;
      c.threshold_D = 11.0;
      break;
    case 2:
      comps = {{0.4, WeibullFamily{20, 2}}, {0.25, WeibullFamily{40, 4}}, {0.35, WeibullFamily{80, 8}}};
      c.sigma_eps2_true = 0.7;
      c.threshold_D = 12.0;
      break;
    case 3:
      comps = {{0.6, NormalFamily{3, 0.1}}, {0.4, NormalFamily{6, 0.2}}};
      c.sigma_eps2_true = 0.5;
      c.threshold_D = 9.0;
      break;
    case 4:
      comps = {{0.4, NormalFamily{2, 0.1}}, {0.3, NormalFamily{4, 0.15}}, {0.3, NormalFamily{6, 0.12}}};
      c.sigma_eps2_true = 0.6;
      c.threshold_D = 9.0;
      break;
    case 5:
      comps = {{0.3, NormalFamily{2, 0.1}},  {0.2, NormalFamily{4, 0.15}}, {0.2, NormalFamily{6, 0.12}},
               {0.15, NormalFamily{8, 0.15}}, {0.15, NormalFamily{10, 0.1}}};
      c.sigma_eps2_true = 0.7;
      c.threshold_D = 13.0;
      break;
    default:
      throw InvalidInput("case must be 1..5");
  }
  return c;
}

/// Path y = alpha + beta t + eps on t = j / (m - 1), stopped after the first
/// reading at or above D (that reading is kept).
inline UnitPath simulate_unit_path(std::string unit_id, double alpha, double beta, double noise_sd,
                                   double D, int m, Rng& rng) {
  UnitPath u;
  u.unit_id = std::move(unit_id);
  for (int j = 0; j < m; ++j) {
    const double t = static_cast<double>(j) / static_cast<double>(m - 1);
    const double y = linear_path(alpha, beta, t) + (noise_sd > 0.0 ? rng.normal(0.0, noise_sd) : 0.0);
    u.times.push_back(t);
    u.measurements.push_back(y);
    if (y >= D) break;
  }
  return u;
}

struct SimulatedData {
  DegradationDataset dataset;
  std::vector<double> true_betas;
};

inline SimulatedData generate_paths(const CaseSpec& c) {
  c.validate();
  Rng rng(derive_seed(c.seed, 0x5041544853ULL));
  SimulatedData out;
  out.dataset.threshold_D = c.threshold_D;
  const double sd = std::sqrt(c.sigma_eps2_true);
  for (int i = 0; i < c.n_units; ++i) {
    const double beta = sample_mixture(c.mixture, rng);
    out.true_betas.push_back(beta);
    out.dataset.units.push_back(
        simulate_unit_path(std::to_string(i + 1), c.alpha_true, beta, sd, c.threshold_D, c.m, rng));
  }
  return out;
}

/// Time of the last reading before the first one at or above D; nullopt if
/// the very first reading is already at or above D.
inline std::optional<double> last_subthreshold_time(const UnitPath& u, double D) {
  std::optional<double> t_k;
  for (std::size_t j = 0; j < u.size(); ++j) {
    if (u.measurements[j] >= D) break;
    t_k = u.times[j];
  }
  return t_k;
}

inline constexpr double kOracleStep = 0.001;

/// First-passage residual life after t_k, simulated on a 0.001 grid with
/// fresh measurement noise at every grid point.
inline double true_rul_oracle(double alpha, double beta, double sigma_eps2, double D, double t_k,
                              Rng& rng, long max_steps = 1000000) {
  const double sd = std::sqrt(sigma_eps2);
  for (long s = 1; s <= max_steps; ++s) {
    const double dt = static_cast<double>(s) / 1000.0;
    const double y = linear_path(alpha, beta, t_k + dt) + (sd > 0.0 ? rng.normal(0.0, sd) : 0.0);
    if (y >= D) return dt;
  }
  throw NoCrossing("path did not reach the threshold within the step cap");
}

// --- error metrics ------------------------------------------------------------

inline void check_same_length(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw InvalidInput("prediction and truth differ in length");
  if (a.empty()) throw InvalidInput("no predictions to score");
}

inline double rmse(std::span<const double> pred, std::span<const double> actual) {
  check_same_length(pred, actual);
  double ss = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) ss += (pred[i] - actual[i]) * (pred[i] - actual[i]);
  return std::sqrt(ss / static_cast<double>(pred.size()));
}

inline double mae(std::span<const double> pred, std::span<const double> actual) {
  check_same_length(pred, actual);
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - actual[i]);
  return s / static_cast<double>(pred.size());
}

// --- end-to-end case run ------------------------------------------------------

/// M1 predicts from the distribution conditioned on T > 0, M2 from the
/// unconstrained one.
enum class Method { M1, M2 };

inline const char* to_string(Method m) noexcept { return m == Method::M1 ? "M1" : "M2"; }

inline constexpr std::array<ModelKind, 2> kModels{ModelKind::SemiParametric, ModelKind::Parametric};
inline constexpr std::array<Method, 2> kMethods{Method::M1, Method::M2};

struct Prediction {
  double median = 0.0;
  Interval interval;
  double acceptance_rate = 0.0;
};

struct ModelFit {
  double retained_fraction = 0.0;
  double ks = 0.0;  // exact vs approximated constrained distribution
  std::array<Prediction, 2> by_method;  // indexed by Method
};

struct UnitResult {
  std::string unit_id;
  double true_beta = 0.0;
  std::optional<double> t_k;  // nullopt: unit skipped
  double true_rul = 0.0;
  std::array<ModelFit, 2> by_model;  // indexed like kModels

  bool skipped() const noexcept { return !t_k.has_value(); }
  const Prediction& prediction(ModelKind k, Method m) const {
    return by_model[k == ModelKind::SemiParametric ? 0 : 1].by_method[m == Method::M1 ? 0 : 1];
  }
};

struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;
  long units = 0;
  long covered = 0;  // predictive intervals containing the truth
};

struct CaseResult {
  CaseSpec spec;
  SimulatedData data;
  int sp_scenario = 2;
  int p_scenario = 2;
  std::vector<UnitResult> units;
  std::array<std::array<Metrics, 2>, 2> metrics;  // [model][method]

  const Metrics& metric(ModelKind k, Method m) const {
    return metrics[k == ModelKind::SemiParametric ? 0 : 1][m == Method::M1 ? 0 : 1];
  }
};

struct RunCaseOptions {
  int sp_scenario = 2;
  int p_scenario = 2;
  ChainConfig chain;
  TmcmcConfig tmcmc;  // move_kind and seed are set per run
  /// Refit both models once per predicted unit, with that unit in the
  /// new-unit slot. false fits once on all units (faster, deviates).
  bool refit_per_unit = true;
  unsigned threads = 1;
};

class CaseUnitError : public Error {
 public:
  CaseUnitError(const std::string& unit_id, const std::string& what)
      : Error("unit " + unit_id + ": " + what) {}
};

namespace detail {

inline PriorSpec prior_with_fallback(ModelKind kind, int scenario, const DegradationDataset& data,
                                     int& used) {
  try {
    used = scenario;
    return make_prior(kind, scenario, data);
  } catch (const DegenerateFit&) {
    used = 1;
    return make_prior(kind, 1, data);
  }
}

inline std::uint64_t fit_tag(std::size_t model, std::size_t unit) {
  return 0x46495400ULL + model * 0x100000ULL + unit;
}

template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
  std::vector<std::exception_ptr> errors(count);
  auto guarded = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) guarded(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < std::min<std::size_t>(threads, count); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < count; i = next++) guarded(i);
      });
    }
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace detail

/// Generates a case, predicts every unit's residual life at its last
/// sub-threshold reading with both models and both methods, and scores the
/// medians against simulated first-passage times.
inline CaseResult run_case(const CaseSpec& spec, const RunCaseOptions& opts) {
  CaseResult result;
  result.spec = spec;
  result.data = generate_paths(spec);
  const auto& full = result.data.dataset;
  const std::size_t n = full.units.size();

  std::array<PriorSpec, 2> priors{
      detail::prior_with_fallback(ModelKind::SemiParametric, opts.sp_scenario, full, result.sp_scenario),
      detail::prior_with_fallback(ModelKind::Parametric, opts.p_scenario, full, result.p_scenario)};

  std::array<std::vector<PosteriorDraw>, 2> shared_draws;
  if (!opts.refit_per_unit) {
    for (std::size_t k = 0; k < 2; ++k) {
      ChainConfig cc = opts.chain;
      cc.seed = derive_seed(spec.seed, detail::fit_tag(k, n));
      shared_draws[k] = sample_posterior(full, priors[k], cc);
    }
  }

  result.units.resize(n);
  detail::parallel_for(n, opts.threads, [&](std::size_t u) {
    UnitResult& ur = result.units[u];
    const UnitPath& path = full.units[u];
    ur.unit_id = path.unit_id;
    ur.true_beta = result.data.true_betas[u];
    ur.t_k = last_subthreshold_time(path, spec.threshold_D);
    if (!ur.t_k) return;
    const double t_k = *ur.t_k;
    try {
      Rng oracle_rng(derive_seed(spec.seed, 0x4f5241434c45ULL + u));
      ur.true_rul = true_rul_oracle(spec.alpha_true, ur.true_beta, spec.sigma_eps2_true,
                                    spec.threshold_D, t_k, oracle_rng);

      DegradationDataset held;
      std::size_t index = u;
      if (opts.refit_per_unit) {
        held.threshold_D = full.threshold_D;
        for (std::size_t i = 0; i < n; ++i) {
          if (i != u) held.units.push_back(full.units[i]);
        }
        held.new_unit = path;
        index = held.units.size();
      }
      const LinearPathParams truth{spec.alpha_true, ur.true_beta, spec.sigma_eps2_true};

      for (std::size_t k = 0; k < 2; ++k) {
        std::vector<PosteriorDraw> own;
        if (opts.refit_per_unit) {
          ChainConfig cc = opts.chain;
          cc.seed = derive_seed(spec.seed, detail::fit_tag(k, u));
          own = sample_posterior(held, priors[k], cc);
        }
        const auto& draws = opts.refit_per_unit ? own : shared_draws[k];
        const auto kept = filter_positive_beta(draws, index);
        ModelFit& fit = ur.by_model[k];
        fit.retained_fraction = kept.retained_fraction;
        for (std::size_t m = 0; m < 2; ++m) {
          const bool constrained = kMethods[m] == Method::M1;
          const auto dist = make_rul_distribution(kept.draws, index, t_k, spec.threshold_D, constrained);
          if (constrained) fit.ks = true_vs_approx_ks(truth, dist);
          TmcmcConfig tc = opts.tmcmc;
          tc.move_kind = constrained ? MoveKind::Multiplicative : MoveKind::Additive;
          tc.seed = derive_seed(spec.seed, 0x544d434dULL + 4 * u + 2 * k + m);
          const auto chain = tmcmc_run(dist, tc);
          Prediction& pr = fit.by_method[m];
          pr.median = predict_residual_life(chain.samples);
          pr.interval = hpd_interval(chain.samples, 0.95);
          pr.acceptance_rate = chain.stats.acceptance_rate();
        }
      }
    } catch (const Error& e) {
      throw CaseUnitError(path.unit_id, e.what());
    }
  });

  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t m = 0; m < 2; ++m) {
      std::vector<double> pred, actual;
      Metrics& met = result.metrics[k][m];
      for (const auto& ur : result.units) {
        if (ur.skipped()) continue;
        const auto& pr = ur.by_model[k].by_method[m];
        pred.push_back(pr.median);
        actual.push_back(ur.true_rul);
        if (pr.interval.contains(ur.true_rul)) ++met.covered;
      }
      met.units = static_cast<long>(pred.size());
      if (!pred.empty()) {
        met.rmse = rmse(pred, actual);
        met.mae = mae(pred, actual);
      }
    }
  }
  return result;
}

}  // namespace bayesrul

#endif  // BAYESRUL_SIM_HPP_
