#ifndef BAYESRUL_CORE_HPP_
#define BAYESRUL_CORE_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bayesrul/error.hpp"

namespace bayesrul {

/// Degradation readings of one unit.
struct UnitPath {
  std::string unit_id;
  std::vector<double> times;
  std::vector<double> measurements;

  std::size_t size() const noexcept { return times.size(); }

  void validate() const {
    if (times.empty()) {
      throw InvalidInput("unit '" + unit_id + "' has no observations");
    }
    if (times.size() != measurements.size()) {
      throw InvalidInput("unit '" + unit_id +
                         "': times and measurements differ in length");
    }
    for (std::size_t j = 0; j < times.size(); ++j) {
      if (!std::isfinite(times[j]) || !std::isfinite(measurements[j]) ||
          times[j] < 0.0) {
        throw InvalidInput("unit '" + unit_id + "': non-finite or negative value");
      }
      if (j > 0 && !(times[j] > times[j - 1])) {
        throw InvalidInput("unit '" + unit_id +
                           "': times must be strictly increasing");
      }
    }
  }
};

/// Training units, an optional new unit (modelled as unit n+1) and the
/// failure threshold.
struct DegradationDataset {
  std::vector<UnitPath> units;
  std::optional<UnitPath> new_unit;
  double threshold_D = 0.0;

  /// Number of units entering the model, including the new one.
  std::size_t unit_count() const noexcept {
    return units.size() + (new_unit ? 1 : 0);
  }

  /// Unit i of the model; index units.size() is the new unit.
  const UnitPath& unit(std::size_t i) const {
    if (i < units.size()) return units[i];
    if (new_unit && i == units.size()) return *new_unit;
    throw InvalidInput("unit index out of range");
  }

  std::size_t total_observations() const noexcept {
    std::size_t total = 0;
    for (std::size_t i = 0; i < unit_count(); ++i) total += unit(i).size();
    return total;
  }

  void validate() const {
    if (units.empty()) throw InvalidInput("dataset needs at least one training unit");
    if (!std::isfinite(threshold_D)) throw InvalidInput("threshold D must be finite");
    for (std::size_t i = 0; i < unit_count(); ++i) unit(i).validate();
  }
};

struct LinearPathParams {
  double alpha = 0.0;
  double beta = 0.0;
  double sigma_eps2 = 1.0;
};

inline double linear_path(double alpha, double beta, double t) noexcept {
  return alpha + beta * t;
}

// --- priors -----------------------------------------------------------------

/// Gamma(shape, rate) on a precision; mean shape / rate.
struct GammaPrior {
  double shape = 1.0;
  double rate = 1.0;
};

/// Heavy-tailed prior on a standard deviation s with unnormalized density
/// (1 + s^2 / A)^{-1}, s > 0. This is a half-Cauchy with scale sqrt(A).
struct HalfCauchyPrior {
  double A = 25.0;

  double scale() const noexcept { return std::sqrt(A); }
  double log_density(double s) const noexcept { return -std::log1p(s * s / A); }
};

using VariancePrior = std::variant<GammaPrior, HalfCauchyPrior>;

enum class ModelKind { SemiParametric, Parametric };

inline const char* to_string(ModelKind kind) noexcept {
  return kind == ModelKind::SemiParametric ? "semi-parametric" : "parametric";
}

/// Hyperparameters of either model. For the parametric model the mixture
/// layer collapses to one component: sigma_h_prior is the prior of the
/// random-effect variance and gamma_prior / truncation_N are unused.
struct PriorSpec {
  ModelKind kind = ModelKind::SemiParametric;
  int scenario_id = 1;
  double mu_alpha = 0.0;
  double sigma_alpha2 = 1000.0;
  double m_mu = 0.0;
  VariancePrior sigma_z_prior = GammaPrior{0.01, 0.01};
  VariancePrior sigma_h_prior = GammaPrior{1.0, 0.01};
  GammaPrior sigma_eps_prior{0.01, 0.01};
  GammaPrior gamma_prior{0.01, 0.01};
  /// 0 means "number of units in the model".
  int truncation_N = 0;

  int resolved_truncation(std::size_t unit_count) const {
    if (kind == ModelKind::Parametric) return 1;
    return truncation_N > 0 ? truncation_N : static_cast<int>(unit_count);
  }

  void validate() const {
    auto check_gamma = [](const GammaPrior& g, const char* what) {
      if (!(g.shape > 0.0) || !(g.rate > 0.0)) {
        throw InvalidInput(std::string(what) + ": gamma shape and rate must be positive");
      }
    };
    auto check_var = [&](const VariancePrior& v, const char* what) {
      if (const auto* g = std::get_if<GammaPrior>(&v)) {
        check_gamma(*g, what);
      } else if (!(std::get<HalfCauchyPrior>(v).A > 0.0)) {
        throw InvalidInput(std::string(what) + ": half-Cauchy scale must be positive");
      }
    };
    if (!(sigma_alpha2 > 0.0)) throw InvalidInput("sigma_alpha2 must be positive");
    if (!std::isfinite(mu_alpha) || !std::isfinite(m_mu)) {
      throw InvalidInput("prior means must be finite");
    }
    check_var(sigma_z_prior, "sigma_z prior");
    check_var(sigma_h_prior, "sigma_h prior");
    check_gamma(sigma_eps_prior, "sigma_eps prior");
    if (kind == ModelKind::SemiParametric) check_gamma(gamma_prior, "gamma prior");
    if (truncation_N < 0) throw InvalidInput("truncation_N must be >= 0");
  }
};

// --- stick breaking and cluster counts ----------------------------------------

/// Mixture weights from stick-breaking fractions; the last fraction must be 1.
inline std::vector<double> stick_breaking(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("stick_breaking needs at least one fraction");
  std::vector<double> p(v.size());
  double remaining = 1.0;
  for (std::size_t h = 0; h < v.size(); ++h) {
    if (!(v[h] >= 0.0 && v[h] <= 1.0)) {
      throw InvalidInput("stick-breaking fraction outside [0, 1]");
    }
    p[h] = v[h] * remaining;
    remaining *= 1.0 - v[h];
  }
  if (v.back() != 1.0) throw InvalidInput("last stick-breaking fraction must be 1");
  return p;
}

/// Expected number of distinct values among m draws from a DP with
/// concentration gamma.
inline double expected_clusters(double gamma, int m) {
  if (!(gamma > 0.0)) throw InvalidInput("concentration must be positive");
  if (m < 1) throw InvalidInput("m must be >= 1");
  double total = 0.0;
  for (int i = 1; i <= m; ++i) total += gamma / (gamma + i - 1);
  return total;
}

// --- empirical hyperparameters ----------------------------------------------

/// Ordinary least squares line y = intercept + slope * t.
inline std::pair<double, double> least_squares_line(std::span<const double> t,
                                                    std::span<const double> y) {
  const std::size_t n = t.size();
  if (n < 2 || y.size() != n) throw DegenerateFit("need at least two points for a slope");
  const double tbar = std::accumulate(t.begin(), t.end(), 0.0) / n;
  const double ybar = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double stt = 0.0, sty = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    stt += (t[j] - tbar) * (t[j] - tbar);
    sty += (t[j] - tbar) * (y[j] - ybar);
  }
  if (!(stt > 0.0)) throw DegenerateFit("time points are not distinct");
  const double slope = sty / stt;
  return {ybar - slope * tbar, slope};
}

struct EmpiricalHyperparams {
  std::vector<double> slopes;  // per-unit least-squares slopes
  double m_mu = 0.0;
  double v_beta = 0.0;
  double a = 0.0;  // sqrt(v_beta)
  double b = 0.0;  // cbrt(v_beta)
  bool degenerate = false;  // zero slope variance; a and b unusable
};

/// Mean and sample variance of per-unit least-squares slopes over every
/// unit in the model, mapped to (m_mu, a = sqrt(v), b = cbrt(v)).
inline EmpiricalHyperparams derive_empirical_hyperparams(const DegradationDataset& data) {
  EmpiricalHyperparams out;
  const std::size_t n = data.unit_count();
  if (n == 0) throw DegenerateFit("dataset has no units");
  for (std::size_t i = 0; i < n; ++i) {
    const UnitPath& u = data.unit(i);
    if (u.size() < 2) {
      throw DegenerateFit("unit '" + u.unit_id + "' has fewer than two time points");
    }
    out.slopes.push_back(least_squares_line(u.times, u.measurements).second);
  }
  out.m_mu = std::accumulate(out.slopes.begin(), out.slopes.end(), 0.0) / n;
  double ss = 0.0;
  for (double s : out.slopes) ss += (s - out.m_mu) * (s - out.m_mu);
  out.v_beta = n > 1 ? ss / (n - 1) : 0.0;
  const double tol = 1e-12 * std::max(1.0, std::abs(out.m_mu));
  if (out.v_beta <= tol * tol) {
    out.v_beta = 0.0;
    out.degenerate = true;
    return out;
  }
  out.a = std::sqrt(out.v_beta);
  out.b = std::cbrt(out.v_beta);
  return out;
}

// --- prior scenarios --------------------------------------------------------

/// Semi-parametric scenarios 1-5. Scenarios 2-5 take m_mu (and 2-3 also
/// a, b) from the data; a degenerate slope spread raises DegenerateFit.
inline PriorSpec semiparametric_prior(int scenario, const DegradationDataset& data) {
  PriorSpec p;
  p.kind = ModelKind::SemiParametric;
  p.scenario_id = scenario;
  p.mu_alpha = 0.0;
  p.sigma_alpha2 = 1000.0;
  p.sigma_eps_prior = {0.01, 0.01};
  p.sigma_z_prior = GammaPrior{0.01, 0.01};
  switch (scenario) {
    case 1:
      p.m_mu = 0.0;
      p.sigma_h_prior = GammaPrior{1.0, 0.01};
      p.gamma_prior = {0.01, 0.01};
      return p;
    case 2:
    case 3: {
      const auto emp = derive_empirical_hyperparams(data);
      if (emp.degenerate) throw DegenerateFit("slope variance is zero; use scenario 1");
      p.m_mu = emp.m_mu;
      p.sigma_h_prior = GammaPrior{emp.a, emp.b};
      p.gamma_prior = scenario == 2 ? GammaPrior{2.0, 2.0} : GammaPrior{0.01, 0.01};
      return p;
    }
    case 4:
    case 5: {
      const auto emp = derive_empirical_hyperparams(data);
      p.m_mu = emp.m_mu;
      p.sigma_h_prior = HalfCauchyPrior{25.0};
      p.sigma_z_prior = HalfCauchyPrior{25.0};
      p.gamma_prior = scenario == 4 ? GammaPrior{2.0, 2.0} : GammaPrior{0.01, 0.01};
      return p;
    }
    default:
      throw InvalidInput("semi-parametric scenario must be 1..5");
  }
}

/// Parametric scenarios 1-3 (unimodal normal random effect).
inline PriorSpec parametric_prior(int scenario, const DegradationDataset& data) {
  PriorSpec p;
  p.kind = ModelKind::Parametric;
  p.scenario_id = scenario;
  p.mu_alpha = 0.0;
  p.sigma_alpha2 = 1000.0;
  p.sigma_eps_prior = {0.01, 0.01};
  p.sigma_z_prior = GammaPrior{0.01, 0.01};
  p.truncation_N = 1;
  switch (scenario) {
    case 1:
      p.m_mu = 0.0;
      p.sigma_h_prior = GammaPrior{0.01, 0.01};
      return p;
    case 2: {
      const auto emp = derive_empirical_hyperparams(data);
      if (emp.degenerate) throw DegenerateFit("slope variance is zero; use scenario 1");
      p.m_mu = emp.m_mu;
      p.sigma_h_prior = GammaPrior{emp.a, emp.b};
      return p;
    }
    case 3: {
      const auto emp = derive_empirical_hyperparams(data);
      p.m_mu = emp.m_mu;
      p.sigma_h_prior = HalfCauchyPrior{25.0};
      p.sigma_z_prior = HalfCauchyPrior{25.0};
      return p;
    }
    default:
      throw InvalidInput("parametric scenario must be 1..3");
  }
}

inline PriorSpec make_prior(ModelKind kind, int scenario, const DegradationDataset& data) {
  return kind == ModelKind::SemiParametric ? semiparametric_prior(scenario, data)
                                           : parametric_prior(scenario, data);
}

}  // namespace bayesrul

#endif  // BAYESRUL_CORE_HPP_
