#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "bayesrul/core.hpp"
#include "bayesrul/diagnostics.hpp"
#include "bayesrul/gibbs.hpp"
#include "bayesrul/io.hpp"
#include "bayesrul/rul.hpp"
#include "bayesrul/sim.hpp"
#include "bayesrul/tmcmc.hpp"

namespace fs = std::filesystem;
using namespace bayesrul;

namespace {

struct FitArgs {
  std::string data;
  std::string model = "sp";
  std::string prior = "2";
  double threshold = 0.0;
  long iters = 50000;
  long burnin = 5000;
  long thin = 50;
  std::uint64_t seed = 1;
  std::string new_unit;
  std::string out = ".";
};

struct PredictArgs {
  std::string draws;
  std::vector<std::string> units;
  std::string tk = "auto";
  double threshold = 0.0;
  std::string method = "m1";
  std::uint64_t seed = 1;
  std::string data;
  std::vector<double> true_rul;
  std::vector<double> true_params;
  std::string out = ".";
};

struct SimulateArgs {
  int case_id = 1;
  int n = 10;
  int m = 31;
  std::string prior = "2";
  std::string p_prior;
  std::uint64_t seed = 1;
  long iters = 50000;
  long burnin = 5000;
  long thin = 50;
  bool fast = false;
  unsigned threads = 1;
  std::string out = ".";
};

struct DiagnoseArgs {
  std::string draws;
  std::string out = ".";
  std::size_t max_lag = 50;
};

/// Accepts "2", "sp2", "p2", "s2".
int parse_scenario(const std::string& id) {
  std::size_t pos = 0;
  while (pos < id.size() && !std::isdigit(static_cast<unsigned char>(id[pos]))) ++pos;
  if (pos == id.size()) throw InvalidInput("bad prior id '" + id + "'");
  return std::stoi(id.substr(pos));
}

void require_file(const std::string& path) {
  if (!fs::is_regular_file(path)) throw FileError(path);
}

fs::path prepare_out(const std::string& dir) {
  fs::create_directories(dir);
  return fs::path(dir);
}

PriorSpec prior_or_fallback(ModelKind kind, int scenario, const DegradationDataset& data, int& used) {
  try {
    used = scenario;
    return make_prior(kind, scenario, data);
  } catch (const DegenerateFit& e) {
    std::cerr << "warning: " << e.what() << "; using prior scenario 1\n";
    used = 1;
    return make_prior(kind, 1, data);
  }
}

int cmd_fit(const FitArgs& a) {
  require_file(a.data);
  DegradationDataset data = load_degradation_csv(a.data, a.threshold);
  if (!a.new_unit.empty()) {
    auto it = std::find_if(data.units.begin(), data.units.end(),
                           [&](const UnitPath& u) { return u.unit_id == a.new_unit; });
    if (it == data.units.end()) throw InvalidInput("unit " + a.new_unit + " not in data");
    data.new_unit = *it;
    data.units.erase(it);
  }
  data.validate();
  const ModelKind kind = a.model == "p" ? ModelKind::Parametric : ModelKind::SemiParametric;
  int used = 0;
  const PriorSpec prior = prior_or_fallback(kind, parse_scenario(a.prior), data, used);
  ChainConfig cc;
  cc.total_iters = a.iters;
  cc.burn_in = a.burnin;
  cc.thin = a.thin;
  cc.seed = a.seed;
  const auto draws = sample_posterior(data, prior, cc);

  DrawsFile file;
  file.metadata = {{"command", "fit"},
                   {"model", a.model},
                   {"scenario", std::to_string(used)},
                   {"seed", std::to_string(a.seed)},
                   {"iters", std::to_string(a.iters)},
                   {"burnin", std::to_string(a.burnin)},
                   {"thin", std::to_string(a.thin)},
                   {"threshold", format_double(a.threshold)},
                   {"data", fs::path(a.data).filename().string()}};
  for (std::size_t i = 0; i < data.unit_count(); ++i) file.unit_ids.push_back(data.unit(i).unit_id);
  file.draws = draws;

  const fs::path out = prepare_out(a.out);
  save_draws_csv((out / "draws.csv").string(), file);
  nlohmann::json summary;
  summary["metadata"] = metadata_json(file.metadata);
  summary["parameters"] = summarize_draws(file);
  save_json((out / "summary.json").string(), summary);
  write_trace_and_acf(file, (out / "trace.csv").string(), (out / "acf.csv").string());
  std::cout << "fit: " << draws.size() << " draws written to " << out.string() << '\n';
  return 0;
}

int cmd_predict(const PredictArgs& a) {
  require_file(a.draws);
  const DrawsFile file = load_draws_csv(a.draws);
  std::optional<DegradationDataset> data;
  if (!a.data.empty()) {
    require_file(a.data);
    data = load_degradation_csv(a.data, a.threshold);
  }
  if (a.tk == "auto" && !data) throw InvalidInput("--tk auto needs --data");
  if (!a.true_params.empty() && a.true_params.size() != 3) {
    throw InvalidInput("--true-params takes alpha beta sigma_eps2");
  }
  const std::vector<std::string> units = a.units.empty() ? file.unit_ids : a.units;
  if (!a.true_rul.empty() && a.true_rul.size() != units.size()) {
    throw InvalidInput("--true-rul needs one value per unit");
  }
  const bool constrained = a.method != "m2";

  const fs::path out = prepare_out(a.out);
  auto csv = detail::open_output((out / "predictions.csv").string());
  write_metadata(csv, {{"command", "predict"},
                       {"method", constrained ? "m1" : "m2"},
                       {"seed", std::to_string(a.seed)},
                       {"threshold", format_double(a.threshold)},
                       {"tk", a.tk},
                       {"draws", fs::path(a.draws).filename().string()},
                       {"scenario", file.meta("scenario")}});
  csv << "unit_id,status,t_k,median,hpd_lo,hpd_hi,retained_fraction,acceptance_rate,ks,true_rul,error\n";

  for (std::size_t u = 0; u < units.size(); ++u) {
    const std::string& id = units[u];
    auto row = [&](const std::string& status, std::optional<double> tk) {
      csv << id << ',' << status << ',' << (tk ? format_double(*tk) : "") << ",,,,,,,,\n";
    };
    std::optional<double> t_k;
    const UnitPath* path = nullptr;
    if (data) {
      for (const auto& p : data->units) {
        if (p.unit_id == id) path = &p;
      }
      if (!path && a.tk == "auto") {
        std::cerr << "warning: unit " << id << " not in data, skipped\n";
        row("missing", std::nullopt);
        continue;
      }
    }
    if (a.tk == "auto") {
      t_k = last_subthreshold_time(*path, a.threshold);
    } else {
      t_k = std::stod(a.tk);
      if (path) {
        for (std::size_t j = 0; j < path->size(); ++j) {
          if (path->times[j] <= *t_k && path->measurements[j] >= a.threshold) t_k.reset();
        }
      }
    }
    if (!t_k) {
      std::cerr << "warning: unit " << id << " already at or above the threshold, skipped\n";
      row("skipped", std::nullopt);
      continue;
    }
    try {
      const std::size_t index = file.unit_index(id);
      const auto kept = filter_positive_beta(file.draws, index);
      const auto dist = make_rul_distribution(kept.draws, index, *t_k, a.threshold, constrained);
      TmcmcConfig tc;
      tc.move_kind = constrained ? MoveKind::Multiplicative : MoveKind::Additive;
      tc.seed = derive_seed(a.seed, u);
      const auto chain = tmcmc_run(dist, tc);
      const double median = predict_residual_life(chain.samples);
      const Interval hpd = hpd_interval(chain.samples, 0.95);
      std::string ks, truth, err;
      if (!a.true_params.empty()) {
        ks = format_double(true_vs_approx_ks({a.true_params[0], a.true_params[1], a.true_params[2]}, dist));
      }
      if (!a.true_rul.empty()) {
        truth = format_double(a.true_rul[u]);
        err = format_double(median - a.true_rul[u]);
      }
      csv << id << ",ok," << format_double(*t_k) << ',' << format_double(median) << ','
          << format_double(hpd.lo) << ',' << format_double(hpd.hi) << ','
          << format_double(kept.retained_fraction) << ','
          << format_double(chain.stats.acceptance_rate()) << ',' << ks << ',' << truth << ',' << err
          << '\n';
    } catch (const Error& e) {
      std::cerr << "warning: unit " << id << ": " << e.what() << '\n';
      row("failed", t_k);
    }
  }
  std::cout << "predict: " << units.size() << " units written to " << (out / "predictions.csv").string()
            << '\n';
  return 0;
}

std::string cell(double x) { return format_double(x); }

int cmd_simulate(const SimulateArgs& a) {
  const CaseSpec spec = make_case(a.case_id, a.n, a.m, a.seed);
  RunCaseOptions opts;
  opts.sp_scenario = parse_scenario(a.prior);
  opts.p_scenario = parse_scenario(a.p_prior.empty() ? a.prior : a.p_prior);
  opts.chain.total_iters = a.iters;
  opts.chain.burn_in = a.burnin;
  opts.chain.thin = a.thin;
  opts.refit_per_unit = !a.fast;
  opts.threads = a.threads;
  const CaseResult res = run_case(spec, opts);

  const Metadata meta{{"command", "simulate"},
                      {"case", std::to_string(a.case_id)},
                      {"n", std::to_string(a.n)},
                      {"m", std::to_string(a.m)},
                      {"seed", std::to_string(a.seed)},
                      {"sp_scenario", std::to_string(res.sp_scenario)},
                      {"p_scenario", std::to_string(res.p_scenario)},
                      {"iters", std::to_string(a.iters)},
                      {"burnin", std::to_string(a.burnin)},
                      {"thin", std::to_string(a.thin)},
                      {"refit_per_unit", a.fast ? "false" : "true"},
                      {"threshold", format_double(spec.threshold_D)}};
  const fs::path out = prepare_out(a.out);
  {
    auto csv = detail::open_output((out / "units.csv").string());
    write_metadata(csv, meta);
    csv << "unit_id,true_beta,t_k,true_rul";
    for (ModelKind k : kModels) {
      const std::string mk = k == ModelKind::SemiParametric ? "sp" : "p";
      csv << ',' << mk << "_retained," << mk << "_ks";
      for (Method m : kMethods) {
        const std::string p = mk + "_" + to_string(m);
        csv << ',' << p << "_median," << p << "_hpd_lo," << p << "_hpd_hi";
      }
    }
    csv << '\n';
    for (const auto& u : res.units) {
      csv << u.unit_id << ',' << cell(u.true_beta);
      if (u.skipped()) {
        csv << ",,";
        for (int c = 0; c < 16; ++c) csv << ',';
        csv << '\n';
        continue;
      }
      csv << ',' << cell(*u.t_k) << ',' << cell(u.true_rul);
      for (std::size_t k = 0; k < 2; ++k) {
        const auto& fit = u.by_model[k];
        csv << ',' << cell(fit.retained_fraction) << ',' << cell(fit.ks);
        for (std::size_t m = 0; m < 2; ++m) {
          const auto& pr = fit.by_method[m];
          csv << ',' << cell(pr.median) << ',' << cell(pr.interval.lo) << ',' << cell(pr.interval.hi);
        }
      }
      csv << '\n';
    }
  }
  {
    nlohmann::json agg;
    agg["metadata"] = metadata_json(meta);
    agg["threshold_D"] = spec.threshold_D;
    nlohmann::json metrics = nlohmann::json::array();
    for (ModelKind k : kModels) {
      for (Method m : kMethods) {
        const Metrics& met = res.metric(k, m);
        metrics.push_back({{"model", k == ModelKind::SemiParametric ? "sp" : "p"},
                           {"method", to_string(m)},
                           {"rmse", met.rmse},
                           {"mae", met.mae},
                           {"units", met.units},
                           {"covered", met.covered}});
      }
    }
    agg["metrics"] = metrics;
    save_json((out / "aggregate.json").string(), agg);
  }
  {
    auto csv = detail::open_output((out / "paths.csv").string());
    write_metadata(csv, meta);
    write_degradation_csv(csv, res.data.dataset);
  }
  std::cout << "simulate: case " << a.case_id << ", " << res.units.size() << " units written to "
            << out.string() << '\n';
  return 0;
}

int cmd_diagnose(const DiagnoseArgs& a) {
  require_file(a.draws);
  const DrawsFile file = load_draws_csv(a.draws);
  const fs::path out = prepare_out(a.out);
  write_trace_and_acf(file, (out / "trace.csv").string(), (out / "acf.csv").string(), a.max_lag);
  nlohmann::json summary;
  summary["metadata"] = metadata_json(file.metadata);
  summary["parameters"] = summarize_draws(file);
  save_json((out / "summary.json").string(), summary);
  std::cout << "diagnose: " << file.draws.size() << " draws summarized in " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian degradation modeling and residual-life prediction"};
  app.require_subcommand(1);

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "fit a degradation model and write posterior draws");
  f->add_option("--data", fit.data, "CSV with unit_id,time,measurement")->required();
  f->add_option("--model", fit.model, "sp or p")->check(CLI::IsMember({"sp", "p"}));
  f->add_option("--prior", fit.prior, "prior scenario id");
  f->add_option("--threshold", fit.threshold, "failure threshold D")->required();
  f->add_option("--iters", fit.iters);
  f->add_option("--burnin", fit.burnin);
  f->add_option("--thin", fit.thin);
  f->add_option("--seed", fit.seed);
  f->add_option("--new-unit", fit.new_unit, "unit to place in the new-unit slot");
  f->add_option("--out", fit.out, "output directory");

  PredictArgs pred;
  auto* p = app.add_subcommand("predict", "predict residual life from posterior draws");
  p->add_option("--draws", pred.draws)->required();
  p->add_option("--unit", pred.units, "unit id (repeatable; default all)");
  p->add_option("--tk", pred.tk, "prediction time or 'auto'");
  p->add_option("--threshold", pred.threshold)->required();
  p->add_option("--method", pred.method)->check(CLI::IsMember({"m1", "m2"}));
  p->add_option("--seed", pred.seed);
  p->add_option("--data", pred.data, "degradation CSV (needed for --tk auto)");
  p->add_option("--true-rul", pred.true_rul, "true residual life per unit");
  p->add_option("--true-params", pred.true_params, "alpha beta sigma_eps2 for the KS distance")
      ->expected(3);
  p->add_option("--out", pred.out);

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "run a simulation case end to end");
  s->add_option("--case", sim.case_id)->check(CLI::Range(1, 5));
  s->add_option("--n", sim.n);
  s->add_option("--m", sim.m);
  s->add_option("--prior", sim.prior, "prior scenario id for both models");
  s->add_option("--p-prior", sim.p_prior, "prior scenario id for the parametric model");
  s->add_option("--seed", sim.seed);
  s->add_option("--iters", sim.iters);
  s->add_option("--burnin", sim.burnin);
  s->add_option("--thin", sim.thin);
  s->add_flag("--fast", sim.fast, "fit once on all units instead of once per unit");
  s->add_option("--threads", sim.threads);
  s->add_option("--out", sim.out);

  DiagnoseArgs diag;
  auto* d = app.add_subcommand("diagnose", "trace, autocorrelation and summaries of a draws file");
  d->add_option("--draws", diag.draws)->required();
  d->add_option("--max-lag", diag.max_lag);
  d->add_option("--out", diag.out);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*f) return cmd_fit(fit);
    if (*p) return cmd_predict(pred);
    if (*s) return cmd_simulate(sim);
    if (*d) return cmd_diagnose(diag);
  } catch (const FileError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}
