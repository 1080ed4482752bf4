#ifndef BAYESRUL_IO_HPP_
#define BAYESRUL_IO_HPP_

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "bayesrul/core.hpp"
#include "bayesrul/diagnostics.hpp"
#include "bayesrul/error.hpp"
#include "bayesrul/gibbs.hpp"

namespace bayesrul {

inline constexpr const char* kVersion = "0.1.0";

/// Input file missing or unreadable.
class FileError : public Error {
 public:
  explicit FileError(const std::string& path) : Error("cannot open " + path), path_(path) {}
  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (*first == '+') ++first;
  const auto res = std::from_chars(first, last, out);
  return res.ec == std::errc() && res.ptr == last;
}

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileError(path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  return out;
}

}  // namespace detail

/// Writes a double with 17 significant digits, which round-trips.
inline std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(std::numeric_limits<double>::max_digits10) << x;
  return os.str();
}

// --- degradation data ---------------------------------------------------------

/// Parses `unit_id,time,measurement` rows (header required). Units keep the
/// order of their first appearance; observations are sorted by time.
inline DegradationDataset parse_degradation_csv(std::istream& in, double threshold_D) {
  std::string line;
  long lineno = 0;
  bool header_seen = false;
  std::vector<std::string> order;
  std::map<std::string, std::vector<std::pair<double, double>>> rows;
  std::map<std::pair<std::string, double>, long> seen;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = detail::trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto cells = detail::split_csv(t);
    if (!header_seen) {
      if (cells.size() != 3 || cells[0] != "unit_id" || cells[1] != "time" || cells[2] != "measurement") {
        throw ParseError("expected header unit_id,time,measurement", lineno);
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != 3) throw ParseError("expected 3 fields", lineno);
    double time = 0.0, y = 0.0;
    if (cells[0].empty()) throw ParseError("empty unit_id", lineno);
    if (!detail::parse_double(cells[1], time) || !std::isfinite(time)) {
      throw ParseError("bad time '" + cells[1] + "'", lineno);
    }
    if (!detail::parse_double(cells[2], y) || !std::isfinite(y)) {
      throw ParseError("bad measurement '" + cells[2] + "'", lineno);
    }
    if (!seen.emplace(std::make_pair(cells[0], time), lineno).second) {
      throw ParseError("duplicate observation for unit " + cells[0], lineno);
    }
    auto [it, inserted] = rows.try_emplace(cells[0]);
    if (inserted) order.push_back(cells[0]);
    it->second.emplace_back(time, y);
  }
  if (!header_seen) throw ParseError("missing header", lineno);
  DegradationDataset data;
  data.threshold_D = threshold_D;
  for (const auto& id : order) {
    auto obs = rows[id];
    std::sort(obs.begin(), obs.end());
    UnitPath u;
    u.unit_id = id;
    for (const auto& [t, y] : obs) {
      u.times.push_back(t);
      u.measurements.push_back(y);
    }
    data.units.push_back(std::move(u));
  }
  return data;
}

inline DegradationDataset load_degradation_csv(const std::string& path, double threshold_D) {
  auto in = detail::open_input(path);
  return parse_degradation_csv(in, threshold_D);
}

inline void write_degradation_csv(std::ostream& out, const DegradationDataset& data) {
  out << "unit_id,time,measurement\n";
  for (const auto& u : data.units) {
    for (std::size_t j = 0; j < u.size(); ++j) {
      out << u.unit_id << ',' << format_double(u.times[j]) << ',' << format_double(u.measurements[j])
          << '\n';
    }
  }
}

// --- posterior draws ----------------------------------------------------------

using Metadata = std::vector<std::pair<std::string, std::string>>;

inline void write_metadata(std::ostream& out, const Metadata& meta) {
  out << "# version=" << kVersion << '\n';
  for (const auto& [k, v] : meta) out << "# " << k << '=' << v << '\n';
}

struct DrawsFile {
  Metadata metadata;  // without the version line
  std::vector<std::string> unit_ids;
  std::vector<PosteriorDraw> draws;

  std::string meta(const std::string& key, const std::string& fallback = {}) const {
    for (const auto& [k, v] : metadata) {
      if (k == key) return v;
    }
    return fallback;
  }

  std::size_t unit_index(const std::string& id) const {
    const auto it = std::find(unit_ids.begin(), unit_ids.end(), id);
    if (it == unit_ids.end()) throw InvalidInput("unit " + id + " not in draws file");
    return static_cast<std::size_t>(it - unit_ids.begin());
  }
};

inline void write_draws_csv(std::ostream& out, const DrawsFile& file) {
  write_metadata(out, file.metadata);
  out << "iter,alpha";
  for (const auto& id : file.unit_ids) out << ",beta_" << id;
  out << ",sigma_eps2\n";
  for (const auto& d : file.draws) {
    if (d.betas.size() != file.unit_ids.size()) throw InvalidInput("draw width does not match unit ids");
    out << d.iter << ',' << format_double(d.alpha);
    for (double b : d.betas) out << ',' << format_double(b);
    out << ',' << format_double(d.sigma_eps2) << '\n';
  }
}

inline DrawsFile parse_draws_csv(std::istream& in) {
  DrawsFile file;
  std::string line;
  long lineno = 0;
  bool header_seen = false;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      const std::string body = detail::trim(std::string_view(line).substr(1));
      const auto eq = body.find('=');
      if (eq != std::string::npos && body.substr(0, eq) != "version") {
        file.metadata.emplace_back(body.substr(0, eq), body.substr(eq + 1));
      }
      continue;
    }
    const auto cells = detail::split_csv(line);
    if (!header_seen) {
      if (cells.size() < 4 || cells[0] != "iter" || cells[1] != "alpha" || cells.back() != "sigma_eps2") {
        throw ParseError("expected header iter,alpha,beta_<id>...,sigma_eps2", lineno);
      }
      for (std::size_t c = 2; c + 1 < cells.size(); ++c) {
        if (cells[c].rfind("beta_", 0) != 0) throw ParseError("bad column " + cells[c], lineno);
        file.unit_ids.push_back(cells[c].substr(5));
      }
      width = cells.size();
      header_seen = true;
      continue;
    }
    if (cells.size() != width) throw ParseError("wrong number of fields", lineno);
    PosteriorDraw d;
    double iter = 0.0;
    if (!detail::parse_double(cells[0], iter)) throw ParseError("bad iter", lineno);
    d.iter = static_cast<long>(iter);
    if (!detail::parse_double(cells[1], d.alpha)) throw ParseError("bad alpha", lineno);
    d.betas.resize(width - 3);
    for (std::size_t c = 2; c + 1 < width; ++c) {
      if (!detail::parse_double(cells[c], d.betas[c - 2])) throw ParseError("bad beta", lineno);
    }
    if (!detail::parse_double(cells.back(), d.sigma_eps2)) throw ParseError("bad sigma_eps2", lineno);
    file.draws.push_back(std::move(d));
  }
  if (!header_seen) throw ParseError("missing header", lineno);
  return file;
}

inline DrawsFile load_draws_csv(const std::string& path) {
  auto in = detail::open_input(path);
  return parse_draws_csv(in);
}

inline void save_draws_csv(const std::string& path, const DrawsFile& file) {
  auto out = detail::open_output(path);
  write_draws_csv(out, file);
}

/// Named columns of a draws file: alpha, beta_<id>..., sigma_eps2.
inline std::vector<std::pair<std::string, std::vector<double>>> draw_columns(const DrawsFile& file) {
  std::vector<std::pair<std::string, std::vector<double>>> cols;
  cols.emplace_back("alpha", std::vector<double>{});
  for (const auto& id : file.unit_ids) cols.emplace_back("beta_" + id, std::vector<double>{});
  cols.emplace_back("sigma_eps2", std::vector<double>{});
  for (const auto& d : file.draws) {
    cols[0].second.push_back(d.alpha);
    for (std::size_t i = 0; i < d.betas.size(); ++i) cols[i + 1].second.push_back(d.betas[i]);
    cols.back().second.push_back(d.sigma_eps2);
  }
  return cols;
}

// --- summaries and diagnostics output -------------------------------------------

inline nlohmann::json to_json(const PosteriorSummary& s) {
  return {{"name", s.name}, {"mean", s.mean},   {"sd", s.sd},   {"median", s.median},
          {"ci_lo", s.ci_lo}, {"ci_hi", s.ci_hi}, {"ess", s.ess}, {"degenerate", s.degenerate}};
}

inline nlohmann::json metadata_json(const Metadata& meta) {
  nlohmann::json j;
  j["version"] = kVersion;
  for (const auto& [k, v] : meta) j[k] = v;
  return j;
}

inline void save_json(const std::string& path, const nlohmann::json& j) {
  auto out = detail::open_output(path);
  out << j.dump(2) << '\n';
}

/// Trace (one row per retained draw) and autocorrelation (one row per lag)
/// for every column of a draws file.
inline void write_trace_and_acf(const DrawsFile& file, const std::string& trace_path,
                                const std::string& acf_path, std::size_t max_lag = 50) {
  const auto cols = draw_columns(file);
  {
    auto out = detail::open_output(trace_path);
    write_metadata(out, file.metadata);
    out << "iter";
    for (const auto& c : cols) out << ',' << c.first;
    out << '\n';
    for (std::size_t r = 0; r < file.draws.size(); ++r) {
      out << file.draws[r].iter;
      for (const auto& c : cols) out << ',' << format_double(c.second[r]);
      out << '\n';
    }
  }
  auto out = detail::open_output(acf_path);
  write_metadata(out, file.metadata);
  out << "lag";
  for (const auto& c : cols) out << ',' << c.first;
  out << '\n';
  const std::size_t lags = file.draws.empty() ? 0 : std::min(max_lag, file.draws.size() - 1);
  std::vector<Autocorrelation> acfs;
  for (const auto& c : cols) acfs.push_back(autocorrelation(c.second, lags));
  for (std::size_t k = 0; k <= lags && !file.draws.empty(); ++k) {
    out << k;
    for (const auto& a : acfs) out << ',' << format_double(a.rho[k]);
    out << '\n';
  }
}

inline nlohmann::json summarize_draws(const DrawsFile& file) {
  nlohmann::json params = nlohmann::json::array();
  for (const auto& [name, values] : draw_columns(file)) params.push_back(to_json(summarize(values, name)));
  return params;
}

}  // namespace bayesrul

#endif  // BAYESRUL_IO_HPP_
