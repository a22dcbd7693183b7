#include "rkf/io.hpp"

#include "rkf/error.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace rkf {

using nlohmann::json;

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out << contents;
  out.flush();
  if (!out) throw IoError("write to '" + path + "' failed");
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

double parse_cell(const std::string& raw, int line) {
  const std::string s = trim(raw);
  if (s.empty() || s == "NA" || s == "nan" || s == "NaN") return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || !std::isfinite(v))
    throw InvalidInput("line " + std::to_string(line) + ": cannot parse '" + s + "' as a finite number");
  return v;
}

}  // namespace

void write_observations_csv(std::ostream& os, const Observations& y) {
  const Eigen::Index q = y.empty() ? 0 : y.front().size();
  os << "t";
  for (Eigen::Index i = 1; i <= q; ++i) os << ",y_" << i;
  os << '\n';
  for (std::size_t k = 0; k < y.size(); ++k) {
    os << k + 1;
    for (Eigen::Index i = 0; i < y[k].size(); ++i) {
      os << ',';
      if (!std::isnan(y[k](i))) os << format_double(y[k](i));
    }
    os << '\n';
  }
}

Observations read_observations_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw InvalidInput("observation CSV is empty");
  const auto header = split_csv(line);
  if (header.size() < 2 || trim(header[0]) != "t")
    throw InvalidInput("observation CSV header must be t,y_1,...,y_q");
  const std::size_t cols = header.size();
  Observations y;
  int lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != cols)
      throw InvalidInput("line " + std::to_string(lineno) + ": expected " + std::to_string(cols) + " columns, got " +
                         std::to_string(cells.size()));
    const double t = parse_cell(cells[0], lineno);
    if (t != static_cast<double>(y.size() + 1))
      throw InvalidInput("line " + std::to_string(lineno) + ": time index must run 1, 2, ... without gaps");
    Vec v(static_cast<Eigen::Index>(cols - 1));
    for (std::size_t i = 1; i < cols; ++i) v(static_cast<Eigen::Index>(i - 1)) = parse_cell(cells[i], lineno);
    y.push_back(std::move(v));
  }
  if (y.empty()) throw InvalidInput("observation CSV has no rows");
  return y;
}

Observations read_observations_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "'");
  return read_observations_csv(in);
}

void write_trajectory_csv(std::ostream& os, const Trajectory& tr) {
  const Eigen::Index p = tr.x0_real.size();
  const Eigen::Index q = tr.y_real.empty() ? 0 : tr.y_real.front().size();
  os << "t";
  for (Eigen::Index i = 1; i <= p; ++i) os << ",x_" << i;
  for (Eigen::Index i = 1; i <= q; ++i) os << ",y_" << i;
  os << ",io_hit,ao_hit\n";
  os << 0;
  for (Eigen::Index i = 0; i < p; ++i) os << ',' << format_double(tr.x0_real(i));
  for (Eigen::Index i = 0; i < q; ++i) os << ',';
  os << ",0,0\n";
  for (int t = 1; t <= tr.T; ++t) {
    const auto k = static_cast<std::size_t>(t - 1);
    os << t;
    for (Eigen::Index i = 0; i < p; ++i) os << ',' << format_double(tr.x_real[k](i));
    for (Eigen::Index i = 0; i < q; ++i) os << ',' << format_double(tr.y_real[k](i));
    os << ',' << (tr.io_hits[k] ? 1 : 0) << ',' << (tr.ao_hits[k] ? 1 : 0) << '\n';
  }
}

void write_filter_csv(std::ostream& os, const FilterResult& r) {
  const Eigen::Index p = r.states.empty() ? 0 : r.states.front().x_filt.size();
  os << "t";
  for (const char* name : {"x_pred_", "x_filt_", "sigma_filt_"})
    for (Eigen::Index i = 1; i <= p; ++i) os << ',' << name << i;
  os << ",dy_norm,clipped\n";
  for (const FilterState& s : r.states) {
    os << s.t;
    for (Eigen::Index i = 0; i < p; ++i) os << ',' << (s.t == 0 ? "" : format_double(s.x_pred(i)));
    for (Eigen::Index i = 0; i < p; ++i) os << ',' << format_double(s.x_filt(i));
    for (Eigen::Index i = 0; i < p; ++i) os << ',' << format_double(s.sigma_filt(i, i));
    os << ',' << (s.t == 0 || !s.observed ? "" : format_double(s.dy.norm()));
    os << ',' << (s.clipped ? 1 : 0) << '\n';
  }
}

void write_smoother_csv(std::ostream& os, const SmootherResult& r) {
  const Eigen::Index p = r.x_smooth.empty() ? 0 : r.x_smooth.front().size();
  os << "t";
  for (Eigen::Index i = 1; i <= p; ++i) os << ",x_smooth_" << i;
  for (Eigen::Index i = 1; i <= p; ++i) os << ",sigma_smooth_" << i;
  os << '\n';
  for (std::size_t t = 0; t < r.x_smooth.size(); ++t) {
    os << t;
    for (Eigen::Index i = 0; i < p; ++i) os << ',' << format_double(r.x_smooth[t](i));
    for (Eigen::Index i = 0; i < p; ++i) os << ',' << format_double(r.sigma_smooth[t](i, i));
    os << '\n';
  }
}

// ---------------------------------------------------------------------------

void write_report_csv(std::ostream& os, const StudyReport& r) {
  os << "scenario,regime,variant,stage,coordinate,statistic,value\n";
  static const char* qnames[] = {"q05", "q25", "q50", "q75", "q95"};
  for (const CellStats& c : r.cells) {
    const std::string prefix = r.scenario + ',' + std::string(regime_name(c.regime)) + ',' +
                               std::string(variant_name(c.variant)) + ',' + std::string(stage_name(c.stage)) + ',';
    os << prefix << "all,mse," << format_double(c.mse) << '\n';
    os << prefix << "all,mse_se," << format_double(c.mse_se) << '\n';
    os << prefix << "all,mse_dnorm," << format_double(c.mse_dnorm) << '\n';
    os << prefix << "all,n," << c.sq_error.size() << '\n';
    for (std::size_t i = 0; i < c.coord_mse.size(); ++i) {
      os << prefix << i + 1 << ",mse," << format_double(c.coord_mse[i]) << '\n';
      for (std::size_t k = 0; k < kQuantileLevels.size(); ++k)
        os << prefix << i + 1 << ',' << qnames[k] << ',' << format_double(c.coord_quantiles[i][k]) << '\n';
    }
  }
  for (const ClipInfo& ci : r.clipping) {
    const std::string prefix = r.scenario + ",-," + std::string(variant_name(ci.variant)) + ",-,all,";
    os << prefix << "b_score_time," << format_double(ci.b_score_time) << '\n';
    os << prefix << "steady_state_index," << ci.steady_state_index << '\n';
    if (ci.variant == Variant::RlsIO) os << prefix << "io_dnorm_bound," << format_double(r.io_dnorm_bound) << '\n';
  }
}

void write_report_raw_csv(std::ostream& os, const StudyReport& r) {
  os << "scenario,regime,variant,stage,run,sq_error,dnorm_sq";
  for (int i = 1; i <= r.state_dim; ++i) os << ",sq_error_" << i;
  os << '\n';
  const auto p = static_cast<std::size_t>(r.state_dim);
  for (const CellStats& c : r.cells) {
    const std::string prefix = r.scenario + ',' + std::string(regime_name(c.regime)) + ',' +
                               std::string(variant_name(c.variant)) + ',' + std::string(stage_name(c.stage)) + ',';
    for (std::size_t run = 0; run < c.sq_error.size(); ++run) {
      os << prefix << run + 1 << ',' << format_double(c.sq_error[run]) << ',' << format_double(c.dnorm_sq[run]);
      for (std::size_t i = 0; i < p; ++i) {
        const double e = c.coord_error[run * p + i];
        os << ',' << format_double(e * e);
      }
      os << '\n';
    }
  }
}

namespace {

json jnum(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  return x;
}

double from_jnum(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    throw InvalidInput("expected a number, got '" + s + "'");
  }
  return j.get<double>();
}

json jvec(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(jnum(x));
  return a;
}

std::vector<double> from_jvec(const json& j) {
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& x : j) v.push_back(from_jnum(x));
  return v;
}

}  // namespace

json report_to_json(const StudyReport& r) {
  json j;
  j["scenario"] = r.scenario;
  j["runs"] = r.runs;
  j["horizon"] = r.horizon;
  j["score_time"] = r.score_time;
  j["state_dim"] = r.state_dim;
  j["seed"] = r.seed;
  j["io_dnorm_bound"] = jnum(r.io_dnorm_bound);
  j["omitted"] = r.omitted;
  j["clipping"] = json::array();
  for (const ClipInfo& ci : r.clipping)
    j["clipping"].push_back({{"variant", variant_name(ci.variant)},
                             {"b_score_time", jnum(ci.b_score_time)},
                             {"b", jvec(ci.b)},
                             {"steady_state_index", ci.steady_state_index}});
  j["cells"] = json::array();
  for (const CellStats& c : r.cells) {
    json q = json::array();
    for (const auto& row : c.coord_quantiles) q.push_back(jvec({row.begin(), row.end()}));
    j["cells"].push_back({{"regime", regime_name(c.regime)},
                          {"variant", variant_name(c.variant)},
                          {"stage", stage_name(c.stage)},
                          {"mse", jnum(c.mse)},
                          {"mse_se", jnum(c.mse_se)},
                          {"mse_dnorm", jnum(c.mse_dnorm)},
                          {"coord_mse", jvec(c.coord_mse)},
                          {"coord_quantiles", q},
                          {"sq_error", jvec(c.sq_error)},
                          {"dnorm_sq", jvec(c.dnorm_sq)},
                          {"coord_error", jvec(c.coord_error)}});
  }
  return j;
}

StudyReport report_from_json(const json& j) {
  try {
    StudyReport r;
    r.scenario = j.at("scenario").get<std::string>();
    r.runs = j.at("runs").get<int>();
    r.horizon = j.at("horizon").get<int>();
    r.score_time = j.at("score_time").get<int>();
    r.state_dim = j.at("state_dim").get<int>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.io_dnorm_bound = from_jnum(j.at("io_dnorm_bound"));
    r.omitted = j.at("omitted").get<std::vector<std::string>>();
    for (const auto& c : j.at("clipping")) {
      ClipInfo ci;
      ci.variant = parse_variant(c.at("variant").get<std::string>());
      ci.b_score_time = from_jnum(c.at("b_score_time"));
      ci.b = from_jvec(c.at("b"));
      ci.steady_state_index = c.at("steady_state_index").get<int>();
      r.clipping.push_back(std::move(ci));
    }
    for (const auto& c : j.at("cells")) {
      CellStats s;
      s.regime = parse_regime(c.at("regime").get<std::string>());
      s.variant = parse_variant(c.at("variant").get<std::string>());
      s.stage = parse_stage(c.at("stage").get<std::string>());
      s.mse = from_jnum(c.at("mse"));
      s.mse_se = from_jnum(c.at("mse_se"));
      s.mse_dnorm = from_jnum(c.at("mse_dnorm"));
      s.coord_mse = from_jvec(c.at("coord_mse"));
      for (const auto& row : c.at("coord_quantiles")) {
        const auto v = from_jvec(row);
        if (v.size() != kQuantileLevels.size()) throw InvalidInput("quantile row has the wrong length");
        std::array<double, 5> q{};
        std::copy(v.begin(), v.end(), q.begin());
        s.coord_quantiles.push_back(q);
      }
      s.sq_error = from_jvec(c.at("sq_error"));
      s.dnorm_sq = from_jvec(c.at("dnorm_sq"));
      s.coord_error = from_jvec(c.at("coord_error"));
      r.cells.push_back(std::move(s));
    }
    return r;
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed report JSON: ") + e.what());
  }
}

void export_report(const StudyReport& r, ReportFormat format, const std::string& path) {
  if (format == ReportFormat::JSON) {
    write_file(path, report_to_json(r).dump(1) + "\n");
    return;
  }
  std::ostringstream main, raw;
  write_report_csv(main, r);
  write_report_raw_csv(raw, r);
  write_file(path, main.str());
  write_file(path + ".raw.csv", raw.str());
}

json calibration_to_json(const CalibrationTable& t) {
  json j;
  j["criterion"] = criterion_name(t.criterion);
  if (const auto* rc = std::get_if<RadiusCriterion>(&t.criterion))
    j["r"] = rc->r;
  else
    j["delta"] = std::get<EfficiencyCriterion>(t.criterion).delta;
  j["variant"] = variant_name(t.variant);
  j["norm"] = norm_name(t.norm);
  j["mc_size"] = t.mc_size;
  j["seed"] = t.seed;
  j["steady_state_index"] = t.steady_state_index;
  j["degenerate"] = t.degenerate;
  j["warnings"] = t.warnings;
  j["b"] = jvec(t.b);
  return j;
}

}  // namespace rkf
