#include "rkf/config.hpp"

#include "rkf/error.hpp"
#include "rkf/io.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>

namespace rkf {

using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
      throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

double number(const json& j, const std::string& where) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return kInf;
    throw ConfigError(where + ": expected a number, got '" + s + "'");
  }
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

/// Matrix entry of a model: a constant matrix or {"sequence": [M_1, ..., M_T]};
/// steps past the end of a sequence reuse its last matrix.
MatrixFn matrix_fn(const json& j, const std::string& where) {
  if (j.is_object()) {
    check_keys(j, {"sequence"}, where);
    const json& seq = j.at("sequence");
    if (!seq.is_array() || seq.empty()) throw ConfigError(where + ".sequence: expected a non-empty array");
    std::vector<Mat> mats;
    for (const auto& m : seq) mats.push_back(matrix_from_json(m));
    return [mats = std::move(mats)](int t) {
      const auto k = static_cast<std::size_t>(std::max(t, 1) - 1);
      return k < mats.size() ? mats[k] : mats.back();
    };
  }
  return constant(matrix_from_json(j));
}

const json& required(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  return j.at(key);
}

ContaminationSpec contamination_from_json(const json& j, bool ao_layer, const std::string& where) {
  check_keys(j, {"r", "dist"}, where);
  ContaminationSpec c;
  const double r = number(required(j, "r", where), where + ".r");
  ContaminatingDist d = dist_from_json(required(j, "dist", where));
  if (ao_layer) {
    c.r_ao = r;
    c.dist_ao = std::move(d);
  } else {
    c.r_io = r;
    c.dist_io = std::move(d);
  }
  validate(c);
  return c;
}

ContaminationSpec block_from_json(const json& j, const std::string& where) {
  check_keys(j, {"r", "layer", "mean_duration", "amplitude"}, where);
  const std::string layer = j.value("layer", "io");
  if (layer != "io" && layer != "ao") throw ConfigError(where + ".layer: expected 'io' or 'ao'");
  BlockSignal b;
  if (j.contains("mean_duration")) b.mean_duration = number(j.at("mean_duration"), where + ".mean_duration");
  if (j.contains("amplitude")) b.amplitude_scale = number(j.at("amplitude"), where + ".amplitude");
  ContaminationSpec c;
  const double r = j.contains("r") ? number(j.at("r"), where + ".r") : 0.1;
  if (layer == "io") {
    c.r_io = r;
    c.dist_io = b;
  } else {
    c.r_ao = r;
    c.dist_ao = b;
  }
  validate(c);
  return c;
}

Config parse_impl(const json& j) {
  check_keys(j, {"model", "horizon", "seed", "contamination", "filter", "scenario"}, "config");
  Config c;
  const json& mj = required(j, "model", "config");
  if (mj.is_object() && mj.contains("preset")) {
    check_keys(mj, {"preset"}, "model");
    c.preset = parse_preset(mj.at("preset").get<std::string>());
    c.scenario = preset_scenario(*c.preset);
    c.model = c.scenario.model;
    c.horizon = c.scenario.horizon;
  } else {
    c.model = model_from_json(mj);
    c.scenario.name = model_name(c.model);
    c.scenario.model = c.model;
    c.horizon = c.scenario.horizon;
  }
  if (j.contains("horizon")) {
    c.horizon = j.at("horizon").get<int>();
    if (c.horizon < 1) throw ConfigError("horizon: must be >= 1");
  }
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();

  if (j.contains("contamination")) {
    const json& cj = j.at("contamination");
    check_keys(cj, {"ao", "io", "block"}, "contamination");
    if (cj.contains("ao")) c.ao = contamination_from_json(cj.at("ao"), true, "contamination.ao");
    if (cj.contains("io")) c.io = contamination_from_json(cj.at("io"), false, "contamination.io");
    if (cj.contains("block")) c.block = block_from_json(cj.at("block"), "contamination.block");
  }

  if (j.contains("filter")) {
    const json& fj = j.at("filter");
    check_keys(fj, {"variant", "b", "norm", "calibration"}, "filter");
    if (fj.contains("variant")) c.variant = parse_variant(fj.at("variant").get<std::string>());
    if (fj.contains("norm")) c.norm = parse_norm(fj.at("norm").get<std::string>());
    if (fj.contains("b")) {
      c.b = number(fj.at("b"), "filter.b");
      if (std::isnan(*c.b) || *c.b <= 0.0) throw ConfigError("filter.b: must be > 0");
    }
    if (fj.contains("calibration")) {
      const json& kj = fj.at("calibration");
      check_keys(kj, {"criterion", "r", "delta", "mc_size", "steady_mc_size", "seed"}, "filter.calibration");
      const std::string crit = kj.value("criterion", "radius");
      if (crit == "radius")
        c.criterion = RadiusCriterion{kj.contains("r") ? number(kj.at("r"), "filter.calibration.r") : 0.1};
      else if (crit == "efficiency")
        c.criterion = EfficiencyCriterion{kj.contains("delta") ? number(kj.at("delta"), "filter.calibration.delta") : 0.1};
      else
        throw ConfigError("filter.calibration.criterion: expected 'radius' or 'efficiency'");
      if (kj.contains("mc_size")) c.calibration.mc_size = kj.at("mc_size").get<std::size_t>();
      if (kj.contains("steady_mc_size")) c.calibration.steady_mc_size = kj.at("steady_mc_size").get<std::size_t>();
      if (kj.contains("seed")) c.calibration.seed = kj.at("seed").get<std::uint64_t>();
    }
  }
  c.calibration.norm = c.norm;

  Scenario& s = c.scenario;
  s.horizon = c.horizon;
  s.seed = c.seed;
  s.score_time = std::min(s.score_time, s.horizon);
  s.criterion = c.criterion;
  s.calibration_mc = c.calibration.mc_size;
  s.calibration_steady_mc = c.calibration.steady_mc_size;
  s.calibration_seed = c.calibration.seed;
  s.norm = c.norm;
  s.fixed_b = c.b;
  if (c.ao) s.ao = *c.ao;
  if (c.io) s.io = *c.io;
  if (c.block) s.block = *c.block;
  if (j.contains("scenario")) {
    const json& sj = j.at("scenario");
    check_keys(sj, {"name", "runs", "score_time", "regimes", "variants"}, "scenario");
    if (sj.contains("name")) s.name = sj.at("name").get<std::string>();
    if (sj.contains("runs")) s.runs = sj.at("runs").get<int>();
    if (sj.contains("score_time")) s.score_time = sj.at("score_time").get<int>();
    if (sj.contains("regimes")) {
      s.regimes.clear();
      for (const auto& r : sj.at("regimes")) s.regimes.push_back(parse_regime(r.get<std::string>()));
    }
    if (sj.contains("variants")) {
      s.variants.clear();
      for (const auto& v : sj.at("variants")) s.variants.push_back(parse_variant(v.get<std::string>()));
    }
  }
  validate(s);
  return c;
}

}  // namespace

Mat matrix_from_json(const json& j) {
  if (j.is_number()) return Mat::Constant(1, 1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError("matrix: expected a non-empty array of rows");
  if (!j.front().is_array()) {
    // a flat list is a column vector
    Mat m(static_cast<Eigen::Index>(j.size()), 1);
    for (std::size_t i = 0; i < j.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = number(j[i], "matrix");
    return m;
  }
  const std::size_t cols = j.front().size();
  Mat m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) throw ConfigError("matrix: rows have different lengths");
    for (std::size_t k = 0; k < cols; ++k)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = number(j[i][k], "matrix");
  }
  return m;
}

Vec vector_from_json(const json& j) {
  if (j.is_number()) return Vec::Constant(1, j.get<double>());
  if (!j.is_array() || j.empty()) throw ConfigError("vector: expected a non-empty array");
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], "vector");
  return v;
}

json matrix_to_json(const Mat& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(m(i, k));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

ContaminatingDist dist_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("dist: expected an object with a 'type'");
  const std::string type = j.at("type").get<std::string>();
  if (type == "point") {
    check_keys(j, {"type", "mu"}, "dist(point)");
    return PointMass{vector_from_json(required(j, "mu", "dist(point)"))};
  }
  if (type == "gaussian") {
    check_keys(j, {"type", "mean", "cov"}, "dist(gaussian)");
    return GaussianDist{vector_from_json(required(j, "mean", "dist(gaussian)")),
                        matrix_from_json(required(j, "cov", "dist(gaussian)"))};
  }
  if (type == "cauchy") {
    check_keys(j, {"type", "location", "scale"}, "dist(cauchy)");
    CauchyDist d;
    if (j.contains("location")) d.location = number(j.at("location"), "dist.location");
    if (j.contains("scale")) d.scale = number(j.at("scale"), "dist.scale");
    return d;
  }
  if (type == "mvcauchy") {
    check_keys(j, {"type", "center", "shape"}, "dist(mvcauchy)");
    return MultivariateCauchy{j.contains("center") ? vector_from_json(j.at("center")) : Vec::Zero(1),
                              matrix_from_json(required(j, "shape", "dist(mvcauchy)"))};
  }
  if (type == "block") {
    check_keys(j, {"type", "mean_duration", "amplitude"}, "dist(block)");
    BlockSignal b;
    if (j.contains("mean_duration")) b.mean_duration = number(j.at("mean_duration"), "dist.mean_duration");
    if (j.contains("amplitude")) b.amplitude_scale = number(j.at("amplitude"), "dist.amplitude");
    return b;
  }
  throw ConfigError("dist: unknown type '" + type + "'");
}

json dist_to_json(const ContaminatingDist& d) {
  return std::visit(
      [](const auto& x) -> json {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, PointMass>) {
          return {{"type", "point"}, {"mu", vector_to_json(x.mu)}};
        } else if constexpr (std::is_same_v<T, GaussianDist>) {
          return {{"type", "gaussian"}, {"mean", vector_to_json(x.mean)}, {"cov", matrix_to_json(x.cov)}};
        } else if constexpr (std::is_same_v<T, CauchyDist>) {
          return {{"type", "cauchy"}, {"location", x.location}, {"scale", x.scale}};
        } else if constexpr (std::is_same_v<T, MultivariateCauchy>) {
          return {{"type", "mvcauchy"}, {"center", vector_to_json(x.center)}, {"shape", matrix_to_json(x.shape)}};
        } else {
          return {{"type", "block"}, {"mean_duration", x.mean_duration}, {"amplitude", x.amplitude_scale}};
        }
      },
      d);
}

Model model_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("model: expected an object");
  const std::string kind = j.value("kind", "linear");
  if (kind == "linear") {
    check_keys(j, {"kind", "name", "F", "Z", "Q", "V", "a0", "Q0"}, "model(linear)");
    LinearSSM m;
    m.name = j.value("name", "linear");
    m.F = matrix_fn(required(j, "F", "model"), "model.F");
    m.Z = matrix_fn(required(j, "Z", "model"), "model.Z");
    m.Q = matrix_fn(required(j, "Q", "model"), "model.Q");
    m.V = matrix_fn(required(j, "V", "model"), "model.V");
    m.a0 = vector_from_json(required(j, "a0", "model"));
    m.Q0 = matrix_from_json(required(j, "Q0", "model"));
    m.p = static_cast<int>(m.a0.size());
    m.q = static_cast<int>(m.Z(1).rows());
    return m;
  }
  if (kind == "quadratic") {
    check_keys(j, {"kind", "name", "A", "B", "Z", "Q", "V", "a0", "Q0"}, "model(quadratic)");
    QuadraticForm form;
    form.B = matrix_from_json(required(j, "B", "model"));
    form.Z = matrix_from_json(required(j, "Z", "model"));
    const auto p = form.B.rows();
    if (j.contains("A")) {
      form.A = matrix_from_json(j.at("A"));
    } else {
      form.A = Mat::Zero(p, p * p);
    }
    return make_quadratic_model(j.value("name", "quadratic"), std::move(form),
                                matrix_from_json(required(j, "Q", "model")),
                                matrix_from_json(required(j, "V", "model")),
                                vector_from_json(required(j, "a0", "model")),
                                matrix_from_json(required(j, "Q0", "model")));
  }
  throw ConfigError("model.kind: expected 'linear' or 'quadratic'");
}

namespace {

json fn_to_json(const MatrixFn& f, int T) {
  const Mat first = f(1);
  bool constant_in_t = true;
  for (int t = 2; t <= T && constant_in_t; ++t) {
    const Mat m = f(t);
    constant_in_t = m.rows() == first.rows() && m.cols() == first.cols() && m == first;
  }
  if (constant_in_t) return matrix_to_json(first);
  json seq = json::array();
  for (int t = 1; t <= T; ++t) seq.push_back(matrix_to_json(f(t)));
  return {{"sequence", seq}};
}

}  // namespace

json dump_model_config(const Model& m, int T) {
  if (const auto* lin = std::get_if<LinearSSM>(&m)) {
    return {{"kind", "linear"},
            {"name", lin->name},
            {"F", fn_to_json(lin->F, T)},
            {"Z", fn_to_json(lin->Z, T)},
            {"Q", fn_to_json(lin->Q, T)},
            {"V", fn_to_json(lin->V, T)},
            {"a0", vector_to_json(lin->a0)},
            {"Q0", matrix_to_json(lin->Q0)}};
  }
  const auto& nl = std::get<NonlinearSSM>(m);
  if (!nl.quadratic) throw ConfigError("only linear and quadratic models can be written to a config");
  return {{"kind", "quadratic"},
          {"name", nl.name},
          {"A", matrix_to_json(nl.quadratic->A)},
          {"B", matrix_to_json(nl.quadratic->B)},
          {"Z", matrix_to_json(nl.quadratic->Z)},
          {"Q", matrix_to_json(nl.Q(1))},
          {"V", matrix_to_json(nl.V(1))},
          {"a0", vector_to_json(nl.a0)},
          {"Q0", matrix_to_json(nl.Q0)}};
}

Config parse_config(const json& j) {
  try {
    return parse_impl(j);
  } catch (const ConfigError&) {
    throw;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

Config load_config(const std::string& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("'" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

Config preset_config(Preset p) { return parse_config(json{{"model", {{"preset", preset_name(p)}}}}); }

}  // namespace rkf
