#pragma once

#include "rkf/calibration.hpp"
#include "rkf/contamination.hpp"
#include "rkf/filter.hpp"
#include "rkf/model.hpp"
#include "rkf/study.hpp"

#include <cstdint>
#include <optional>
#include <string>

#include <json.hpp>

namespace rkf {

/// Parsed structured config (schema in README.md). Every field except the
/// model has a default, so `{"model": {"preset": "sima"}}` is a full config.
struct Config {
  Model model;
  std::optional<Preset> preset;
  int horizon = 0;
  std::uint64_t seed = 1;

  std::optional<ContaminationSpec> ao, io, block;

  Variant variant = Variant::Classical;
  std::optional<double> b;  // fixed clipping height; otherwise calibrated
  Criterion criterion = RadiusCriterion{0.1};
  CalibrationOptions calibration;
  NormKind norm = NormKind::Euclidean;

  Scenario scenario;
};

/// Throws ConfigError with the offending key on any schema violation.
Config parse_config(const nlohmann::json& j);
Config load_config(const std::string& path);

/// Config for a preset with its default scenario.
Config preset_config(Preset p);

Model model_from_json(const nlohmann::json& j);
/// Writes a model in config form; time-varying matrices are expanded over t = 1..T.
nlohmann::json dump_model_config(const Model& m, int T);

ContaminatingDist dist_from_json(const nlohmann::json& j);
nlohmann::json dist_to_json(const ContaminatingDist& d);

Mat matrix_from_json(const nlohmann::json& j);
Vec vector_from_json(const nlohmann::json& j);
nlohmann::json matrix_to_json(const Mat& m);
nlohmann::json vector_to_json(const Vec& v);

}  // namespace rkf
