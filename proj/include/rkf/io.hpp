#pragma once

#include "rkf/calibration.hpp"
#include "rkf/filter.hpp"
#include "rkf/model.hpp"
#include "rkf/smoother.hpp"
#include "rkf/study.hpp"

#include <iosfwd>
#include <string>

#include <json.hpp>

namespace rkf {

/// %.17g, with "inf"/"-inf"/"nan" spelled out.
std::string format_double(double x);

/// Observation CSV: header t,y_1..y_q; blank cells are missing.
void write_observations_csv(std::ostream& os, const Observations& y);
Observations read_observations_csv(std::istream& is);
Observations read_observations_csv(const std::string& path);

/// t,x_1..x_p,y_1..y_q,io_hit,ao_hit for the realized trajectory.
void write_trajectory_csv(std::ostream& os, const Trajectory& tr);

/// t,x_pred_i,x_filt_i,sigma_filt_i (diagonal),dy_norm,clipped.
void write_filter_csv(std::ostream& os, const FilterResult& r);

/// t,x_smooth_i,sigma_smooth_i (diagonal).
void write_smoother_csv(std::ostream& os, const SmootherResult& r);

/// Long-format summary: scenario,regime,variant,stage,coordinate,statistic,value.
void write_report_csv(std::ostream& os, const StudyReport& r);
/// Per-run squared errors: scenario,regime,variant,stage,run,sq_error,dnorm_sq,sq_error_1..p.
void write_report_raw_csv(std::ostream& os, const StudyReport& r);

nlohmann::json report_to_json(const StudyReport& r);
StudyReport report_from_json(const nlohmann::json& j);

enum class ReportFormat { CSV, JSON };

/// CSV writes `path` plus the companion `<path>.raw.csv`.
void export_report(const StudyReport& r, ReportFormat format, const std::string& path);

nlohmann::json calibration_to_json(const CalibrationTable& t);

/// Writes text to a file, throwing IoError on failure.
void write_file(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace rkf
