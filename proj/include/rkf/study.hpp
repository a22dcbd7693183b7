#pragma once

#include "rkf/calibration.hpp"
#include "rkf/contamination.hpp"
#include "rkf/filter.hpp"
#include "rkf/model.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rkf {

enum class Regime { Ideal, AO, IO, Block };
enum class Stage { Filter, Smoother };

std::string_view regime_name(Regime r);
Regime parse_regime(std::string_view name);
std::string_view stage_name(Stage s);
Stage parse_stage(std::string_view name);

struct Scenario {
  std::string name;
  Model model;
  int horizon = 50;
  int score_time = 35;
  int runs = 10000;
  std::uint64_t seed = 1;
  std::vector<Regime> regimes{Regime::Ideal, Regime::AO, Regime::IO};
  std::vector<Variant> variants{Variant::Classical, Variant::RlsIO, Variant::RlsAO};
  Criterion criterion = RadiusCriterion{0.1};
  std::size_t calibration_mc = 100000;
  std::size_t calibration_steady_mc = 0;
  std::uint64_t calibration_seed = 7;
  NormKind norm = NormKind::Euclidean;
  std::optional<double> fixed_b;  // skips calibration when set
  ContaminationSpec ao;
  ContaminationSpec io;
  ContaminationSpec block;

  const ContaminationSpec* contamination(Regime r) const;
};

void validate(const Scenario& s);

/// Default scenario for a preset: horizon, score time and contamination.
Scenario preset_scenario(Preset p);

inline constexpr std::array<double, 5> kQuantileLevels{0.05, 0.25, 0.5, 0.75, 0.95};

/// One (regime, variant, stage) cell; errors are estimate - x_real at t*.
struct CellStats {
  Regime regime = Regime::Ideal;
  Variant variant = Variant::Classical;
  Stage stage = Stage::Filter;
  double mse = 0.0;
  double mse_se = 0.0;
  double mse_dnorm = 0.0;
  std::vector<double> coord_mse;
  std::vector<std::array<double, 5>> coord_quantiles;  // of the signed error
  std::vector<double> sq_error;     // per run
  std::vector<double> dnorm_sq;     // per run
  std::vector<double> coord_error;  // per run, row-major runs x p

  bool operator==(const CellStats&) const = default;
};

struct ClipInfo {
  Variant variant = Variant::RlsAO;
  double b_score_time = kInf;
  std::vector<double> b;
  int steady_state_index = 0;

  bool operator==(const ClipInfo&) const = default;
};

struct StudyReport {
  std::string scenario;
  int runs = 0;
  int horizon = 0;
  int score_time = 0;
  int state_dim = 0;
  std::uint64_t seed = 0;
  std::vector<CellStats> cells;
  std::vector<ClipInfo> clipping;
  double io_dnorm_bound = kInf;  // 2 tr(B^-(V + b^2 I)) for the IO b at t*
  std::vector<std::string> omitted{"hybf", "hybs"};

  const CellStats& cell(Regime r, Variant v, Stage s) const;
  bool operator==(const StudyReport&) const = default;
};

/// Replications run in parallel (OpenMP) with per-replication seeds; results
/// are independent of the thread count.
StudyReport run_study(const Scenario& s);

/// Single-threaded reference; produces the same report as run_study.
StudyReport run_study_serial(const Scenario& s);

/// Clipping heights the study would use for a robust variant.
ClipHeights study_heights(const Scenario& s, Variant v, ClipInfo* info = nullptr);

/// Neumaier-compensated sum.
double compensated_sum(const std::vector<double>& x);

/// Type-7 sample quantile of unsorted data.
double sample_quantile(std::vector<double> x, double level);

}  // namespace rkf
