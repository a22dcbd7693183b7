#pragma once

#include "rkf/filter.hpp"
#include "rkf/linalg.hpp"
#include "rkf/model.hpp"

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

namespace rkf {

/// Minimax criterion for the SO neighborhood of radius r:
///   (1 - r) E (|X| - b)_+ = r b,  X the clipped quantity under the ideal model.
struct RadiusCriterion {
  double r = 0.1;
};

/// Efficiency-loss criterion: E|dX - robust correction|^2 = (1 + delta) E|dX - K dY|^2.
struct EfficiencyCriterion {
  double delta = 0.1;
};

using Criterion = std::variant<RadiusCriterion, EfficiencyCriterion>;

std::string criterion_name(const Criterion& c);

struct CalibrationOptions {
  std::size_t mc_size = 100000;
  // Sample size for the steady-state step, whose b serves every later step (0: mc_size).
  std::size_t steady_mc_size = 0;
  std::uint64_t seed = 1;
  NormKind norm = NormKind::Euclidean;
};

inline constexpr double kSteadyStateTol = 1e-9;
inline constexpr double kBisectionRelTol = 1e-6;

struct CalibrationTable {
  std::vector<double> b;  // b[t-1]; +inf allowed
  Criterion criterion = RadiusCriterion{};
  Variant variant = Variant::RlsAO;
  NormKind norm = NormKind::Euclidean;
  std::size_t mc_size = 0;
  std::uint64_t seed = 0;
  int steady_state_index = 0;  // first t whose b is reused for all later steps; 0 if never steady
  bool degenerate = false;     // some step hit the b -> 0 endpoint
  std::vector<std::string> warnings;

  ClipHeights heights() const { return ClipHeights::table(b); }
  double at(int t) const;
};

/// Radius criterion for one step whose clipped quantity is N(0, cov).
struct ClipSolution {
  double b = kInf;
  bool degenerate = false;
};

ClipSolution solve_radius(const Mat& cov, double r, std::size_t mc_size, std::uint64_t seed,
                          NormKind norm = NormKind::Euclidean);

/// Monte-Carlo value of (1 - r) E (|X| - b)_+ - r b and its standard error.
struct CriterionResidual {
  double residual = 0.0;
  double std_error = 0.0;
};

CriterionResidual radius_residual(const Mat& cov, double r, double b, std::size_t mc_size, std::uint64_t seed,
                                  NormKind norm = NormKind::Euclidean);

/// Efficiency criterion for one step with prediction covariance sigma_pred.
ClipSolution solve_efficiency(const Mat& sigma_pred, const Mat& Z, const Mat& V, Variant variant, double delta,
                              std::size_t mc_size, std::uint64_t seed, NormKind norm = NormKind::Euclidean);

/// E|dX - robust|^2 - (1 + delta) E|dX - K dY|^2 at b, with standard error.
CriterionResidual efficiency_residual(const Mat& sigma_pred, const Mat& Z, const Mat& V, Variant variant,
                                      double delta, double b, std::size_t mc_size, std::uint64_t seed,
                                      NormKind norm = NormKind::Euclidean);

/// Covariance of the quantity a variant clips: K C K' (AO) or M C M', M = I - Z K (IO).
Mat clipped_covariance(const Gain& g, Variant variant);

/// Per-step clipping heights for a robust variant. Only model covariances
/// enter; steps are calibrated in parallel and frozen once the prediction
/// covariance reaches steady state.
CalibrationTable calibrate_radius(const Model& model, Variant variant, double r, int T,
                                  const CalibrationOptions& opt = {});
CalibrationTable calibrate_efficiency(const Model& model, Variant variant, double delta, int T,
                                      const CalibrationOptions& opt = {});
CalibrationTable calibrate(const Model& model, Variant variant, const Criterion& criterion, int T,
                           const CalibrationOptions& opt = {});

/// First t >= 2 with |Sigma_{t|t-1} - Sigma_{t-1|t-2}|_F < tol, or 0.
int steady_state_index(const GainSchedule& s, double tol = kSteadyStateTol);

}  // namespace rkf
