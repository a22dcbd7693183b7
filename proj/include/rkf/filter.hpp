#pragma once

#include "rkf/linalg.hpp"
#include "rkf/model.hpp"

#include <optional>
#include <string_view>
#include <vector>

namespace rkf {

/// Classical Kalman filter, AO-robust rLS (clips the correction K dY) and
/// IO-robust rLS (clips the estimated observation error (I - Z K) dY).
enum class Variant { Classical, RlsAO, RlsIO };

std::string_view variant_name(Variant v);
Variant parse_variant(std::string_view name);

enum class NormKind { Euclidean, Mahalanobis };

std::string_view norm_name(NormKind n);
NormKind parse_norm(std::string_view name);

/// Clipping heights: one fixed value, +inf, or a per-step table (1-based;
/// steps past the end of the table reuse its last entry).
class ClipHeights {
 public:
  static ClipHeights infinite() { return ClipHeights({kInf}, false); }
  static ClipHeights fixed(double b);
  static ClipHeights table(std::vector<double> b);

  double at(int t) const;
  bool is_table() const { return table_; }
  const std::vector<double>& values() const { return b_; }

 private:
  ClipHeights(std::vector<double> b, bool table) : b_(std::move(b)), table_(table) {}
  std::vector<double> b_;
  bool table_ = false;
};

struct FilterConfig {
  Variant variant = Variant::Classical;
  ClipHeights b = ClipHeights::infinite();
  NormKind norm = NormKind::Euclidean;
};

/// Everything the correction step needs from (Sigma_{t|t-1}, Z_t, V_t).
/// For partially missing observations Z and V are restricted to the observed rows.
struct Gain {
  Mat Z;
  Mat V;
  Mat C;
  Mat K;
  Mat sigma_filt;
  Mat z_sigma;       // Sigma Z' (Z Sigma Z')^-
  Mat residual_map;  // I_q - Z K, maps dY to E[eps | dY]
  std::optional<SemiNorm> ao_weight;  // Mahalanobis weights of the clipped quantities
  std::optional<SemiNorm> io_weight;
};

Gain compute_gain(const Mat& sigma_pred, const Mat& Z, const Mat& V);
void attach_mahalanobis(Gain& g);

struct Increment {
  Vec dx;
  bool clipped = false;
};

/// x_{t|t} - x_{t|t-1} for the given variant:
///   Classical  K dY
///   RlsAO      H_b(K dY)
///   RlsIO      Z^Sigma (dY - H_b((I - Z K) dY))
Increment correction_increment(const Gain& g, const Vec& dy, Variant variant, double b, NormKind norm);

/// Per-step filter quantities; `F` is the transition (or its Jacobian) that
/// mapped t-1 to t. At t = 0 only x_filt/sigma_filt are meaningful.
struct FilterState {
  int t = 0;
  Vec x_pred;
  Mat sigma_pred;
  Vec x_filt;
  Mat sigma_filt;
  Mat K;
  Mat C;
  Vec dy;
  Mat F;
  bool observed = true;
  bool clipped = false;
};

struct Prediction {
  Vec x;
  Mat sigma;
  Mat F;
};

FilterState initial_state(const Model& m);

Prediction predict(const FilterState& prev, const LinearSSM& m, int t);
FilterState correct_classical(const Prediction& pred, const Vec& y, const LinearSSM& m, int t);
FilterState correct_rls_ao(const Prediction& pred, const Vec& y, double b, NormKind norm, const LinearSSM& m, int t);
FilterState correct_rls_io(const Prediction& pred, const Vec& y, double b, NormKind norm, const LinearSSM& m, int t);

struct FilterResult {
  Variant variant = Variant::Classical;
  std::vector<FilterState> states;  // states[t], t = 0..T

  int horizon() const { return static_cast<int>(states.size()) - 1; }
  const FilterState& at(int t) const { return states.at(static_cast<std::size_t>(t)); }
};

/// Observations: one q-vector per step; NaN entries are missing. A fully
/// missing step skips the correction.
using Observations = std::vector<Vec>;

FilterResult run_filter(const Model& model, const Observations& y, const FilterConfig& cfg);

/// Covariance side of the recursion, which does not depend on the data for
/// linear models. For nonlinear models the Jacobians are taken along the
/// noise-free nominal path x_t = f_t(x_{t-1}, u_t, v_bar).
struct ScheduleStep {
  Mat F;
  Mat sigma_pred;
  Gain gain;
  std::vector<int> observed;  // observed coordinates; empty when fully missing
};

struct GainSchedule {
  Vec x0;
  Mat sigma0;
  std::vector<ScheduleStep> steps;  // steps[t-1]
  std::vector<Mat> smoother_gain;   // J_t for t = 0..T-1

  int horizon() const { return static_cast<int>(steps.size()); }
  const ScheduleStep& at(int t) const { return steps.at(static_cast<std::size_t>(t - 1)); }
};

/// `missing` (optional) marks missing observation coordinates per step.
GainSchedule build_schedule(const Model& model, int T, NormKind norm,
                            const std::vector<std::vector<bool>>* missing = nullptr);

/// Mean recursion only, for a linear model whose schedule is already known.
/// Bitwise identical to the means inside run_filter for the same schedule.
struct MeanPath {
  std::vector<Vec> x_pred;  // index t, x_pred[0] unused
  std::vector<Vec> x_filt;  // index t, x_filt[0] = a0
  std::vector<bool> clipped;
};

MeanPath filter_means(const GainSchedule& s, const Observations& y, const FilterConfig& cfg);

std::vector<std::vector<bool>> missing_mask(const Observations& y);
bool any_missing(const Observations& y);

}  // namespace rkf
