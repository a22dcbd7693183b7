#pragma once

#include "rkf/filter.hpp"
#include "rkf/linalg.hpp"

#include <vector>

namespace rkf {

/// Fixed-interval smoother output, indexed by time t = 0..T.
struct SmootherResult {
  std::vector<Vec> x_smooth;
  std::vector<Mat> sigma_smooth;
  std::vector<Mat> J;  // J_t for t = 0..T-1
};

/// J_t = Sigma_{t|t} F_{t+1}' (Sigma_{t+1|t})^-, where F_{t+1} maps t to t+1.
Mat smoother_gain(const Mat& sigma_filt, const Mat& F_next, const Mat& sigma_pred_next);

/// Backward pass over a complete filter result:
///   x_{t|T} = x_{t|t} + J_t (x_{t+1|T} - x_{t+1|t})
///   Sigma_{t|T} = Sigma_{t|t} + J_t (Sigma_{t+1|T} - Sigma_{t+1|t}) J_t'
/// Robust filter outputs are smoothed by the same recursion.
SmootherResult smooth(const FilterResult& filtered);

/// Same mean recursion driven by a precomputed schedule; index t = 0..T.
std::vector<Vec> smooth_means(const GainSchedule& s, const MeanPath& path);

}  // namespace rkf
