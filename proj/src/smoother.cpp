#include "rkf/smoother.hpp"

#include "rkf/error.hpp"

namespace rkf {

Mat smoother_gain(const Mat& sigma_filt, const Mat& F_next, const Mat& sigma_pred_next) {
  return sigma_filt * F_next.transpose() * pseudo_inverse(sigma_pred_next);
}

SmootherResult smooth(const FilterResult& filtered) {
  const int T = filtered.horizon();
  if (T < 1) throw InvalidInput("smooth: filter result has no steps");
  for (int t = 1; t <= T; ++t) {
    const FilterState& s = filtered.at(t);
    if (s.x_pred.size() == 0 || s.x_filt.size() == 0 || s.F.size() == 0)
      throw InvalidInput("smooth: filter result is incomplete at t=" + std::to_string(t));
  }

  SmootherResult out;
  const auto n = static_cast<std::size_t>(T) + 1;
  out.x_smooth.resize(n);
  out.sigma_smooth.resize(n);
  out.J.resize(static_cast<std::size_t>(T));
  out.x_smooth[n - 1] = filtered.at(T).x_filt;
  out.sigma_smooth[n - 1] = filtered.at(T).sigma_filt;
  for (int t = T - 1; t >= 0; --t) {
    const auto k = static_cast<std::size_t>(t);
    const FilterState& cur = filtered.at(t);
    const FilterState& next = filtered.at(t + 1);
    const Mat J = smoother_gain(cur.sigma_filt, next.F, next.sigma_pred);
    out.x_smooth[k] = cur.x_filt + J * (out.x_smooth[k + 1] - next.x_pred);
    out.sigma_smooth[k] =
        clamp_psd(cur.sigma_filt + J * (out.sigma_smooth[k + 1] - next.sigma_pred) * J.transpose(), "Sigma_{t|T}",
                  std::max(cur.sigma_filt.cwiseAbs().maxCoeff(), next.sigma_pred.cwiseAbs().maxCoeff()));
    out.J[k] = J;
  }
  return out;
}

std::vector<Vec> smooth_means(const GainSchedule& s, const MeanPath& path) {
  const int T = s.horizon();
  if (static_cast<int>(path.x_filt.size()) != T + 1)
    throw DimensionMismatch("smooth_means: path length does not match the schedule");
  std::vector<Vec> x(static_cast<std::size_t>(T) + 1);
  x[static_cast<std::size_t>(T)] = path.x_filt[static_cast<std::size_t>(T)];
  for (int t = T - 1; t >= 0; --t) {
    const auto k = static_cast<std::size_t>(t);
    x[k] = path.x_filt[k] + s.smoother_gain[k] * (x[k + 1] - path.x_pred[k + 1]);
  }
  return x;
}

}  // namespace rkf
