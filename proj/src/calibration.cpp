#include "rkf/calibration.hpp"

#include "rkf/error.hpp"
#include "rkf/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rkf {

std::string criterion_name(const Criterion& c) {
  return std::holds_alternative<RadiusCriterion>(c) ? "radius" : "efficiency";
}

double CalibrationTable::at(int t) const {
  if (b.empty()) throw InvalidParameter("calibration table is empty");
  const auto k = static_cast<std::size_t>(std::max(t, 1) - 1);
  return k < b.size() ? b[k] : b.back();
}

Mat clipped_covariance(const Gain& g, Variant variant) {
  if (variant == Variant::RlsIO) return symmetrize(g.residual_map * g.C * g.residual_map.transpose());
  return symmetrize(g.K * g.C * g.K.transpose());
}

namespace {

/// Norms of mc_size draws from N(0, cov), sorted ascending.
std::vector<double> sorted_norms(const Mat& cov, std::size_t n, std::uint64_t seed, NormKind norm) {
  const Mat root = symmetric_sqrt(cov);
  const ClipNorm cn = norm == NormKind::Euclidean ? ClipNorm::euclidean() : ClipNorm::mahalanobis(SemiNorm(cov));
  Rng rng(seed, Stream::Calibration);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = cn(Vec(root * rng.gaussian(cov.rows())));
  std::sort(out.begin(), out.end());
  return out;
}

/// Geometric bisection for a decreasing function on [lo, hi] with f(lo) > 0 > f(hi).
template <class F>
double bisect_decreasing(F&& f, double lo, double hi) {
  while (hi / lo - 1.0 > kBisectionRelTol) {
    const double mid = std::sqrt(lo * hi);
    if (f(mid) > 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return std::sqrt(lo * hi);
}

void require_mc_size(std::size_t n) {
  if (n < 100) throw InvalidParameter("Monte-Carlo size must be at least 100");
}

}  // namespace

ClipSolution solve_radius(const Mat& cov, double r, std::size_t mc_size, std::uint64_t seed, NormKind norm) {
  if (!(r >= 0.0 && r <= 1.0)) throw InvalidParameter("radius must lie in [0, 1]");
  require_mc_size(mc_size);
  if (r == 0.0) return {kInf, false};

  const std::vector<double> n = sorted_norms(cov, mc_size, seed, norm);
  // suffix[i] = sum of n[i..]
  std::vector<double> suffix(n.size() + 1, 0.0);
  for (std::size_t i = n.size(); i-- > 0;) suffix[i] = suffix[i + 1] + n[i];
  const double count = static_cast<double>(n.size());
  const double scale = std::sqrt(std::inner_product(n.begin(), n.end(), n.begin(), 0.0) / count);
  if (!(scale > 0.0)) return {kInf, false};  // nothing to clip

  const auto g = [&](double b) {
    const auto first = static_cast<std::size_t>(std::upper_bound(n.begin(), n.end(), b) - n.begin());
    const double excess = (suffix[first] - b * static_cast<double>(n.size() - first)) / count;
    return (1.0 - r) * excess - r * b;
  };
  const double lo = 1e-8 * scale;
  const double hi = 1e8 * scale;
  if (r == 1.0 || g(lo) <= 0.0) return {lo, true};
  if (g(hi) >= 0.0) return {kInf, false};
  return {bisect_decreasing(g, lo, hi), false};
}

CriterionResidual radius_residual(const Mat& cov, double r, double b, std::size_t mc_size, std::uint64_t seed,
                                  NormKind norm) {
  require_mc_size(mc_size);
  const Mat root = symmetric_sqrt(cov);
  const ClipNorm cn = norm == NormKind::Euclidean ? ClipNorm::euclidean() : ClipNorm::mahalanobis(SemiNorm(cov));
  Rng rng(seed, Stream::Calibration);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < mc_size; ++i) {
    const double x = cn(Vec(root * rng.gaussian(cov.rows())));
    const double gi = (1.0 - r) * std::max(x - b, 0.0) - r * b;
    const double d = gi - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (gi - mean);
  }
  const double var = m2 / static_cast<double>(mc_size - 1);
  return {mean, std::sqrt(var / static_cast<double>(mc_size))};
}

namespace {

/// Per-sample scalars so that |error(w)|^2 = aa + 2 w ab + w^2 bb where w is
/// the Huber weight min(1, b/|clipped|).
struct EfficiencySamples {
  std::vector<double> aa, ab, bb, clip_norm;
  double classical_mse = 0.0;
  std::vector<double> classical_sq;
};

EfficiencySamples efficiency_samples(const Mat& sigma_pred, const Mat& Z, const Mat& V, Variant variant,
                                     std::size_t n, std::uint64_t seed, NormKind norm) {
  if (variant == Variant::Classical) throw InvalidParameter("efficiency calibration needs a robust variant");
  const Gain g = compute_gain(sigma_pred, Z, V);
  const Mat sroot = symmetric_sqrt(sigma_pred);
  const Mat vroot = symmetric_sqrt(V);
  const ClipNorm cn = norm == NormKind::Euclidean ? ClipNorm::euclidean()
                                                  : ClipNorm::mahalanobis(SemiNorm(clipped_covariance(g, variant)));
  Rng rng(seed, Stream::Calibration);
  EfficiencySamples s;
  s.aa.resize(n);
  s.ab.resize(n);
  s.bb.resize(n);
  s.clip_norm.resize(n);
  s.classical_sq.resize(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec dx = sroot * rng.gaussian(sroot.cols());
    const Vec dy = Z * dx + vroot * rng.gaussian(vroot.cols());
    const Vec kdy = g.K * dy;
    s.classical_sq[i] = (dx - kdy).squaredNorm();
    total += s.classical_sq[i];
    Vec a, c;
    if (variant == Variant::RlsAO) {
      // dx - w K dY
      a = dx;
      c = -kdy;
      s.clip_norm[i] = cn(kdy);
    } else {
      // dx - Z^S (dY - w e) = (dx - Z^S dY) + w Z^S e
      const Vec e = g.residual_map * dy;
      a = dx - g.z_sigma * dy;
      c = g.z_sigma * e;
      s.clip_norm[i] = cn(e);
    }
    s.aa[i] = a.squaredNorm();
    s.ab[i] = a.dot(c);
    s.bb[i] = c.squaredNorm();
  }
  s.classical_mse = total / static_cast<double>(n);
  return s;
}

double huber_weight(double norm, double b) { return norm <= b ? 1.0 : b / norm; }

double robust_sq(const EfficiencySamples& s, std::size_t i, double b) {
  const double w = huber_weight(s.clip_norm[i], b);
  return s.aa[i] + 2.0 * w * s.ab[i] + w * w * s.bb[i];
}

}  // namespace

ClipSolution solve_efficiency(const Mat& sigma_pred, const Mat& Z, const Mat& V, Variant variant, double delta,
                              std::size_t mc_size, std::uint64_t seed, NormKind norm) {
  if (!(delta >= 0.0)) throw InvalidParameter("efficiency loss delta must be >= 0");
  require_mc_size(mc_size);
  if (delta == 0.0) return {kInf, false};
  const EfficiencySamples s = efficiency_samples(sigma_pred, Z, V, variant, mc_size, seed, norm);
  const double target = (1.0 + delta) * s.classical_mse;
  const double count = static_cast<double>(mc_size);
  const auto f = [&](double b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < s.aa.size(); ++i) sum += robust_sq(s, i, b);
    return sum / count - target;
  };
  double scale = 0.0;
  for (double x : s.clip_norm) scale += x * x;
  scale = std::sqrt(scale / count);
  if (!(scale > 0.0)) return {kInf, false};
  const double lo = 1e-8 * scale;
  const double hi = 1e8 * scale;
  if (f(lo) <= 0.0) return {lo, true};  // even ignoring the observation costs less than (1 + delta)
  if (f(hi) >= 0.0) return {kInf, false};
  return {bisect_decreasing(f, lo, hi), false};
}

CriterionResidual efficiency_residual(const Mat& sigma_pred, const Mat& Z, const Mat& V, Variant variant,
                                      double delta, double b, std::size_t mc_size, std::uint64_t seed,
                                      NormKind norm) {
  require_mc_size(mc_size);
  const EfficiencySamples s = efficiency_samples(sigma_pred, Z, V, variant, mc_size, seed, norm);
  double mean = 0.0, m2 = 0.0;
  for (std::size_t i = 0; i < mc_size; ++i) {
    const double gi = robust_sq(s, i, b) - (1.0 + delta) * s.classical_sq[i];
    const double d = gi - mean;
    mean += d / static_cast<double>(i + 1);
    m2 += d * (gi - mean);
  }
  return {mean, std::sqrt(m2 / static_cast<double>(mc_size - 1) / static_cast<double>(mc_size))};
}

int steady_state_index(const GainSchedule& s, double tol) {
  for (int t = 2; t <= s.horizon(); ++t)
    if ((s.at(t).sigma_pred - s.at(t - 1).sigma_pred).norm() < tol) return t;
  return 0;
}

CalibrationTable calibrate(const Model& model, Variant variant, const Criterion& criterion, int T,
                           const CalibrationOptions& opt) {
  if (variant == Variant::Classical) throw InvalidParameter("calibration needs a robust variant");
  if (opt.mc_size < 10000) throw InvalidParameter("calibration needs mc_size >= 10000");
  if (const auto* rc = std::get_if<RadiusCriterion>(&criterion)) {
    if (!(rc->r >= 0.0 && rc->r <= 1.0)) throw InvalidParameter("radius must lie in [0, 1]");
  } else if (!(std::get<EfficiencyCriterion>(criterion).delta >= 0.0)) {
    throw InvalidParameter("efficiency loss delta must be >= 0");
  }

  const GainSchedule sched = build_schedule(model, T, opt.norm);
  CalibrationTable table;
  table.criterion = criterion;
  table.variant = variant;
  table.norm = opt.norm;
  table.mc_size = opt.mc_size;
  table.seed = opt.seed;
  table.steady_state_index = steady_state_index(sched);
  const int last = table.steady_state_index > 0 ? table.steady_state_index : T;

  std::vector<ClipSolution> sol(static_cast<std::size_t>(last));
  std::vector<std::string> errors(static_cast<std::size_t>(last));
#pragma omp parallel for schedule(dynamic)
  for (int t = 1; t <= last; ++t) {
    const auto k = static_cast<std::size_t>(t - 1);
    try {
      const ScheduleStep& step = sched.at(t);
      if (step.observed.empty()) {
        sol[k] = {kInf, false};
        continue;
      }
      const std::uint64_t seed_t = derive_seed(opt.seed, static_cast<std::uint64_t>(t));
      const std::size_t mc =
          t == table.steady_state_index ? std::max(opt.mc_size, opt.steady_mc_size) : opt.mc_size;
      if (const auto* rc = std::get_if<RadiusCriterion>(&criterion)) {
        sol[k] = solve_radius(clipped_covariance(step.gain, variant), rc->r, mc, seed_t, opt.norm);
      } else {
        const double delta = std::get<EfficiencyCriterion>(criterion).delta;
        sol[k] = solve_efficiency(step.sigma_pred, step.gain.Z, step.gain.V, variant, delta, mc, seed_t, opt.norm);
      }
    } catch (const std::exception& e) {
      errors[k] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw NumericalError("calibration failed: " + e);

  table.b.resize(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    const ClipSolution& s = sol[static_cast<std::size_t>(std::min(t, last) - 1)];
    table.b[static_cast<std::size_t>(t - 1)] = s.b;
    if (s.degenerate && t <= last) {
      table.degenerate = true;
      table.warnings.push_back("t=" + std::to_string(t) + ": criterion not attainable, b set to the lower endpoint");
    }
  }
  return table;
}

CalibrationTable calibrate_radius(const Model& model, Variant variant, double r, int T, const CalibrationOptions& opt) {
  return calibrate(model, variant, RadiusCriterion{r}, T, opt);
}

CalibrationTable calibrate_efficiency(const Model& model, Variant variant, double delta, int T,
                                      const CalibrationOptions& opt) {
  return calibrate(model, variant, EfficiencyCriterion{delta}, T, opt);
}

}  // namespace rkf
