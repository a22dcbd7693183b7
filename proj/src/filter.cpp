#include "rkf/filter.hpp"

#include "rkf/error.hpp"
#include "rkf/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rkf {

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::Classical: return "classical";
    case Variant::RlsAO: return "rls-ao";
    case Variant::RlsIO: return "rls-io";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "classical" || name == "kalman" || name == "kf") return Variant::Classical;
  if (name == "rls-ao" || name == "rls.ao" || name == "ao") return Variant::RlsAO;
  if (name == "rls-io" || name == "rls.io" || name == "io") return Variant::RlsIO;
  throw InvalidParameter("unknown filter variant '" + std::string(name) + "'");
}

std::string_view norm_name(NormKind n) { return n == NormKind::Euclidean ? "euclidean" : "mahalanobis"; }

NormKind parse_norm(std::string_view name) {
  if (name == "euclidean") return NormKind::Euclidean;
  if (name == "mahalanobis") return NormKind::Mahalanobis;
  throw InvalidParameter("unknown clipping norm '" + std::string(name) + "'");
}

ClipHeights ClipHeights::fixed(double b) {
  if (std::isnan(b) || b <= 0.0) throw InvalidParameter("clipping height must be > 0");
  return ClipHeights({b}, false);
}

ClipHeights ClipHeights::table(std::vector<double> b) {
  if (b.empty()) throw InvalidParameter("clipping-height table is empty (missing calibration)");
  for (double x : b)
    if (std::isnan(x) || x <= 0.0) throw InvalidParameter("clipping-height table entries must be > 0");
  return ClipHeights(std::move(b), true);
}

double ClipHeights::at(int t) const {
  if (!table_) return b_.front();
  const auto k = static_cast<std::size_t>(std::max(t, 1) - 1);
  return k < b_.size() ? b_[k] : b_.back();
}

// ---------------------------------------------------------------------------

Gain compute_gain(const Mat& sigma_pred, const Mat& Z, const Mat& V) {
  Gain g;
  g.Z = Z;
  g.V = V;
  const Mat sz = sigma_pred * Z.transpose();
  g.C = symmetrize(Z * sz + V);
  g.K = sz * pseudo_inverse(g.C);
  const Eigen::Index p = sigma_pred.rows();
  g.sigma_filt = clamp_psd((Mat::Identity(p, p) - g.K * Z) * sigma_pred, "Sigma_{t|t}",
                           sigma_pred.cwiseAbs().maxCoeff());
  g.z_sigma = sz * pseudo_inverse(symmetrize(Z * sz));
  g.residual_map = Mat::Identity(Z.rows(), Z.rows()) - Z * g.K;
  return g;
}

void attach_mahalanobis(Gain& g) {
  if (!g.ao_weight) g.ao_weight.emplace(symmetrize(g.K * g.C * g.K.transpose()));
  if (!g.io_weight) g.io_weight.emplace(symmetrize(g.residual_map * g.C * g.residual_map.transpose()));
}

namespace {

ClipNorm clip_norm(const Gain& g, Variant variant, NormKind norm) {
  if (norm == NormKind::Euclidean) return ClipNorm::euclidean();
  const auto& cached = variant == Variant::RlsAO ? g.ao_weight : g.io_weight;
  if (cached) return ClipNorm::mahalanobis(*cached);
  if (variant == Variant::RlsAO) return ClipNorm::mahalanobis(SemiNorm(symmetrize(g.K * g.C * g.K.transpose())));
  return ClipNorm::mahalanobis(SemiNorm(symmetrize(g.residual_map * g.C * g.residual_map.transpose())));
}

}  // namespace

Increment correction_increment(const Gain& g, const Vec& dy, Variant variant, double b, NormKind norm) {
  if (std::isnan(b) || b <= 0.0) throw InvalidParameter("clipping height must be > 0");
  switch (variant) {
    case Variant::Classical:
      return {g.K * dy, false};
    case Variant::RlsAO: {
      Vec k = g.K * dy;
      if (std::isinf(b)) return {std::move(k), false};
      const ClipNorm n = clip_norm(g, variant, norm);
      const bool clipped = n(k) > b;
      return {huber_clip(k, b, n), clipped};
    }
    case Variant::RlsIO: {
      // Z^S (dY - H_b(e)) written as K dY + Z^S (e - H_b(e)), using Z^S Z K = K;
      // unclipped steps then reproduce the classical correction exactly.
      Vec k = g.K * dy;
      if (std::isinf(b)) return {std::move(k), false};
      const Vec e = g.residual_map * dy;
      const ClipNorm n = clip_norm(g, variant, norm);
      if (n(e) <= b) return {std::move(k), false};
      return {k + g.z_sigma * (e - huber_clip(e, b, n)), true};
    }
  }
  return {};
}

// ---------------------------------------------------------------------------

namespace {

std::vector<int> observed_rows(const Vec& y) {
  std::vector<int> rows;
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (!std::isnan(y(i))) rows.push_back(static_cast<int>(i));
  return rows;
}

std::vector<int> all_rows(int q) {
  std::vector<int> rows(static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}

Mat select_rows(const Mat& m, const std::vector<int>& rows) {
  if (static_cast<Eigen::Index>(rows.size()) == m.rows()) return m;
  Mat out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = m.row(rows[i]);
  return out;
}

Mat select_block(const Mat& m, const std::vector<int>& rows) {
  if (static_cast<Eigen::Index>(rows.size()) == m.rows()) return m;
  const auto n = static_cast<Eigen::Index>(rows.size());
  Mat out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = m(rows[static_cast<std::size_t>(i)], rows[static_cast<std::size_t>(j)]);
  return out;
}

Vec select_entries(const Vec& v, const std::vector<int>& rows) {
  if (static_cast<Eigen::Index>(rows.size()) == v.size()) return v;
  Vec out(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Eigen::Index>(i)) = v(rows[i]);
  return out;
}

void check_observation(const Vec& y, int q, int t) {
  if (y.size() != q)
    throw DimensionMismatch("observation at t=" + std::to_string(t) + " has " + std::to_string(y.size()) +
                            " entries, expected " + std::to_string(q));
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (std::isinf(y(i))) throw InvalidInput("observation at t=" + std::to_string(t) + " is infinite");
}

void require_clip_source(const FilterConfig& cfg) {
  if (cfg.variant != Variant::Classical && cfg.b.values().empty())
    throw InvalidParameter("robust filter needs a clipping height or calibration table");
}

FilterState corrected(const Prediction& pred, const Vec& y, Variant variant, double b, NormKind norm,
                      const LinearSSM& m, int t) {
  check_observation(y, m.q, t);
  FilterState s;
  s.t = t;
  s.x_pred = pred.x;
  s.sigma_pred = pred.sigma;
  s.F = pred.F;
  const std::vector<int> rows = observed_rows(y);
  if (rows.empty()) {
    s.observed = false;
    s.x_filt = pred.x;
    s.sigma_filt = pred.sigma;
    s.K = Mat::Zero(m.p, 0);
    s.C = Mat::Zero(0, 0);
    s.dy = Vec::Zero(0);
    return s;
  }
  const Mat Z = select_rows(m.Z(t), rows);
  const Gain g = compute_gain(pred.sigma, Z, select_block(m.V(t), rows));
  s.dy = select_entries(y, rows) - Z * pred.x;
  const Increment inc = correction_increment(g, s.dy, variant, b, norm);
  s.x_filt = pred.x + inc.dx;
  s.clipped = inc.clipped;
  s.sigma_filt = g.sigma_filt;
  s.K = g.K;
  s.C = g.C;
  return s;
}

}  // namespace

FilterState initial_state(const Model& m) {
  FilterState s;
  s.t = 0;
  s.x_filt = initial_mean(m);
  s.sigma_filt = symmetrize(initial_cov(m));
  s.x_pred = s.x_filt;
  s.sigma_pred = s.sigma_filt;
  s.observed = false;
  return s;
}

Prediction predict(const FilterState& prev, const LinearSSM& m, int t) {
  Prediction pred;
  pred.F = m.F(t);
  if (pred.F.cols() != prev.x_filt.size() || pred.F.rows() != m.p)
    throw DimensionMismatch("predict: F_t does not match the state dimension");
  pred.x = pred.F * prev.x_filt;
  pred.sigma = clamp_psd(pred.F * prev.sigma_filt * pred.F.transpose() + m.Q(t), "Sigma_{t|t-1}");
  return pred;
}

FilterState correct_classical(const Prediction& pred, const Vec& y, const LinearSSM& m, int t) {
  return corrected(pred, y, Variant::Classical, kInf, NormKind::Euclidean, m, t);
}

FilterState correct_rls_ao(const Prediction& pred, const Vec& y, double b, NormKind norm, const LinearSSM& m, int t) {
  return corrected(pred, y, Variant::RlsAO, b, norm, m, t);
}

FilterState correct_rls_io(const Prediction& pred, const Vec& y, double b, NormKind norm, const LinearSSM& m, int t) {
  return corrected(pred, y, Variant::RlsIO, b, norm, m, t);
}

// ---------------------------------------------------------------------------

std::vector<std::vector<bool>> missing_mask(const Observations& y) {
  std::vector<std::vector<bool>> mask;
  mask.reserve(y.size());
  for (const Vec& v : y) {
    std::vector<bool> row(static_cast<std::size_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) row[static_cast<std::size_t>(i)] = std::isnan(v(i));
    mask.push_back(std::move(row));
  }
  return mask;
}

bool any_missing(const Observations& y) {
  for (const Vec& v : y)
    if (v.hasNaN()) return true;
  return false;
}

namespace {

std::vector<int> rows_from_mask(const std::vector<std::vector<bool>>* missing, int t, int q) {
  if (!missing) return all_rows(q);
  const auto& row = missing->at(static_cast<std::size_t>(t - 1));
  std::vector<int> rows;
  for (int i = 0; i < q; ++i)
    if (!row.at(static_cast<std::size_t>(i))) rows.push_back(i);
  return rows;
}

void fill_smoother_gains(GainSchedule& s) {
  const int T = s.horizon();
  s.smoother_gain.resize(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) {
    const Mat& sigma_filt = t == 0 ? s.sigma0 : s.at(t).gain.sigma_filt;
    const ScheduleStep& next = s.at(t + 1);
    s.smoother_gain[static_cast<std::size_t>(t)] = smoother_gain(sigma_filt, next.F, next.sigma_pred);
  }
}

}  // namespace

GainSchedule build_schedule(const Model& model, int T, NormKind norm, const std::vector<std::vector<bool>>* missing) {
  if (T < 1) throw InvalidParameter("horizon must be >= 1");
  validate(model, T);
  GainSchedule s;
  s.x0 = initial_mean(model);
  s.sigma0 = symmetrize(initial_cov(model));
  s.steps.reserve(static_cast<std::size_t>(T));

  const auto* lin = std::get_if<LinearSSM>(&model);
  const auto* nl = std::get_if<NonlinearSSM>(&model);
  const int p = state_dim(model);
  const int q = obs_dim(model);
  Vec x_nom = s.x0;
  Mat sigma = s.sigma0;
  for (int t = 1; t <= T; ++t) {
    ScheduleStep step;
    Mat Z, V;
    if (lin) {
      step.F = lin->F(t);
      step.sigma_pred = clamp_psd(step.F * sigma * step.F.transpose() + lin->Q(t), "Sigma_{t|t-1}");
      Z = lin->Z(t);
      V = lin->V(t);
    } else {
      const Vec u = nl->control_u(t);
      step.F = transition_jacobian_x(*nl, t, x_nom, u, nl->v_bar);
      const Mat B = transition_jacobian_v(*nl, t, x_nom, u, nl->v_bar);
      x_nom = nl->f(t, x_nom, u, nl->v_bar);
      step.sigma_pred = clamp_psd(step.F * sigma * step.F.transpose() + B * nl->Q(t) * B.transpose(), "Sigma_{t|t-1}");
      const Vec w = nl->control_w(t);
      Z = observation_jacobian_x(*nl, t, x_nom, w, nl->eps_bar);
      const Mat D = observation_jacobian_eps(*nl, t, x_nom, w, nl->eps_bar);
      V = D * nl->V(t) * D.transpose();
    }
    step.observed = rows_from_mask(missing, t, q);
    if (step.observed.empty()) {
      step.gain.Z = Mat::Zero(0, p);
      step.gain.sigma_filt = step.sigma_pred;
      step.gain.K = Mat::Zero(p, 0);
      step.gain.C = Mat::Zero(0, 0);
    } else {
      step.gain = compute_gain(step.sigma_pred, select_rows(Z, step.observed), select_block(V, step.observed));
      if (norm == NormKind::Mahalanobis) attach_mahalanobis(step.gain);
    }
    sigma = step.gain.sigma_filt;
    s.steps.push_back(std::move(step));
  }
  fill_smoother_gains(s);
  return s;
}

MeanPath filter_means(const GainSchedule& s, const Observations& y, const FilterConfig& cfg) {
  require_clip_source(cfg);
  const int T = s.horizon();
  if (static_cast<int>(y.size()) != T)
    throw DimensionMismatch("filter_means: " + std::to_string(y.size()) + " observations for a schedule of " +
                            std::to_string(T) + " steps");
  MeanPath path;
  path.x_pred.resize(static_cast<std::size_t>(T) + 1);
  path.x_filt.resize(static_cast<std::size_t>(T) + 1);
  path.clipped.assign(static_cast<std::size_t>(T) + 1, false);
  path.x_filt[0] = s.x0;
  path.x_pred[0] = s.x0;
  for (int t = 1; t <= T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    const ScheduleStep& step = s.at(t);
    path.x_pred[k] = step.F * path.x_filt[k - 1];
    if (step.observed.empty()) {
      path.x_filt[k] = path.x_pred[k];
      continue;
    }
    const Vec dy = select_entries(y[k - 1], step.observed) - step.gain.Z * path.x_pred[k];
    const Increment inc = correction_increment(step.gain, dy, cfg.variant, cfg.b.at(t), cfg.norm);
    path.x_filt[k] = path.x_pred[k] + inc.dx;
    path.clipped[k] = inc.clipped;
  }
  return path;
}

namespace {

FilterResult run_linear(const LinearSSM& m, const Observations& y, const FilterConfig& cfg) {
  const int T = static_cast<int>(y.size());
  for (int t = 1; t <= T; ++t) check_observation(y[static_cast<std::size_t>(t - 1)], m.q, t);
  const auto mask = missing_mask(y);
  const GainSchedule s = build_schedule(m, T, cfg.norm, any_missing(y) ? &mask : nullptr);
  const MeanPath path = filter_means(s, y, cfg);

  FilterResult r;
  r.variant = cfg.variant;
  r.states.reserve(static_cast<std::size_t>(T) + 1);
  r.states.push_back(initial_state(m));
  for (int t = 1; t <= T; ++t) {
    const auto k = static_cast<std::size_t>(t);
    const ScheduleStep& step = s.at(t);
    FilterState st;
    st.t = t;
    st.F = step.F;
    st.x_pred = path.x_pred[k];
    st.sigma_pred = step.sigma_pred;
    st.x_filt = path.x_filt[k];
    st.sigma_filt = step.gain.sigma_filt;
    st.K = step.gain.K;
    st.C = step.gain.C;
    st.observed = !step.observed.empty();
    st.dy = st.observed ? Vec(select_entries(y[k - 1], step.observed) - step.gain.Z * st.x_pred) : Vec::Zero(0);
    st.clipped = path.clipped[k];
    r.states.push_back(std::move(st));
  }
  return r;
}

FilterResult run_extended(const NonlinearSSM& m, const Observations& y, const FilterConfig& cfg) {
  require_clip_source(cfg);
  const int T = static_cast<int>(y.size());
  validate(Model(m), std::max(T, 1));
  FilterResult r;
  r.variant = cfg.variant;
  r.states.reserve(static_cast<std::size_t>(T) + 1);
  r.states.push_back(initial_state(m));
  for (int t = 1; t <= T; ++t) {
    const Vec& yt = y[static_cast<std::size_t>(t - 1)];
    check_observation(yt, m.q, t);
    const FilterState& prev = r.states.back();
    FilterState st;
    st.t = t;
    const Vec u = m.control_u(t);
    st.F = transition_jacobian_x(m, t, prev.x_filt, u, m.v_bar);
    const Mat B = transition_jacobian_v(m, t, prev.x_filt, u, m.v_bar);
    if (!st.F.allFinite() || !B.allFinite())
      throw NumericalError("transition Jacobian is not finite at t=" + std::to_string(t));
    st.x_pred = m.f(t, prev.x_filt, u, m.v_bar);
    st.sigma_pred = clamp_psd(st.F * prev.sigma_filt * st.F.transpose() + B * m.Q(t) * B.transpose(), "Sigma_{t|t-1}");

    const std::vector<int> rows = observed_rows(yt);
    if (rows.empty()) {
      st.observed = false;
      st.x_filt = st.x_pred;
      st.sigma_filt = st.sigma_pred;
      st.K = Mat::Zero(m.p, 0);
      st.C = Mat::Zero(0, 0);
      st.dy = Vec::Zero(0);
      r.states.push_back(std::move(st));
      continue;
    }
    const Vec w = m.control_w(t);
    const Mat Zfull = observation_jacobian_x(m, t, st.x_pred, w, m.eps_bar);
    const Mat D = observation_jacobian_eps(m, t, st.x_pred, w, m.eps_bar);
    if (!Zfull.allFinite() || !D.allFinite())
      throw NumericalError("observation Jacobian is not finite at t=" + std::to_string(t));
    const Mat Z = select_rows(Zfull, rows);
    const Mat V = select_block(D * m.V(t) * D.transpose(), rows);
    const Gain g = compute_gain(st.sigma_pred, Z, V);
    st.dy = select_entries(yt - m.z(t, st.x_pred, w, m.eps_bar), rows);
    const Increment inc = correction_increment(g, st.dy, cfg.variant, cfg.b.at(t), cfg.norm);
    st.x_filt = st.x_pred + inc.dx;
    st.clipped = inc.clipped;
    st.sigma_filt = g.sigma_filt;
    st.K = g.K;
    st.C = g.C;
    r.states.push_back(std::move(st));
  }
  return r;
}

}  // namespace

FilterResult run_filter(const Model& model, const Observations& y, const FilterConfig& cfg) {
  if (y.empty()) throw InvalidInput("run_filter: no observations");
  if (const auto* lin = std::get_if<LinearSSM>(&model)) return run_linear(*lin, y, cfg);
  return run_extended(std::get<NonlinearSSM>(model), y, cfg);
}

}  // namespace rkf
