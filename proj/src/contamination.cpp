#include "rkf/contamination.hpp"

#include "rkf/error.hpp"

#include <cmath>
#include <string>

namespace rkf {

namespace {

Vec broadcast(const Vec& v, Eigen::Index dim, const char* what) {
  if (v.size() == dim) return v;
  if (v.size() == 1) return Vec::Constant(dim, v(0));
  throw DimensionMismatch(std::string(what) + ": expected " + std::to_string(dim) + " entries, got " +
                          std::to_string(v.size()));
}

void validate_dist(const ContaminatingDist& d, const char* which) {
  const std::string w(which);
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, PointMass>) {
          if (x.mu.size() == 0 || !x.mu.allFinite()) throw InvalidParameter(w + ": point mass needs a finite location");
        } else if constexpr (std::is_same_v<T, GaussianDist>) {
          require_psd(x.cov, w + " Gaussian covariance");
        } else if constexpr (std::is_same_v<T, CauchyDist>) {
          if (!(x.scale > 0.0) || !std::isfinite(x.location)) throw InvalidParameter(w + ": Cauchy scale must be > 0");
        } else if constexpr (std::is_same_v<T, MultivariateCauchy>) {
          require_psd(x.shape, w + " Cauchy shape");
        } else if constexpr (std::is_same_v<T, BlockSignal>) {
          if (!(x.mean_duration >= 1.0)) throw InvalidParameter(w + ": block mean duration must be >= 1");
          if (!(x.amplitude_scale >= 0.0)) throw InvalidParameter(w + ": block amplitude must be >= 0");
        }
      },
      d);
}

}  // namespace

void validate(const ContaminationSpec& spec) {
  if (!(spec.r_ao >= 0.0 && spec.r_ao <= 1.0)) throw InvalidParameter("r_ao must lie in [0, 1]");
  if (!(spec.r_io >= 0.0 && spec.r_io <= 1.0)) throw InvalidParameter("r_io must lie in [0, 1]");
  validate_dist(spec.dist_ao, "AO distribution");
  validate_dist(spec.dist_io, "IO distribution");
}

Vec draw(const ContaminatingDist& dist, Eigen::Index dim, Rng& rng) {
  return std::visit(
      [&](const auto& d) -> Vec {
        using T = std::decay_t<decltype(d)>;
        if constexpr (std::is_same_v<T, PointMass>) {
          return broadcast(d.mu, dim, "point mass");
        } else if constexpr (std::is_same_v<T, GaussianDist>) {
          if (d.cov.rows() != dim) throw DimensionMismatch("Gaussian contamination: covariance dimension");
          return broadcast(d.mean, dim, "Gaussian mean") + symmetric_sqrt(d.cov) * rng.gaussian(dim);
        } else if constexpr (std::is_same_v<T, CauchyDist>) {
          Vec out(dim);
          for (Eigen::Index i = 0; i < dim; ++i) out(i) = rng.cauchy(d.location, d.scale);
          return out;
        } else if constexpr (std::is_same_v<T, MultivariateCauchy>) {
          if (d.shape.rows() != dim) throw DimensionMismatch("multivariate Cauchy: shape dimension");
          const Vec g = symmetric_sqrt(d.shape) * rng.gaussian(dim);
          const double h = std::abs(rng.gaussian());
          return broadcast(d.center, dim, "Cauchy center") + g / h;
        } else {
          throw InvalidParameter("block signals are drawn as whole sequences");
        }
      },
      dist);
}

BlockSequence block_sequence(int T, double mean_duration, double amplitude_scale, Rng& rng) {
  if (!(mean_duration >= 1.0)) throw InvalidParameter("block signal: mean duration must be >= 1");
  BlockSequence out;
  out.values.reserve(static_cast<std::size_t>(std::max(T, 0)));
  out.segment.reserve(out.values.capacity());
  int seg = 0;
  while (static_cast<int>(out.values.size()) < T) {
    const long len = rng.geometric_trials(1.0 / mean_duration);
    const double level = amplitude_scale * rng.gaussian();
    for (long k = 0; k < len && static_cast<int>(out.values.size()) < T; ++k) {
      out.values.push_back(level);
      out.segment.push_back(seg);
    }
    ++seg;
  }
  return out;
}

std::vector<double> block_signal(int T, double mean_duration, double amplitude_scale, std::uint64_t seed) {
  Rng rng(seed, Stream::Sampling);
  return block_sequence(T, mean_duration, amplitude_scale, rng).values;
}

std::vector<Vec> draw_contaminated_normal(double r, const Mat& R, const Vec& mu_c, const Mat& R_c,
                                          std::size_t n, std::uint64_t seed) {
  if (!(r >= 0.0 && r <= 1.0)) throw InvalidParameter("contaminated normal: r must lie in [0, 1]");
  require_psd(R, "contaminated normal R");
  require_psd(R_c, "contaminated normal R_c");
  if (R.rows() != R_c.rows() || mu_c.size() != R.rows())
    throw DimensionMismatch("contaminated normal: inconsistent dimensions");
  const Mat root = symmetric_sqrt(R);
  const Mat root_c = symmetric_sqrt(R_c);
  Rng rng(seed, Stream::Sampling);
  std::vector<Vec> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (rng.bernoulli(r))
      out.push_back(mu_c + root_c * rng.gaussian(R.rows()));
    else
      out.push_back(root * rng.gaussian(R.rows()));
  }
  return out;
}

// ---------------------------------------------------------------------------

Simulator::Simulator(Model model, int T) : model_(std::move(model)), T_(T) {
  if (T < 1) throw InvalidParameter("horizon must be >= 1");
  validate(model_, T);
  q0_root_ = symmetric_sqrt(initial_cov(model_));
  q_root_.reserve(static_cast<std::size_t>(T));
  v_root_.reserve(static_cast<std::size_t>(T));
  std::visit(
      [&](const auto& m) {
        for (int t = 1; t <= T; ++t) {
          q_root_.push_back(symmetric_sqrt(m.Q(t)));
          v_root_.push_back(symmetric_sqrt(m.V(t)));
        }
      },
      model_);
  if (const auto* lin = std::get_if<LinearSSM>(&model_)) {
    for (int t = 1; t <= T; ++t) {
      F_.push_back(lin->F(t));
      Z_.push_back(lin->Z(t));
    }
  }
}

Vec Simulator::transition(int t, const Vec& x, const Vec& v) const {
  if (!F_.empty()) return F_[static_cast<std::size_t>(t - 1)] * x + v;
  const auto& m = std::get<NonlinearSSM>(model_);
  return m.f(t, x, m.control_u(t), v);
}

Vec Simulator::observation(int t, const Vec& x, const Vec& e) const {
  if (!Z_.empty()) return Z_[static_cast<std::size_t>(t - 1)] * x + e;
  const auto& m = std::get<NonlinearSSM>(model_);
  return m.z(t, x, m.control_w(t), e);
}

namespace {

struct NoiseMeans {
  Vec v_bar, eps_bar;
};

NoiseMeans noise_means(const Model& m) {
  if (const auto* nl = std::get_if<NonlinearSSM>(&m)) return {nl->v_bar, nl->eps_bar};
  return {Vec::Zero(state_dim(m)), Vec::Zero(obs_dim(m))};
}

}  // namespace

Trajectory Simulator::ideal(std::uint64_t seed) const {
  return contaminated(ContaminationSpec{}, seed);
}

Trajectory Simulator::contaminated(const ContaminationSpec& spec, std::uint64_t seed) const {
  validate(spec);
  const NoiseMeans means = noise_means(model_);
  const Eigen::Index p = state_dim(model_);
  const Eigen::Index q = obs_dim(model_);
  Rng noise(seed, Stream::Noise);
  Rng io_rng(seed, Stream::Innovation);
  Rng ao_rng(seed, Stream::Additive);

  // Block signals substitute whole segments.
  BlockSequence io_blocks, ao_blocks;
  std::vector<bool> io_seg_hit, ao_seg_hit;
  const auto prepare_blocks = [&](const ContaminatingDist& d, double r, Rng& rng, BlockSequence& seq,
                                  std::vector<bool>& hit) {
    if (const auto* b = std::get_if<BlockSignal>(&d); b && r > 0.0) {
      seq = block_sequence(T_, b->mean_duration, b->amplitude_scale, rng);
      for (int s = 0; s < seq.segments(); ++s) hit.push_back(rng.bernoulli(r));
    }
  };
  prepare_blocks(spec.dist_io, spec.r_io, io_rng, io_blocks, io_seg_hit);
  prepare_blocks(spec.dist_ao, spec.r_ao, ao_rng, ao_blocks, ao_seg_hit);

  Trajectory tr;
  tr.T = T_;
  tr.x0_ideal = initial_mean(model_) + q0_root_ * noise.gaussian(p);
  tr.x0_real = tr.x0_ideal;
  const auto n = static_cast<std::size_t>(T_);
  tr.x_ideal.reserve(n);
  tr.y_ideal.reserve(n);
  tr.x_real.reserve(n);
  tr.y_real.reserve(n);
  tr.io_hits.reserve(n);
  tr.ao_hits.reserve(n);

  Vec x_id = tr.x0_ideal;
  Vec x_re = tr.x0_real;
  for (int t = 1; t <= T_; ++t) {
    const auto k = static_cast<std::size_t>(t - 1);
    const Mat& qr = q_root_[k];
    const Mat& vr = v_root_[k];
    const Vec v = means.v_bar + qr * noise.gaussian(qr.cols());
    const Vec e = means.eps_bar + vr * noise.gaussian(vr.cols());

    x_id = transition(t, x_id, v);
    Vec y_id = observation(t, x_id, e);

    // State layer: X~ = f(X_re), X_re = (1-U~) X~ + U~ X_di, Y = z(X_re, (1-U~) eps).
    Vec x_tilde = transition(t, x_re, v);
    bool io_hit = false;
    if (!io_seg_hit.empty()) {
      io_hit = io_seg_hit[static_cast<std::size_t>(io_blocks.segment[k])];
      if (io_hit) x_re = Vec::Constant(p, io_blocks.values[k]);
    } else {
      io_hit = io_rng.bernoulli(spec.r_io);
      if (io_hit) x_re = draw(spec.dist_io, p, io_rng);
    }
    if (!io_hit) x_re = std::move(x_tilde);
    Vec y_re = observation(t, x_re, io_hit ? Vec(0.0 * e) : e);

    // Observation layer: Y_re = (1-U) Y + U Y_di.
    bool ao_hit = false;
    if (!ao_seg_hit.empty()) {
      ao_hit = ao_seg_hit[static_cast<std::size_t>(ao_blocks.segment[k])];
      if (ao_hit) y_re = Vec::Constant(q, ao_blocks.values[k]);
    } else {
      ao_hit = ao_rng.bernoulli(spec.r_ao);
      if (ao_hit) y_re = draw(spec.dist_ao, q, ao_rng);
    }

    tr.x_ideal.push_back(x_id);
    tr.y_ideal.push_back(std::move(y_id));
    tr.x_real.push_back(x_re);
    tr.y_real.push_back(std::move(y_re));
    tr.io_hits.push_back(io_hit);
    tr.ao_hits.push_back(ao_hit);
  }
  return tr;
}

Trajectory simulate_contaminated(const Model& model, int T, const ContaminationSpec& spec, std::uint64_t seed) {
  return Simulator(model, T).contaminated(spec, seed);
}

}  // namespace rkf
