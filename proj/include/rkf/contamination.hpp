#pragma once

#include "rkf/linalg.hpp"
#include "rkf/model.hpp"
#include "rkf/rng.hpp"

#include <cstdint>
#include <variant>
#include <vector>

namespace rkf {

struct PointMass {
  Vec mu;  // size 1 broadcasts to every coordinate
};

struct GaussianDist {
  Vec mean;  // size 1 broadcasts
  Mat cov;
};

/// Coordinate-wise i.i.d. Cauchy(location, scale).
struct CauchyDist {
  double location = 0.0;
  double scale = 1.0;
};

/// center + S^{1/2} g / |h| with g ~ N(0, I), h ~ N(0, 1); singular shapes allowed.
struct MultivariateCauchy {
  Vec center;  // size 1 broadcasts
  Mat shape;
};

/// Piecewise-constant signal, geometric segment lengths with the given mean and
/// N(0, amplitude_scale^2) levels. Substitution decisions are made per segment.
struct BlockSignal {
  double mean_duration = 10.0;
  double amplitude_scale = 1.0;
};

using ContaminatingDist = std::variant<PointMass, GaussianDist, CauchyDist, MultivariateCauchy, BlockSignal>;

/// Substitutive AO contamination of observations with radius r_ao and
/// propagating IO contamination of states with radius r_io.
struct ContaminationSpec {
  double r_ao = 0.0;
  double r_io = 0.0;
  ContaminatingDist dist_ao = PointMass{Vec::Zero(1)};
  ContaminatingDist dist_io = PointMass{Vec::Zero(1)};
};

void validate(const ContaminationSpec& spec);

/// One draw of dimension `dim`; not valid for BlockSignal.
Vec draw(const ContaminatingDist& dist, Eigen::Index dim, Rng& rng);

/// Levels of a block signal over t = 1..T plus the segment each step belongs to.
struct BlockSequence {
  std::vector<double> values;
  std::vector<int> segment;
  int segments() const { return segment.empty() ? 0 : segment.back() + 1; }
};

BlockSequence block_sequence(int T, double mean_duration, double amplitude_scale, Rng& rng);
std::vector<double> block_signal(int T, double mean_duration, double amplitude_scale, std::uint64_t seed);

/// n draws from (1 - r) N(0, R) + r N(mu_c, R_c).
std::vector<Vec> draw_contaminated_normal(double r, const Mat& R, const Vec& mu_c, const Mat& R_c,
                                          std::size_t n, std::uint64_t seed);

/// Trajectory generator for a fixed model and horizon. Noise-covariance roots
/// are factored once, so repeated replications only draw and propagate.
///
/// The ideal twin and the contaminated trajectory consume the same innovation
/// and observation-error draws; indicators and contaminating values come from
/// separate streams. With both radii zero the two coincide exactly.
class Simulator {
 public:
  Simulator(Model model, int T);

  const Model& model() const { return model_; }
  int horizon() const { return T_; }

  Trajectory ideal(std::uint64_t seed) const;
  Trajectory contaminated(const ContaminationSpec& spec, std::uint64_t seed) const;

 private:
  Vec transition(int t, const Vec& x, const Vec& v) const;
  Vec observation(int t, const Vec& x, const Vec& e) const;

  Model model_;
  int T_;
  Mat q0_root_;
  std::vector<Mat> q_root_;  // index t-1
  std::vector<Mat> v_root_;
  std::vector<Mat> F_, Z_;   // cached for linear models
};

Trajectory simulate_contaminated(const Model& model, int T, const ContaminationSpec& spec, std::uint64_t seed);

}  // namespace rkf
