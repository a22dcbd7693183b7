#include "oracles.hpp"
#include "rkf/contamination.hpp"
#include "rkf/filter.hpp"
#include "rkf/smoother.hpp"

#include <doctest.h>

using namespace rkf;

namespace {

double max_abs(const Mat& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("classical smoother equals the batch best linear predictor given all observations") {
  std::mt19937_64 gen(31337);
  double worst_mean = 0.0, worst_cov = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int T = std::uniform_int_distribution<int>(1, 10)(gen);
    const LinearSSM m = oracle::random_linear_model(gen, T);
    const oracle::JointMoments jm = oracle::joint_moments(m, T);
    const Vec w = oracle::joint_draw(jm, gen);
    Observations y;
    for (int t = 1; t <= T; ++t) y.push_back(w.segment(jm.y_off(t), jm.q));
    const SmootherResult sr = smooth(run_filter(m, y, {}));
    REQUIRE(sr.x_smooth.size() == static_cast<std::size_t>(T + 1));
    for (int t = 0; t <= T; ++t) {
      const oracle::Blp o = oracle::best_linear_predictor(jm, w, t, T);
      worst_mean = std::max(worst_mean, max_abs(sr.x_smooth[static_cast<std::size_t>(t)] - o.mean));
      worst_cov = std::max(worst_cov, max_abs(sr.sigma_smooth[static_cast<std::size_t>(t)] - o.cov));
    }
  }
  CHECK(worst_mean < 1e-8);
  CHECK(worst_cov < 1e-8);
}

TEST_CASE("smoothed value at T equals the filtered value") {
  const Model m = build_preset(Preset::SimB);
  const Trajectory tr = simulate_ideal(m, 50, 2);
  const FilterResult fr = run_filter(m, tr.y_real, {Variant::RlsIO, ClipHeights::fixed(0.3)});
  const SmootherResult sr = smooth(fr);
  CHECK(sr.x_smooth.back() == fr.at(50).x_filt);
  CHECK(sr.J.size() == 50);
}

TEST_CASE("smooth_means matches smooth for linear models") {
  for (Preset p : {Preset::SimA, Preset::SimB, Preset::AR2}) {
    const Model m = build_preset(p);
    ContaminationSpec spec;
    spec.r_ao = 0.1;
    spec.dist_ao = CauchyDist{0.0, 10.0};
    const Trajectory tr = simulate_contaminated(m, 40, spec, 6);
    const GainSchedule s = build_schedule(m, 40, NormKind::Euclidean);
    for (Variant v : {Variant::Classical, Variant::RlsAO, Variant::RlsIO}) {
      const FilterConfig cfg{v, v == Variant::Classical ? ClipHeights::infinite() : ClipHeights::fixed(0.5)};
      const SmootherResult sr = smooth(run_filter(m, tr.y_real, cfg));
      const std::vector<Vec> xs = smooth_means(s, filter_means(s, tr.y_real, cfg));
      REQUIRE(xs.size() == sr.x_smooth.size());
      for (std::size_t k = 0; k < xs.size(); ++k) CHECK(max_abs(xs[k] - sr.x_smooth[k]) < 1e-12);
    }
  }
}

TEST_CASE("smoother reduces error under the ideal model on SimA") {
  const Model m = build_preset(Preset::SimA);
  double ef = 0.0, es = 0.0;
  for (std::uint64_t seed = 0; seed < 2000; ++seed) {
    const Trajectory tr = simulate_ideal(m, 50, seed);
    const FilterResult fr = run_filter(m, tr.y_real, {});
    const SmootherResult sr = smooth(fr);
    ef += std::pow(fr.at(35).x_filt(0) - tr.x_real[34](0), 2);
    es += std::pow(sr.x_smooth[35](0) - tr.x_real[34](0), 2);
  }
  CHECK(es < ef);
  // Two-sided steady state smoother variance for F = Z = Q = V = 1 is 1 / sqrt 5.
  CHECK(es / 2000 == doctest::Approx(1.0 / std::sqrt(5.0)).epsilon(0.1));
}

TEST_CASE("smoother_gain with singular prediction covariance") {
  const Mat sf = Mat::Identity(2, 2);
  Mat sp = Mat::Zero(2, 2);
  sp(0, 0) = 2.0;
  const Mat J = smoother_gain(sf, Mat::Identity(2, 2), sp);
  CHECK(J(0, 0) == doctest::Approx(0.5));
  CHECK(J(1, 1) == 0.0);
}
