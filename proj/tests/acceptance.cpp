// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "oracles.hpp"
#include "rkf/calibration.hpp"
#include "rkf/cli.hpp"
#include "rkf/contamination.hpp"
#include "rkf/filter.hpp"
#include "rkf/io.hpp"
#include "rkf/linalg.hpp"
#include "rkf/smoother.hpp"
#include "rkf/study.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace rkf;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [violated]");
  }
};

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

double max_abs(const Mat& a) { return a.size() ? a.cwiseAbs().maxCoeff() : 0.0; }

Observations observations_from(const oracle::JointMoments& jm, const Vec& w) {
  Observations y;
  for (int t = 1; t <= jm.T; ++t) y.push_back(w.segment(jm.y_off(t), jm.q));
  return y;
}

double mse(const StudyReport& r, Regime g, Variant v, Stage s = Stage::Filter) { return r.cell(g, v, s).mse; }

// 1 -------------------------------------------------------------------------
Outcome riccati_ideal_mse() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  Scenario s = preset_scenario(Preset::SimA);
  s.seed = 42;
  s.regimes = {Regime::Ideal};
  s.variants = {Variant::Classical};
  const StudyReport r = run_study(s);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double theory = oracle::sima_steady_filter_variance();
  const double m = mse(r, Regime::Ideal, Variant::Classical);
  o.require(std::abs(m - theory) <= 0.05, "MSE " + fmt("%.4f", m) + " vs theory " + fmt("%.4f", theory));
  o.require(secs < 30.0, "runtime " + fmt("%.2f", secs) + " s");
  return o;
}

// 2 -------------------------------------------------------------------------
Outcome batch_oracle() {
  Outcome o;
  std::mt19937_64 gen(1001);
  double worst = 0.0;
  int rank_def = 0, singular = 0;
  for (int i = 0; i < 100; ++i) {
    const int T = std::uniform_int_distribution<int>(1, 10)(gen);
    const LinearSSM m = oracle::random_linear_model(gen, T);
    Eigen::JacobiSVD<Mat> zs(m.Z(1));
    rank_def += zs.rank() < std::min(m.p, m.q);
    singular += Eigen::FullPivLU<Mat>(m.Q(1)).rank() < m.p || Eigen::FullPivLU<Mat>(m.V(1)).rank() < m.q;
    const oracle::JointMoments jm = oracle::joint_moments(m, T);
    const Vec w = oracle::joint_draw(jm, gen);
    const FilterResult fr = run_filter(m, observations_from(jm, w), {});
    const SmootherResult sr = smooth(fr);
    for (int t = 1; t <= T; ++t) {
      const oracle::Blp f = oracle::best_linear_predictor(jm, w, t, t);
      worst = std::max({worst, max_abs(fr.at(t).x_filt - f.mean), max_abs(fr.at(t).sigma_filt - f.cov)});
    }
    for (int t = 0; t <= T; ++t) {
      const oracle::Blp sm = oracle::best_linear_predictor(jm, w, t, T);
      const auto k = static_cast<std::size_t>(t);
      worst = std::max({worst, max_abs(sr.x_smooth[k] - sm.mean), max_abs(sr.sigma_smooth[k] - sm.cov)});
    }
  }
  o.require(worst < 1e-8, "max deviation " + fmt("%.2e", worst));
  o.require(rank_def > 0 && singular > 0, std::to_string(rank_def) + " rank-deficient Z, " + std::to_string(singular) +
                                              " singular Q/V");
  return o;
}

// 3 -------------------------------------------------------------------------
Outcome collapse() {
  Outcome o;
  std::mt19937_64 gen(2002);
  double worst = 0.0;
  int rank_def = 0;
  for (int i = 0; i < 100; ++i) {
    const int T = std::uniform_int_distribution<int>(1, 10)(gen);
    const LinearSSM m = oracle::random_linear_model(gen, T);
    rank_def += Eigen::JacobiSVD<Mat>(m.Z(1)).rank() < std::min(m.p, m.q);
    const oracle::JointMoments jm = oracle::joint_moments(m, T);
    const Observations y = observations_from(jm, oracle::joint_draw(jm, gen));
    const FilterResult kf = run_filter(m, y, {});
    for (Variant v : {Variant::RlsAO, Variant::RlsIO}) {
      const FilterResult r = run_filter(m, y, {v, ClipHeights::infinite()});
      for (int t = 1; t <= T; ++t)
        worst = std::max({worst, max_abs(r.at(t).x_filt - kf.at(t).x_filt),
                          max_abs(r.at(t).sigma_filt - kf.at(t).sigma_filt)});
    }
  }
  o.require(worst < 1e-10, "max deviation " + fmt("%.2e", worst));
  o.require(rank_def > 0, std::to_string(rank_def) + " rank-deficient Z");
  return o;
}

// 4 -------------------------------------------------------------------------
Outcome identity_suite() {
  Outcome o;
  std::mt19937_64 gen(3003);
  std::uniform_int_distribution<int> dim(1, 4);
  double worst = 0.0, penrose = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int p = dim(gen), q = dim(gen);
    const Mat sigma = oracle::random_psd(gen, p, std::uniform_int_distribution<int>(0, p)(gen));
    const Mat z = oracle::random_rank(gen, q, p, std::uniform_int_distribution<int>(0, std::min(p, q))(gen));
    const Mat v = oracle::random_psd(gen, q, std::uniform_int_distribution<int>(0, q)(gen));
    const GenInvBundle g = gen_inverse_bundle(z, sigma);
    const Gain gain = compute_gain(sigma, z, v);
    worst = std::max({worst, max_abs(sigma * z.transpose() * g.pi_bar), max_abs(g.z_sigma * z * gain.K - gain.K)});
    const Mat a = oracle::random_rank(gen, q, p, std::uniform_int_distribution<int>(0, std::min(p, q))(gen), 0.1, 10.0);
    penrose = std::max(penrose, penrose_residuals(a, pseudo_inverse(a)).max());
  }
  o.require(worst < 1e-8, "identity residual " + fmt("%.2e", worst));
  o.require(penrose < 1e-8, "Penrose residual " + fmt("%.2e", penrose));
  return o;
}

// 5 -------------------------------------------------------------------------
Outcome calibration_consistency() {
  Outcome o;
  struct Case {
    Preset p;
    int T;
    Variant v;
  };
  // SimB reaches steady state after t = 50, hence the longer horizon.
  for (const Case& k : {Case{Preset::SimA, 50, Variant::RlsAO}, Case{Preset::SimA, 50, Variant::RlsIO},
                        Case{Preset::SimB, 80, Variant::RlsAO}, Case{Preset::SimB, 80, Variant::RlsIO}}) {
    const Model m = build_preset(k.p);
    CalibrationOptions opt;
    opt.steady_mc_size = 4'000'000;
    const CalibrationTable tab = calibrate_radius(m, k.v, 0.1, k.T, opt);
    const std::string tag = std::string(preset_name(k.p)) + "/" + std::string(variant_name(k.v));
    if (tab.steady_state_index == 0) {
      o.require(false, tag + " never reached steady state");
      continue;
    }
    const GainSchedule s = build_schedule(m, k.T, NormKind::Euclidean);
    const Mat cov = clipped_covariance(s.at(tab.steady_state_index).gain, k.v);
    const CriterionResidual res = radius_residual(cov, 0.1, tab.at(k.T), 1'000'000, 0xACCE5);
    o.require(std::abs(res.residual) <= 3.0 * res.std_error,
              tag + " residual/se " + fmt("%.2f", res.residual / res.std_error));
  }
  double worst = 0.0;
  for (double r : {0.05, 0.1, 0.25, 0.5}) {
    const double b = solve_radius(Mat::Identity(1, 1), r, 10'000'000, 17).b;
    worst = std::max(worst, std::abs(b - oracle::radius_clip_univariate(r)));
  }
  o.require(worst < 1e-3, "closed-form |b - b_exact| " + fmt("%.1e", worst));
  return o;
}

// 6 -------------------------------------------------------------------------
Outcome sima_orderings() {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  Scenario s = preset_scenario(Preset::SimA);
  s.seed = 42;
  const StudyReport r = run_study(s);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double ao_ao = mse(r, Regime::AO, Variant::RlsAO), ao_cl = mse(r, Regime::AO, Variant::Classical),
               ao_io = mse(r, Regime::AO, Variant::RlsIO);
  o.require(ao_ao < ao_cl && ao_cl < ao_io,
            "AO: rls-ao " + fmt("%.3g", ao_ao) + " < classical " + fmt("%.3g", ao_cl) + " < rls-io " + fmt("%.3g", ao_io));
  const double io_io = mse(r, Regime::IO, Variant::RlsIO), io_cl = mse(r, Regime::IO, Variant::Classical),
               io_ao = mse(r, Regime::IO, Variant::RlsAO);
  o.require(io_io < 1.5 && io_cl > 10.0 && io_ao > 100.0,
            "IO: rls-io " + fmt("%.3g", io_io) + ", classical " + fmt("%.3g", io_cl) + ", rls-ao " + fmt("%.3g", io_ao));
  bool smoother_better = true;
  for (Regime g : {Regime::Ideal, Regime::AO})
    for (Variant v : s.variants)
      smoother_better = smoother_better && mse(r, g, v, Stage::Smoother) < mse(r, g, v, Stage::Filter);
  o.require(smoother_better, "smoother < filter in ideal and AO rows");
  o.require(secs < 300.0, "runtime " + fmt("%.1f", secs) + " s");
  return o;
}

// 7 -------------------------------------------------------------------------
Outcome simb_orderings() {
  Outcome o;
  Scenario s = preset_scenario(Preset::SimB);
  s.seed = 42;
  const StudyReport r = run_study(s);
  const double ao_ao = mse(r, Regime::AO, Variant::RlsAO), ao_cl = mse(r, Regime::AO, Variant::Classical),
               ao_io = mse(r, Regime::AO, Variant::RlsIO);
  o.require(ao_ao < ao_cl && ao_cl < ao_io,
            "AO: rls-ao " + fmt("%.3g", ao_ao) + " < classical " + fmt("%.3g", ao_cl) + " < rls-io " + fmt("%.3g", ao_io));
  const double io_io = mse(r, Regime::IO, Variant::RlsIO), io_cl = mse(r, Regime::IO, Variant::Classical),
               io_ao = mse(r, Regime::IO, Variant::RlsAO);
  o.require(io_io < io_cl && io_cl < io_ao,
            "IO: rls-io " + fmt("%.3g", io_io) + " < classical " + fmt("%.3g", io_cl) + " < rls-ao " + fmt("%.3g", io_ao));
  // Coordinate 2 spans the kernel of Z.
  double worst_ratio = kInf;
  for (Variant v : s.variants)
    for (Stage st : {Stage::Filter, Stage::Smoother}) {
      const double ideal = r.cell(Regime::Ideal, v, st).coord_mse[1];
      const double io = r.cell(Regime::IO, v, st).coord_mse[1];
      worst_ratio = std::min(worst_ratio, io / ideal);
    }
  o.require(worst_ratio >= 10.0, "kernel coordinate IO/ideal MSE ratio >= " + fmt("%.3g", worst_ratio));
  return o;
}

// 8 -------------------------------------------------------------------------
Outcome dnorm_bound() {
  Outcome o;
  Scenario s = preset_scenario(Preset::SimB);
  s.seed = 42;
  s.regimes = {Regime::IO};
  s.variants = {Variant::RlsIO};
  s.io = {.r_io = 0.1, .dist_io = PointMass{Vec::Constant(1, 1e6)}};
  const StudyReport r = run_study(s);
  const CellStats& c = r.cell(Regime::IO, Variant::RlsIO, Stage::Filter);
  o.require(std::isfinite(r.io_dnorm_bound) && c.mse_dnorm <= r.io_dnorm_bound,
            "D-semi-norm MSE " + fmt("%.4g", c.mse_dnorm) + " <= bound " + fmt("%.4g", r.io_dnorm_bound) +
                " (b=" + fmt("%.4g", r.clipping.front().b_score_time) + ")");
  o.detail += "; Euclidean MSE " + fmt("%.4g", c.mse);
  return o;
}

// 9 -------------------------------------------------------------------------
bool is_psd(const Mat& s) {
  if (!s.allFinite()) return false;
  const double scale = std::max(1.0, s.cwiseAbs().maxCoeff());
  if (max_abs(s - s.transpose()) > 1e-9 * scale) return false;
  return Eigen::SelfAdjointEigenSolver<Mat>(0.5 * (s + s.transpose())).eigenvalues().minCoeff() >= -1e-9 * scale;
}

Outcome ekf_consistency() {
  Outcome o;
  std::mt19937_64 gen(9009);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const LinearSSM m = oracle::random_linear_model(gen, 10);
    const Trajectory tr = simulate_ideal(m, 10, static_cast<std::uint64_t>(i));
    const NonlinearSSM nl = wrap_linear(m);
    for (Variant v : {Variant::Classical, Variant::RlsAO, Variant::RlsIO}) {
      const FilterConfig cfg{v, v == Variant::Classical ? ClipHeights::infinite() : ClipHeights::fixed(0.5)};
      const FilterResult a = run_filter(m, tr.y_real, cfg), b = run_filter(nl, tr.y_real, cfg);
      for (int t = 1; t <= 10; ++t)
        worst = std::max({worst, max_abs(a.at(t).x_filt - b.at(t).x_filt), max_abs(a.at(t).sigma_filt - b.at(t).sigma_filt),
                          max_abs(a.at(t).sigma_pred - b.at(t).sigma_pred)});
    }
  }
  o.require(worst <= 1e-12, "EKF vs KF max deviation " + fmt("%.2e", worst));

  const int T = 10000;
  const Model m3 = build_preset(Preset::M3);
  const Trajectory tr = simulate_ideal(m3, T, 42);
  int bad = 0;
  for (Variant v : {Variant::Classical, Variant::RlsAO, Variant::RlsIO}) {
    const FilterConfig cfg{v, v == Variant::Classical ? ClipHeights::infinite() : ClipHeights::fixed(5.0)};
    const FilterResult fr = run_filter(m3, tr.y_real, cfg);
    for (int t = 1; t <= T; ++t)
      bad += !is_psd(fr.at(t).sigma_pred) || !is_psd(fr.at(t).sigma_filt) || !fr.at(t).x_filt.allFinite();
  }
  o.require(bad == 0, "M3 " + std::to_string(T) + " steps x 3 variants, " + std::to_string(bad) + " non-PSD steps");
  double jac = 0.0;
  const auto& nl = std::get<NonlinearSSM>(m3);
  for (int t = 1; t <= T; t += 97)
    jac = std::max(jac, jacobian_check(nl, tr.x_real[static_cast<std::size_t>(t - 1)], t).max_deviation());
  o.require(jac < 1e-4, "Jacobian vs finite differences " + fmt("%.2e", jac));
  return o;
}

// 10 ------------------------------------------------------------------------
std::string bench_output(int threads, const std::vector<std::string>& extra) {
  std::vector<std::string> args{"rkf", "bench", "--threads", std::to_string(threads)};
  args.insert(args.end(), extra.begin(), extra.end());
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return code == kExitOk ? out.str() : "exit " + std::to_string(code) + ": " + err.str();
}

Outcome determinism() {
  Outcome o;
  const int max_threads = std::max(4, omp_get_num_procs());
  for (const char* preset : {"sima", "simb"}) {
    const std::vector<std::string> args{"--preset", preset, "--runs", "2000", "--seed", "7"};
    const std::string one = bench_output(1, args);
    const std::string again = bench_output(1, args);
    const std::string many = bench_output(max_threads, args);
    o.require(one == again && one == many && one.rfind("scenario,", 0) == 0,
              std::string(preset) + " CSV identical for 1/1/" + std::to_string(max_threads) + " threads (" +
                  std::to_string(one.size()) + " bytes)");
  }
  const auto dir = std::filesystem::temp_directory_path();
  const std::string a = (dir / "rkf_accept_a.csv").string(), b = (dir / "rkf_accept_b.csv").string();
  bench_output(1, {"--preset", "sima", "--runs", "500", "--seed", "3", "--out", a});
  bench_output(max_threads, {"--preset", "sima", "--runs", "500", "--seed", "3", "--out", b});
  const bool same = std::filesystem::exists(a) && read_file(a) == read_file(b) &&
                    read_file(a + ".raw.csv") == read_file(b + ".raw.csv");
  o.require(same, "exported report and raw companion identical");
  for (const auto& p : {a, b, a + ".raw.csv", b + ".raw.csv"}) std::filesystem::remove(p);
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"ideal-MSE Riccati check", riccati_ideal_mse},
      {"batch best-linear-predictor equivalence", batch_oracle},
      {"b = inf collapse", collapse},
      {"generalized-inverse identities and Penrose axioms", identity_suite},
      {"calibration self-consistency", calibration_consistency},
      {"SimA orderings", sima_orderings},
      {"SimB orderings and kernel coordinate", simb_orderings},
      {"IO D-semi-norm boundedness", dnorm_bound},
      {"EKF consistency and M3 long run", ekf_consistency},
      {"bench determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !o.pass;
    std::printf("CRITERION %zu %s: %s (%s) [%.1f s]\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
