#include "rkf/study.hpp"

#include "rkf/error.hpp"
#include "rkf/rng.hpp"
#include "rkf/smoother.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace rkf {

std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::Ideal: return "ideal";
    case Regime::AO: return "ao";
    case Regime::IO: return "io";
    case Regime::Block: return "block";
  }
  return "?";
}

Regime parse_regime(std::string_view name) {
  if (name == "ideal" || name == "id") return Regime::Ideal;
  if (name == "ao") return Regime::AO;
  if (name == "io") return Regime::IO;
  if (name == "block" || name == "blocksignal") return Regime::Block;
  throw InvalidParameter("unknown regime '" + std::string(name) + "'");
}

std::string_view stage_name(Stage s) { return s == Stage::Filter ? "filter" : "smoother"; }

Stage parse_stage(std::string_view name) {
  if (name == "filter") return Stage::Filter;
  if (name == "smoother") return Stage::Smoother;
  throw InvalidParameter("unknown stage '" + std::string(name) + "'");
}

const ContaminationSpec* Scenario::contamination(Regime r) const {
  switch (r) {
    case Regime::Ideal: return nullptr;
    case Regime::AO: return &ao;
    case Regime::IO: return &io;
    case Regime::Block: return &block;
  }
  return nullptr;
}

void validate(const Scenario& s) {
  if (s.runs < 1) throw InvalidParameter("scenario needs runs >= 1");
  if (s.horizon < 1) throw InvalidParameter("scenario needs horizon >= 1");
  if (s.score_time < 1 || s.score_time > s.horizon) throw InvalidParameter("score time must lie in [1, T]");
  if (s.regimes.empty()) throw InvalidParameter("scenario has no regimes");
  if (s.variants.empty()) throw InvalidParameter("scenario has no variants");
  for (std::size_t i = 0; i < s.regimes.size(); ++i)
    for (std::size_t j = i + 1; j < s.regimes.size(); ++j)
      if (s.regimes[i] == s.regimes[j]) throw InvalidParameter("duplicate regime in scenario");
  for (std::size_t i = 0; i < s.variants.size(); ++i)
    for (std::size_t j = i + 1; j < s.variants.size(); ++j)
      if (s.variants[i] == s.variants[j]) throw InvalidParameter("duplicate variant in scenario");
  if (s.fixed_b && (std::isnan(*s.fixed_b) || *s.fixed_b <= 0.0))
    throw InvalidParameter("fixed clipping height must be > 0");
  validate(s.model, s.horizon);
  for (Regime r : s.regimes)
    if (const ContaminationSpec* c = s.contamination(r)) validate(*c);
}

Scenario preset_scenario(Preset p) {
  Scenario s;
  s.name = std::string(preset_name(p));
  s.model = build_preset(p);
  s.horizon = preset_horizon(p);
  s.score_time = std::min(35, s.horizon);
  const int dim = state_dim(s.model);
  s.block = {.r_io = 0.1, .dist_io = BlockSignal{10.0, 10.0}};
  switch (p) {
    case Preset::SimA:
      s.ao = {.r_ao = 0.1, .dist_ao = CauchyDist{5.0, 1.0}};
      s.io = {.r_io = 0.1, .dist_io = CauchyDist{-10.0, 1.0}};
      break;
    case Preset::SimB: {
      const auto& m = std::get<LinearSSM>(s.model);
      s.ao = {.r_ao = 0.1, .dist_ao = CauchyDist{0.0, 1e-3}};
      s.io = {.r_io = 0.1, .dist_io = MultivariateCauchy{Vec::Zero(1), m.Q(1)}};
      break;
    }
    case Preset::RandomWalk2D: {
      const Vec mu = (Vec(2) << 25.0, 30.0).finished();
      const Mat rc = Mat::Identity(2, 2) * 0.9;
      s.ao = {.r_ao = 0.1, .dist_ao = GaussianDist{mu, rc}};
      s.io = {.r_io = 0.1, .dist_io = GaussianDist{mu, rc}};
      s.score_time = 50;
      break;
    }
    case Preset::AR2: {
      Mat rc = Mat::Zero(2, 2);
      rc(0, 0) = 0.1;
      s.ao = {.r_ao = 0.1, .dist_ao = GaussianDist{Vec::Constant(1, 10.0), Mat::Constant(1, 1, 0.1)}};
      s.io = {.r_io = 0.1, .dist_io = GaussianDist{(Vec(2) << 30.0, 0.0).finished(), rc}};
      s.score_time = 50;
      break;
    }
    case Preset::M1:
    case Preset::M2:
    case Preset::M3: {
      Mat shape = Mat::Zero(dim, dim);
      std::visit([&](const auto& m) { shape = m.Q(1); }, s.model);
      s.ao = {.r_ao = 0.1, .dist_ao = CauchyDist{0.0, 10.0}};
      s.io = {.r_io = 0.1, .dist_io = MultivariateCauchy{Vec::Zero(1), shape}};
      s.score_time = 250;
      s.runs = 1000;
      break;
    }
  }
  return s;
}

const CellStats& StudyReport::cell(Regime r, Variant v, Stage s) const {
  for (const CellStats& c : cells)
    if (c.regime == r && c.variant == v && c.stage == s) return c;
  throw InvalidParameter("report has no cell " + std::string(regime_name(r)) + "/" + std::string(variant_name(v)) +
                         "/" + std::string(stage_name(s)));
}

double compensated_sum(const std::vector<double>& x) {
  double sum = 0.0, c = 0.0;
  for (double v : x) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      c += (sum - t) + v;
    else
      c += (v - t) + sum;
    sum = t;
  }
  return sum + c;
}

namespace {

double quantile_sorted(const std::vector<double>& x, double level) {
  const double h = (static_cast<double>(x.size()) - 1.0) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

}  // namespace

double sample_quantile(std::vector<double> x, double level) {
  if (x.empty()) throw InvalidInput("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  return quantile_sorted(x, level);
}

ClipHeights study_heights(const Scenario& s, Variant v, ClipInfo* info) {
  if (v == Variant::Classical) return ClipHeights::infinite();
  if (s.fixed_b) {
    if (info) *info = {v, *s.fixed_b, {*s.fixed_b}, 0};
    return ClipHeights::fixed(*s.fixed_b);
  }
  const CalibrationOptions opt{.mc_size = s.calibration_mc,
                               .steady_mc_size = s.calibration_steady_mc,
                               .seed = s.calibration_seed,
                               .norm = s.norm};
  const CalibrationTable table = calibrate(s.model, v, s.criterion, s.horizon, opt);
  if (info) *info = {v, table.at(s.score_time), table.b, table.steady_state_index};
  return table.heights();
}

namespace {

struct Layout {
  std::vector<Regime> regimes;
  std::vector<Variant> variants;
  std::size_t cells() const { return regimes.size() * variants.size() * 2; }
  std::size_t index(std::size_t r, std::size_t v, Stage s) const {
    return (r * variants.size() + v) * 2 + (s == Stage::Filter ? 0 : 1);
  }
};

StudyReport run_impl(const Scenario& s, bool parallel) {
  validate(s);
  const Layout layout{s.regimes, s.variants};
  const int p = state_dim(s.model);
  const auto runs = static_cast<std::size_t>(s.runs);
  const auto tstar = static_cast<std::size_t>(s.score_time);
  const bool linear = std::holds_alternative<LinearSSM>(s.model);

  StudyReport rep;
  rep.scenario = s.name;
  rep.runs = s.runs;
  rep.horizon = s.horizon;
  rep.score_time = s.score_time;
  rep.state_dim = p;
  rep.seed = s.seed;

  std::vector<FilterConfig> cfg;
  for (Variant v : s.variants) {
    ClipInfo info;
    FilterConfig c{v, study_heights(s, v, &info), s.norm};
    if (v != Variant::Classical) rep.clipping.push_back(info);
    cfg.push_back(std::move(c));
  }

  const GainSchedule sched = build_schedule(s.model, s.horizon, s.norm);
  const ScheduleStep& at_star = sched.at(s.score_time);
  const SemiNorm dnorm = at_star.observed.empty() ? SemiNorm(Mat::Zero(p, p))
                                                  : observable_seminorm(at_star.gain.Z, at_star.sigma_pred);
  for (const ClipInfo& ci : rep.clipping) {
    if (ci.variant != Variant::RlsIO || at_star.observed.empty()) continue;
    const Mat& Z = at_star.gain.Z;
    const Mat B = symmetrize(Z * at_star.sigma_pred * Z.transpose());
    const double b2 = ci.b_score_time * ci.b_score_time;
    rep.io_dnorm_bound =
        std::isinf(b2) ? kInf : 2.0 * (pseudo_inverse(B) * (at_star.gain.V + b2 * Mat::Identity(Z.rows(), Z.rows()))).trace();
  }

  const Simulator sim(s.model, s.horizon);
  std::vector<std::vector<double>> err(layout.cells(), std::vector<double>(runs * static_cast<std::size_t>(p)));
  std::vector<std::string> failures(runs);

#pragma omp parallel for schedule(dynamic, 16) if (parallel)
  for (std::size_t run = 0; run < runs; ++run) {
    try {
      const std::uint64_t seed = derive_seed(s.seed, static_cast<std::uint64_t>(run));
      for (std::size_t ri = 0; ri < layout.regimes.size(); ++ri) {
        const ContaminationSpec* spec = s.contamination(layout.regimes[ri]);
        const Trajectory tr = spec ? sim.contaminated(*spec, seed) : sim.ideal(seed);
        const Vec& target = tr.x_real[tstar - 1];
        for (std::size_t vi = 0; vi < layout.variants.size(); ++vi) {
          Vec xf, xs;
          if (linear) {
            const MeanPath path = filter_means(sched, tr.y_real, cfg[vi]);
            const std::vector<Vec> sm = smooth_means(sched, path);
            xf = path.x_filt[tstar];
            xs = sm[tstar];
          } else {
            const FilterResult fr = run_filter(s.model, tr.y_real, cfg[vi]);
            const SmootherResult sm = smooth(fr);
            xf = fr.at(s.score_time).x_filt;
            xs = sm.x_smooth[tstar];
          }
          const auto off = run * static_cast<std::size_t>(p);
          auto& ef = err[layout.index(ri, vi, Stage::Filter)];
          auto& es = err[layout.index(ri, vi, Stage::Smoother)];
          for (int i = 0; i < p; ++i) {
            ef[off + static_cast<std::size_t>(i)] = xf(i) - target(i);
            es[off + static_cast<std::size_t>(i)] = xs(i) - target(i);
          }
        }
      }
    } catch (const std::exception& e) {
      failures[run] = e.what();
    }
  }
  for (std::size_t run = 0; run < runs; ++run)
    if (!failures[run].empty())
      throw NumericalError("replication " + std::to_string(run) + " failed: " + failures[run]);

  // Aggregation in replication order.
  const double n = static_cast<double>(runs);
  for (std::size_t ri = 0; ri < layout.regimes.size(); ++ri) {
    for (std::size_t vi = 0; vi < layout.variants.size(); ++vi) {
      for (Stage st : {Stage::Filter, Stage::Smoother}) {
        const std::vector<double>& e = err[layout.index(ri, vi, st)];
        CellStats c;
        c.regime = layout.regimes[ri];
        c.variant = layout.variants[vi];
        c.stage = st;
        c.sq_error.resize(runs);
        c.dnorm_sq.resize(runs);
        c.coord_error = e;
        for (std::size_t run = 0; run < runs; ++run) {
          const Eigen::Map<const Vec> d(e.data() + run * static_cast<std::size_t>(p), p);
          c.sq_error[run] = d.squaredNorm();
          c.dnorm_sq[run] = dnorm.squared(d);
        }
        c.mse = compensated_sum(c.sq_error) / n;
        c.mse_dnorm = compensated_sum(c.dnorm_sq) / n;
        if (runs > 1) {
          std::vector<double> dev(runs);
          for (std::size_t run = 0; run < runs; ++run) dev[run] = (c.sq_error[run] - c.mse) * (c.sq_error[run] - c.mse);
          c.mse_se = std::sqrt(compensated_sum(dev) / (n - 1.0) / n);
        }
        std::vector<double> coord(runs), sq(runs);
        for (int i = 0; i < p; ++i) {
          for (std::size_t run = 0; run < runs; ++run) {
            coord[run] = e[run * static_cast<std::size_t>(p) + static_cast<std::size_t>(i)];
            sq[run] = coord[run] * coord[run];
          }
          c.coord_mse.push_back(compensated_sum(sq) / n);
          std::array<double, 5> q{};
          std::sort(coord.begin(), coord.end());
          for (std::size_t k = 0; k < kQuantileLevels.size(); ++k) q[k] = quantile_sorted(coord, kQuantileLevels[k]);
          c.coord_quantiles.push_back(q);
        }
        rep.cells.push_back(std::move(c));
      }
    }
  }
  return rep;
}

}  // namespace

StudyReport run_study(const Scenario& s) { return run_impl(s, true); }

StudyReport run_study_serial(const Scenario& s) { return run_impl(s, false); }

}  // namespace rkf
