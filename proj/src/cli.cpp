#include "rkf/cli.hpp"

#include "rkf/calibration.hpp"
#include "rkf/config.hpp"
#include "rkf/contamination.hpp"
#include "rkf/error.hpp"
#include "rkf/filter.hpp"
#include "rkf/io.hpp"
#include "rkf/smoother.hpp"
#include "rkf/study.hpp"

#include <CLI11.hpp>
#include <omp.h>

#include <chrono>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>

namespace rkf {

namespace {

struct Options {
  std::string config;
  std::string preset;
  std::string out;
  std::string obs_out;
  std::string in;
  std::string variant;
  std::string criterion;
  std::string norm;
  std::string regime = "ideal";
  std::string format = "csv";
  std::optional<double> b, r, delta;
  std::optional<std::uint64_t> seed;
  std::optional<int> runs, T;
  std::optional<std::size_t> mc;
  int threads = 0;
  bool verbose = false;
};

// Thrown for anything wrong with the invocation or config before any work starts.
struct SetupError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Config resolve_config(const Options& o) {
  if (!o.config.empty() && !o.preset.empty()) throw SetupError("give either --config or --preset, not both");
  Config c;
  try {
    if (!o.config.empty())
      c = load_config(o.config);
    else if (!o.preset.empty())
      c = preset_config(parse_preset(o.preset));
    else
      throw SetupError("a model is required: pass --config FILE or --preset NAME");

    if (o.seed) {
      c.seed = *o.seed;
      c.scenario.seed = *o.seed;
    }
    if (o.T) {
      if (*o.T < 1) throw SetupError("--T must be >= 1");
      c.horizon = *o.T;
      c.scenario.horizon = *o.T;
      c.scenario.score_time = std::min(c.scenario.score_time, *o.T);
    }
    if (o.runs) c.scenario.runs = *o.runs;
    if (!o.variant.empty()) c.variant = parse_variant(o.variant);
    if (!o.norm.empty()) {
      c.norm = parse_norm(o.norm);
      c.calibration.norm = c.norm;
      c.scenario.norm = c.norm;
    }
    if (o.b) {
      if (std::isnan(*o.b) || *o.b <= 0.0) throw SetupError("--b must be > 0");
      c.b = *o.b;
      c.scenario.fixed_b = *o.b;
    }
    std::string crit = o.criterion;
    if (crit.empty()) crit = o.delta && !o.r ? "efficiency" : criterion_name(c.criterion);
    if (crit == "radius") {
      const double def = std::holds_alternative<RadiusCriterion>(c.criterion) ? std::get<RadiusCriterion>(c.criterion).r : 0.1;
      c.criterion = RadiusCriterion{o.r.value_or(def)};
    } else if (crit == "efficiency") {
      const double def =
          std::holds_alternative<EfficiencyCriterion>(c.criterion) ? std::get<EfficiencyCriterion>(c.criterion).delta : 0.1;
      c.criterion = EfficiencyCriterion{o.delta.value_or(def)};
    } else {
      throw SetupError("--criterion must be 'radius' or 'efficiency'");
    }
    if (const auto* rc = std::get_if<RadiusCriterion>(&c.criterion); rc && !(rc->r >= 0.0 && rc->r <= 1.0))
      throw SetupError("--r must lie in [0, 1]");
    if (const auto* ec = std::get_if<EfficiencyCriterion>(&c.criterion); ec && !(ec->delta >= 0.0))
      throw SetupError("--delta must be >= 0");
    c.scenario.criterion = c.criterion;
    if (o.mc) {
      c.calibration.mc_size = *o.mc;
      c.scenario.calibration_mc = *o.mc;
    }
    validate(c.scenario);
  } catch (const SetupError&) {
    throw;
  } catch (const ConfigError& e) {
    throw SetupError(e.what());
  } catch (const std::invalid_argument& e) {
    throw SetupError(e.what());
  }
  return c;
}

void emit(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_file(path, text);
}

void warn_all(const CalibrationTable& t, std::ostream& err) {
  for (const auto& w : t.warnings) err << "warning: " << variant_name(t.variant) << ": " << w << '\n';
}

FilterConfig filter_config(const Config& c, int T, std::ostream& err, bool verbose) {
  FilterConfig fc{c.variant, ClipHeights::infinite(), c.norm};
  if (c.variant == Variant::Classical) return fc;
  if (c.b) {
    fc.b = ClipHeights::fixed(*c.b);
    return fc;
  }
  const CalibrationTable t = calibrate(c.model, c.variant, c.criterion, T, c.calibration);
  warn_all(t, err);
  if (verbose)
    err << "calibrated " << variant_name(c.variant) << " (" << criterion_name(c.criterion)
        << "), steady state at t=" << t.steady_state_index << ", b=" << format_double(t.b.back()) << '\n';
  fc.b = t.heights();
  return fc;
}

int cmd_simulate(const Options& o, std::ostream& out, std::ostream&) {
  const Config c = resolve_config(o);
  Regime regime;
  try {
    regime = parse_regime(o.regime);
  } catch (const std::invalid_argument& e) {
    throw SetupError(e.what());
  }
  const ContaminationSpec* spec = c.scenario.contamination(regime);
  const Simulator sim(c.model, c.horizon);
  const Trajectory tr = spec ? sim.contaminated(*spec, c.seed) : sim.ideal(c.seed);
  std::ostringstream ts;
  write_trajectory_csv(ts, tr);
  emit(o.out, ts.str(), out);
  if (!o.obs_out.empty()) {
    std::ostringstream os;
    write_observations_csv(os, tr.y_real);
    write_file(o.obs_out, os.str());
  }
  return kExitOk;
}

Observations input_observations(const Options& o) {
  if (o.in.empty()) throw SetupError("--in FILE (observation CSV) is required");
  return read_observations_csv(o.in);
}

int cmd_filter(const Options& o, std::ostream& out, std::ostream& err, bool smooth_too) {
  const Config c = resolve_config(o);
  const Observations y = input_observations(o);
  const FilterConfig fc = filter_config(c, static_cast<int>(y.size()), err, o.verbose);
  const FilterResult fr = run_filter(c.model, y, fc);
  std::ostringstream ss;
  if (smooth_too)
    write_smoother_csv(ss, smooth(fr));
  else
    write_filter_csv(ss, fr);
  emit(o.out, ss.str(), out);
  return kExitOk;
}

int cmd_calibrate(const Options& o, std::ostream& out, std::ostream& err) {
  Config c = resolve_config(o);
  if (o.variant.empty()) c.variant = Variant::RlsAO;
  if (c.variant == Variant::Classical) throw SetupError("calibrate needs a robust --variant (rls-ao or rls-io)");
  const CalibrationTable t = calibrate(c.model, c.variant, c.criterion, c.horizon, c.calibration);
  warn_all(t, err);
  emit(o.out, calibration_to_json(t).dump(1) + "\n", out);
  return kExitOk;
}

int cmd_bench(const Options& o, std::ostream& out, std::ostream& err) {
  const Config c = resolve_config(o);
  if (o.format != "csv" && o.format != "json") throw SetupError("--format must be 'csv' or 'json'");
  const auto start = std::chrono::steady_clock::now();
  const StudyReport rep = run_study(c.scenario);
  if (o.verbose) {
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    err << "bench " << rep.scenario << ": " << rep.runs << " runs in " << dt.count() << " s on "
        << omp_get_max_threads() << " thread(s)\n";
  }
  const ReportFormat fmt = o.format == "json" ? ReportFormat::JSON : ReportFormat::CSV;
  if (o.out.empty() || o.out == "-") {
    if (fmt == ReportFormat::JSON)
      out << report_to_json(rep).dump(1) << '\n';
    else
      write_report_csv(out, rep);
  } else {
    export_report(rep, fmt, o.out);
  }
  return kExitOk;
}

void model_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Structured JSON config");
  cmd->add_option("--preset", o.preset, "Built-in model: sima, simb, rw2d, ar2, m1, m2, m3");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--out", o.out, "Output file (default stdout)");
  cmd->add_option("--T", o.T, "Horizon");
}

void filter_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--variant", o.variant, "classical, rls-ao or rls-io");
  cmd->add_option("--b", o.b, "Fixed clipping height (skips calibration)");
  cmd->add_option("--criterion", o.criterion, "Calibration criterion: radius or efficiency");
  cmd->add_option("--r", o.r, "Contamination radius for the radius criterion");
  cmd->add_option("--delta", o.delta, "Efficiency loss for the efficiency criterion");
  cmd->add_option("--mc", o.mc, "Monte-Carlo sample size for calibration");
  cmd->add_option("--norm", o.norm, "Clipping norm: euclidean or mahalanobis");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Robust Kalman filtering and smoothing"};
  app.name("rkf");
  app.require_subcommand(1, 1);
  Options o;
  app.add_option("--threads", o.threads, "Maximum worker threads (0 = all)");
  app.add_flag("-v,--verbose", o.verbose, "Progress and timing on stderr");

  CLI::App* sim = app.add_subcommand("simulate", "Simulate a (contaminated) trajectory");
  model_flags(sim, o);
  sim->add_option("--regime", o.regime, "ideal, ao, io or block");
  sim->add_option("--obs-out", o.obs_out, "Also write the observations as CSV");

  CLI::App* filt = app.add_subcommand("filter", "Run a filter over an observation CSV");
  model_flags(filt, o);
  filter_flags(filt, o);
  filt->add_option("--in", o.in, "Observation CSV (t,y_1..y_q; blank = missing)");

  CLI::App* smo = app.add_subcommand("smooth", "Filter, then run the fixed-interval smoother");
  model_flags(smo, o);
  filter_flags(smo, o);
  smo->add_option("--in", o.in, "Observation CSV (t,y_1..y_q; blank = missing)");

  CLI::App* cal = app.add_subcommand("calibrate", "Per-step clipping heights as JSON");
  model_flags(cal, o);
  filter_flags(cal, o);

  CLI::App* bench = app.add_subcommand("bench", "Monte-Carlo study over all regimes and variants");
  model_flags(bench, o);
  filter_flags(bench, o);
  bench->add_option("--runs", o.runs, "Replications");
  bench->add_option("--format", o.format, "csv (plus <out>.raw.csv) or json");

  for (CLI::App* sc : {sim, filt, smo, cal, bench}) sc->add_option("--threads", o.threads, "Maximum worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }
  if (o.threads < 0) {
    err << "error: --threads must be >= 0\n";
    return kExitConfig;
  }
  if (o.threads > 0) omp_set_num_threads(o.threads);

  try {
    if (sim->parsed()) return cmd_simulate(o, out, err);
    if (filt->parsed()) return cmd_filter(o, out, err, false);
    if (smo->parsed()) return cmd_filter(o, out, err, true);
    if (cal->parsed()) return cmd_calibrate(o, out, err);
    if (bench->parsed()) return cmd_bench(o, out, err);
  } catch (const SetupError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  err << app.help();
  return kExitUsage;
}

}  // namespace rkf
