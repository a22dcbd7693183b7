#include "rkf/error.hpp"
#include "rkf/io.hpp"

#include <doctest.h>

#include <filesystem>
#include <limits>
#include <sstream>

using namespace rkf;

namespace {

StudyReport small_report() {
  Scenario s = preset_scenario(Preset::SimB);
  s.runs = 40;
  s.calibration_mc = 20000;
  return run_study(s);
}

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("rkf_test_io_" + name);
}

}  // namespace

TEST_CASE("format_double round-trips and spells out non-finite values") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 1e308, 0.0}) CHECK(std::stod(format_double(x)) == x);
  CHECK(format_double(kInf) == "inf");
  CHECK(format_double(-kInf) == "-inf");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
}

TEST_CASE("report JSON round-trip is exact") {
  StudyReport r = small_report();
  const StudyReport back = report_from_json(nlohmann::json::parse(report_to_json(r).dump()));
  CHECK(back == r);
  CHECK(std::isfinite(r.io_dnorm_bound));
  r.io_dnorm_bound = kInf;
  CHECK(report_from_json(report_to_json(r)) == r);
  CHECK_THROWS_AS(report_from_json(nlohmann::json{{"scenario", 3}}), InvalidInput);
}

TEST_CASE("report CSV layout") {
  const StudyReport r = small_report();
  std::ostringstream os;
  write_report_csv(os, r);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line == "scenario,regime,variant,stage,coordinate,statistic,value");
  int mse_all = 0;
  while (std::getline(is, line))
    if (line.find(",all,mse,") != std::string::npos) ++mse_all;
  CHECK(mse_all == 3 * 3 * 2);

  std::ostringstream raw;
  write_report_raw_csv(raw, r);
  std::istringstream ris(raw.str());
  int rows = -1;
  while (std::getline(ris, line)) ++rows;
  CHECK(rows == 3 * 3 * 2 * 40);
}

TEST_CASE("empty report gives a header-only CSV") {
  StudyReport empty;
  std::ostringstream os;
  write_report_csv(os, empty);
  CHECK(os.str() == "scenario,regime,variant,stage,coordinate,statistic,value\n");
}

TEST_CASE("export_report writes the CSV pair and re-exports bit-exactly") {
  const StudyReport r = small_report();
  const std::string a = temp_path("a.csv").string(), b = temp_path("b.csv").string();
  export_report(r, ReportFormat::CSV, a);
  export_report(r, ReportFormat::CSV, b);
  CHECK(read_file(a) == read_file(b));
  CHECK(read_file(a + ".raw.csv") == read_file(b + ".raw.csv"));
  const std::string j = temp_path("r.json").string();
  export_report(r, ReportFormat::JSON, j);
  CHECK(report_from_json(nlohmann::json::parse(read_file(j))) == r);
  for (const auto& p : {a, b, a + ".raw.csv", b + ".raw.csv", j}) std::filesystem::remove(p);
  CHECK_THROWS_AS(export_report(r, ReportFormat::CSV, "/nonexistent-dir/x.csv"), IoError);
}

TEST_CASE("observation CSV round-trip with missing values") {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Observations y{(Vec(2) << 1.5, nan).finished(), (Vec(2) << nan, nan).finished(), (Vec(2) << -3.0, 0.25).finished()};
  std::ostringstream os;
  write_observations_csv(os, y);
  CHECK(os.str() == "t,y_1,y_2\n1,1.5,\n2,,\n3,-3,0.25\n");
  std::istringstream is(os.str());
  const Observations back = read_observations_csv(is);
  REQUIRE(back.size() == 3);
  CHECK(back[0](0) == 1.5);
  CHECK(std::isnan(back[0](1)));
  CHECK(std::isnan(back[1](0)));
  CHECK(back[2](1) == 0.25);

  std::istringstream na("t,y_1\n1,NA\n2, 4 \n\n");
  const Observations n = read_observations_csv(na);
  CHECK(n.size() == 2);
  CHECK(std::isnan(n[0](0)));
  CHECK(n[1](0) == 4.0);
}

TEST_CASE("malformed observation CSV") {
  const auto bad = [](const std::string& text) {
    std::istringstream is(text);
    return read_observations_csv(is);
  };
  CHECK_THROWS_AS(bad(""), InvalidInput);
  CHECK_THROWS_AS(bad("t,y_1\n"), InvalidInput);
  CHECK_THROWS_AS(bad("x,y_1\n1,2\n"), InvalidInput);
  CHECK_THROWS_AS(bad("t,y_1\n1,2,3\n"), InvalidInput);
  CHECK_THROWS_AS(bad("t,y_1\n1,abc\n"), InvalidInput);
  CHECK_THROWS_AS(bad("t,y_1\n2,1\n"), InvalidInput);
  CHECK_THROWS_AS(bad("t,y_1\n1,inf\n"), InvalidInput);
  CHECK_THROWS_AS(read_observations_csv(std::string("/nonexistent/obs.csv")), IoError);
}

TEST_CASE("filter and trajectory CSV headers") {
  const Model m = build_preset(Preset::SimB);
  const Trajectory tr = simulate_ideal(m, 5, 1);
  std::ostringstream t;
  write_trajectory_csv(t, tr);
  CHECK(t.str().rfind("t,x_1,x_2,x_3,y_1,y_2,io_hit,ao_hit\n0,", 0) == 0);
  const FilterResult fr = run_filter(m, tr.y_real, {});
  std::ostringstream f;
  write_filter_csv(f, fr);
  CHECK(f.str().rfind("t,x_pred_1,x_pred_2,x_pred_3,x_filt_1,x_filt_2,x_filt_3,sigma_filt_1,sigma_filt_2,sigma_filt_3,"
                      "dy_norm,clipped\n",
                      0) == 0);
  std::ostringstream s;
  write_smoother_csv(s, smooth(fr));
  CHECK(s.str().rfind("t,x_smooth_1,x_smooth_2,x_smooth_3,sigma_smooth_1,sigma_smooth_2,sigma_smooth_3\n", 0) == 0);
}

TEST_CASE("calibration JSON") {
  CalibrationOptions opt;
  opt.mc_size = 20000;
  const CalibrationTable t = calibrate_radius(build_preset(Preset::SimA), Variant::RlsAO, 0.1, 20, opt);
  const nlohmann::json j = calibration_to_json(t);
  CHECK(j.at("b").size() == 20);
  CHECK(j.at("criterion").dump().find("radius") != std::string::npos);
  CHECK(j.at("seed") == 1);
}
