#include "rkf/calibration.hpp"
#include "rkf/study.hpp"

#include <benchmark/benchmark.h>
#include <omp.h>

namespace {

rkf::Scenario bench_scenario(rkf::Preset p, int runs) {
  rkf::Scenario s = rkf::preset_scenario(p);
  s.runs = runs;
  s.calibration_mc = 20000;
  return s;
}

void BM_StudySerial(benchmark::State& state) {
  const rkf::Scenario s = bench_scenario(static_cast<rkf::Preset>(state.range(0)), static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(rkf::run_study_serial(s));
  state.SetItemsProcessed(state.iterations() * state.range(1));
}

void BM_StudyParallel(benchmark::State& state) {
  const rkf::Scenario s = bench_scenario(static_cast<rkf::Preset>(state.range(0)), static_cast<int>(state.range(1)));
  omp_set_num_threads(static_cast<int>(state.range(2)));
  for (auto _ : state) benchmark::DoNotOptimize(rkf::run_study(s));
  state.SetItemsProcessed(state.iterations() * state.range(1));
  state.counters["threads"] = static_cast<double>(state.range(2));
}

void BM_Calibrate(benchmark::State& state) {
  const rkf::Model m = rkf::build_preset(static_cast<rkf::Preset>(state.range(0)));
  rkf::CalibrationOptions opt;
  opt.mc_size = 100000;
  omp_set_num_threads(static_cast<int>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(rkf::calibrate_radius(m, rkf::Variant::RlsAO, 0.1, 50, opt));
  state.counters["threads"] = static_cast<double>(state.range(1));
}

const int kSimA = static_cast<int>(rkf::Preset::SimA);
const int kSimB = static_cast<int>(rkf::Preset::SimB);

}  // namespace

BENCHMARK(BM_StudySerial)->Args({kSimA, 2000})->Args({kSimB, 2000})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StudyParallel)
    ->ArgsProduct({{kSimA, kSimB}, {2000}, {1, 2, 4}})
    ->Unit(benchmark::kMillisecond)
    ->UseRealTime();
BENCHMARK(BM_Calibrate)->ArgsProduct({{kSimA, kSimB}, {1, 2, 4}})->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
