// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include "isosched/instances.hpp"
#include "isosched/seed.hpp"
#include "isosched/sim_metrics.hpp"
#include "isosched/workload.hpp"

using namespace isosched;

namespace {

const OnlineRun& committed_run() {
  static const OnlineRun run = [] {
    const auto p = platform_preset("mesh4");
    SyntheticSpec spec;
    spec.cls = ComplexityClass::Middle;
    spec.tasks = 12;
    spec.engine = p.engine;
    const auto w = generate_synthetic(spec, derive_seed(7, "bench"));
    const auto ts = base_timeslot(w, p.engine);
    std::vector<std::shared_ptr<const PreparedTask>> tasks;
    for (const auto& t : w.tasks) tasks.push_back(std::make_shared<PreparedTask>(prepare_task(t, p.engine, ts, PrepareOptions{})));
    return run_workload(tasks, p, SchedulerParams{}, EnergyModel::of(p));
  }();
  return run;
}

void BM_ValidateSerial(benchmark::State& st) {
  const auto& r = committed_run();
  const auto p = platform_preset("mesh4");
  for (auto _ : st)
    benchmark::DoNotOptimize(validate_all_serial(r.state.x, r.state.y, r.state.problem, p));
  st.counters["entries"] = static_cast<double>(r.state.x.entries.size());
}

void BM_ValidateParallel(benchmark::State& st) {
  const auto& r = committed_run();
  const auto p = platform_preset("mesh4");
  for (auto _ : st) benchmark::DoNotOptimize(validate_all(r.state.x, r.state.y, r.state.problem, p));
}

const MatchInstance& match_instance() {
  static const auto inst = random_match_instance(8, 20, 0.2, 0.7, derive_seed(3, "bench-match"));
  return inst;
}

void BM_MctsSingle(benchmark::State& st) {
  McuParams params;
  params.max_iterations = 5000;
  for (auto _ : st) benchmark::DoNotOptimize(mcu_search(match_instance().a, match_instance().b, params));
}

void BM_MctsParallel(benchmark::State& st) {
  McuParams params;
  params.max_iterations = 5000;
  for (auto _ : st)
    benchmark::DoNotOptimize(mcu_search_parallel(match_instance().a, match_instance().b, params, 8));
}

void BM_Ullmann(benchmark::State& st) {
  for (auto _ : st) benchmark::DoNotOptimize(ullmann_search(match_instance().a, match_instance().b));
}

}  // namespace

BENCHMARK(BM_ValidateSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ValidateParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MctsSingle)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MctsParallel)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Ullmann)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
