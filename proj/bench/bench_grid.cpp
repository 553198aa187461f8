// Serial vs. worker-pool (s, rho) stability grid on the bundled case.

#include <benchmark/benchmark.h>

#include "gridpass/harness.hpp"

using namespace gridpass;

namespace {

const CaseFile& bundled() {
    static const CaseFile c = load_case(std::string(GRIDPASS_DATA_DIR) + "/case3.json");
    return c;
}

void run_grid(benchmark::State& state, Execution exec) {
    SweepConfig cfg = SweepConfig::from_case(bundled(), false);
    cfg.s = {0.5, 2.5, 5};
    cfg.rho = {-1.0, 1.0, static_cast<int>(state.range(0))};
    for (auto _ : state) benchmark::DoNotOptimize(sweep_stability_grid(bundled(), cfg, exec));
    state.SetItemsProcessed(state.iterations() * 5 * state.range(0));
}

void BM_GridSerial(benchmark::State& state) { run_grid(state, Execution::serial); }
void BM_GridParallel(benchmark::State& state) { run_grid(state, Execution::parallel); }

}  // namespace

BENCHMARK(BM_GridSerial)->Arg(21)->Arg(81)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GridParallel)->Arg(21)->Arg(81)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
