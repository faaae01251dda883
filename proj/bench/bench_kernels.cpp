// Parallel kernels against their serial references on the converter benchmark.
#include <benchmark/benchmark.h>

#include <fstream>

#include "smpc/config.hpp"
#include "smpc/scenario.hpp"
#include "smpc/sim.hpp"

namespace {

using namespace smpc;

const ScenarioConfig& config() {
  static const ScenarioConfig cfg = [] {
    std::ifstream in(std::string(SMPC_SOURCE_DIR) + "/configs/dcdc_single_constraint.json");
    return parse_config(nlohmann::json::parse(in));
  }();
  return cfg;
}

const SynthesisBundle& bundle() {
  static const SynthesisBundle b = [] {
    const auto& cfg = config();
    SynthesisOptions opt = cfg.synthesis;
    opt.cost_samples = 0;
    return synthesize(cfg.sys, cfg.dist, cfg.spec, cfg.Q, cfg.R, Mode::Proposed, opt);
  }();
  return b;
}

template <bool Parallel>
void BM_ErrorBank(benchmark::State& state) {
  const auto& cfg = config();
  const auto& b = bundle();
  const std::int64_t n = state.range(0);
  for (auto _ : state) {
    auto bank = Parallel ? sample_error_bank(cfg.sys, b.gains.K, cfg.dist, cfg.spec.T, n, 7)
                         : sample_error_bank_serial(cfg.sys, b.gains.K, cfg.dist, cfg.spec.T, n, 7);
    benchmark::DoNotOptimize(bank.e.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}

template <bool Parallel>
void BM_MonteCarlo(benchmark::State& state) {
  const auto& cfg = config();
  const auto& b = bundle();
  const int runs = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto r = Parallel ? monte_carlo(b, cfg.run.x0, runs, cfg.run.steps, 1)
                      : monte_carlo_serial(b, cfg.run.x0, runs, cfg.run.steps, 1);
    benchmark::DoNotOptimize(r.stats.freq.data());
  }
  state.SetItemsProcessed(state.iterations() * runs);
}

BENCHMARK(BM_ErrorBank<false>)->Name("error_bank/serial")->Arg(1 << 16)->Arg(1 << 19)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ErrorBank<true>)->Name("error_bank/openmp")->Arg(1 << 16)->Arg(1 << 19)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarlo<false>)->Name("monte_carlo/serial")->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MonteCarlo<true>)->Name("monte_carlo/openmp")->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
