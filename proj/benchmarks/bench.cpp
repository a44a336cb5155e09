#include <benchmark/benchmark.h>

#include "cgmm/gmm.hpp"
#include "cgmm/simulate.hpp"

namespace {

using namespace cgmm;

Dataset Table1Data(Index n) {
  ScenarioConfig c;
  c.model = Model::kOveridSem;
  c.beta = {0.0, 1.0, 0.0};
  c.n = n;
  Rng rng = replicate_stream(1, 0);
  return generate(c, rng);
}

void BM_RowwiseKronecker(benchmark::State& state) {
  const Dataset d = Table1Data(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(rowwise_kronecker(d.E(), d.X()));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RowwiseKronecker)->Arg(200)->Arg(10000);

void BM_TwoStepGcd(benchmark::State& state) {
  const Dataset d = Table1Data(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(fit({MomentFamily::kGcd}, d));
}
BENCHMARK(BM_TwoStepGcd)->Arg(200)->Arg(10000);

void BM_Table1MonteCarlo(benchmark::State& state) {
  Scenario s = named_scenario("table1");
  s.replicates = 100;
  for (auto _ : state) benchmark::DoNotOptimize(run_monte_carlo(s, static_cast<unsigned>(state.range(0))));
}
BENCHMARK(BM_Table1MonteCarlo)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
