#include <benchmark/benchmark.h>

#include "qca/random.hpp"
#include "qca/structure.hpp"

using namespace qca;

namespace {

LocalRule rule_1d(int d2) {
  std::mt19937_64 rng(1);
  const QlgaModel m = random_qlga(Neighborhood({Site{0}, Site{1}}), {2, d2}, rng);
  return extract_rule(EvolutionHandle::from_qlga(m), m.neighborhood());
}

}  // namespace

static void BM_Patches(benchmark::State& state) {
  const LocalRule rule = rule_1d(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(compute_patches(rule));
}
BENCHMARK(BM_Patches)->Arg(2)->Arg(3)->Arg(4)->Unit(benchmark::kMillisecond);

static void BM_Validate(benchmark::State& state) {
  const LocalRule rule = rule_1d(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(validate_rule(rule));
}
BENCHMARK(BM_Validate)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_Detect(benchmark::State& state) {
  const LocalRule rule = rule_1d(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(detect_and_reconstruct(rule, 7));
}
BENCHMARK(BM_Detect)->Arg(2)->Arg(3)->Unit(benchmark::kMillisecond);

static void BM_Intertwiner(benchmark::State& state) {
  const LocalRule rule = rule_1d(2);
  const Torus w{{state.range(0)}};
  for (auto _ : state) benchmark::DoNotOptimize(solve_intertwiner(rule, w, 3));
}
BENCHMARK(BM_Intertwiner)->Arg(3)->Arg(4)->Arg(5)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
