#include <benchmark/benchmark.h>

#include "qca/heisenberg.hpp"
#include "qca/random.hpp"

using namespace qca;

namespace {

QlgaModel model_1d(int d2) {
  std::mt19937_64 rng(1);
  return random_qlga(Neighborhood({Site{0}, Site{1}}), {2, d2}, rng);
}

QlgaModel model_2d() {
  std::mt19937_64 rng(2);
  return random_qlga(Neighborhood({Site{0, 0}, Site{1, 0}, Site{0, 1}}), {2, 2, 2}, rng);
}

}  // namespace

static void BM_StepActiveCells(benchmark::State& state) {
  const QlgaModel m = model_1d(2);
  std::mt19937_64 rng(3);
  const int active = static_cast<int>(state.range(0));
  const SparseState psi = random_state(1, m.cell_dim(), StateShape{active, 1, 2 * active}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(step(psi, m));
}
BENCHMARK(BM_StepActiveCells)->Arg(2)->Arg(4)->Arg(6);

static void BM_Step2D(benchmark::State& state) {
  const QlgaModel m = model_2d();
  std::mt19937_64 rng(4);
  const SparseState psi = random_state_within(m, StateShape{4, 3, 4}, 5, rng);
  for (auto _ : state) benchmark::DoNotOptimize(step(psi, m));
}
BENCHMARK(BM_Step2D);

static void BM_BrickworkCircuit(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const PartitionedCircuit c = brickwork_circuit(2, rng);
  const SparseState psi = random_state(1, 2, StateShape{4, 3, 6}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(apply_circuit(psi, c));
}
BENCHMARK(BM_BrickworkCircuit);

static void BM_HeisenbergImage(benchmark::State& state) {
  const QlgaModel m = model_1d(static_cast<int>(state.range(0)));
  const EvolutionHandle h = EvolutionHandle::from_qlga(m);
  const LocalOperator b = LocalOperator::matrix_unit(Site{0}, 1, 0, m.cell_dim());
  for (auto _ : state) benchmark::DoNotOptimize(h.heisenberg(b));
}
BENCHMARK(BM_HeisenbergImage)->Arg(2)->Arg(3)->Arg(4);

static void BM_ExtractRule2D(benchmark::State& state) {
  const QlgaModel m = model_2d();
  const EvolutionHandle h = EvolutionHandle::from_qlga(m);
  for (auto _ : state) benchmark::DoNotOptimize(extract_rule(h, m.neighborhood()));
  state.SetLabel("d=8");
}
BENCHMARK(BM_ExtractRule2D)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
