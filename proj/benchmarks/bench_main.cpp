#include <benchmark/benchmark.h>

#include <cmath>
#include <string>

#include "ldbuffer/model.hpp"
#include "ldbuffer/pathspace.hpp"
#include "ldbuffer/ratefn.hpp"
#include "ldbuffer/simulate.hpp"
#include "ldbuffer/varsolver.hpp"

namespace {

using namespace ldb;

const JumpModel& phone() {
  static const JumpModel m = load_model(std::string(LDBUFFER_MODELS_DIR) + "/phone_data.json");
  return m;
}

const JumpModel& toy() {
  static const JumpModel m = load_model(std::string(LDBUFFER_MODELS_DIR) + "/toy_birth_death.json");
  return m;
}

void BM_LocalCost(benchmark::State& state) {
  const Vector x{{25.0, 15.0}}, y{{4.0, 9.0}};
  for (auto _ : state) benchmark::DoNotOptimize(local_cost(phone(), x, y).value);
}
BENCHMARK(BM_LocalCost);

void BM_BufferValue(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Path p = Path::uniform(1.0, n, [](double t) {
    return Vector{{25.0 + 5.0 * std::sin(7.0 * t), 15.0 + 3.0 * std::cos(5.0 * t)}};
  });
  const Vector a = phone().buffer_weights();
  for (auto _ : state) benchmark::DoNotOptimize(buffer_value(p, a, phone().drain()).terminal);
  state.SetComplexityN(n);
}
BENCHMARK(BM_BufferValue)->RangeMultiplier(4)->Range(64, 16384)->Complexity(benchmark::oN);

void BM_SolveFixedT(benchmark::State& state) {
  SolverOptions o;
  o.grid = static_cast<int>(state.range(0));
  const Vector x0{{25.3205, 14.936}};
  const CostModel cost = CostModel::frozen(freeze(phone(), x0));
  for (auto _ : state) benchmark::DoNotOptimize(solve_fixed_T(cost, x0, 0.42, 1.0, o).cost);
}
BENCHMARK(BM_SolveFixedT)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_SsaEvents(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  std::uint64_t seed = 0;
  std::size_t events = 0;
  for (auto _ : state) {
    const SimRun r = ssa_simulate(toy(), n, Vector::Constant(1, 1.2), 5.0, 1e9, seed++);
    events += r.events;
  }
  state.counters["events/s"] = benchmark::Counter(static_cast<double>(events), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_SsaEvents)->Arg(100)->Arg(1000);

void BM_Overflow(benchmark::State& state) {
  SimOptions o;
  o.threads = 1;
  for (auto _ : state)
    benchmark::DoNotOptimize(overflow_probability(toy(), 50, Vector::Constant(1, 1.2), 0.3, 6.0, 1000, 1, o).hits);
}
BENCHMARK(BM_Overflow)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
