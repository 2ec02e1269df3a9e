#include <benchmark/benchmark.h>

#include "fixtures.hpp"
#include "kktplan/belief.hpp"
#include "kktplan/extraction.hpp"
#include "kktplan/planning.hpp"
#include "kktplan/sim.hpp"

using namespace kktplan;

namespace {

void BM_ExtractToy(benchmark::State& st) {
  const Scenario sc = fixtures::toy_t1();
  ExtractionOptions eo;
  eo.engine = static_cast<Engine>(st.range(0));
  for (auto _ : st) benchmark::DoNotOptimize(extract(sc.demos, sc.task, sc.model, eo));
  st.SetLabel(to_string(eo.engine));
}
BENCHMARK(BM_ExtractToy)->Arg(static_cast<int>(Engine::Enumerate))->Arg(static_cast<int>(Engine::Carve))
    ->Unit(benchmark::kMillisecond);

void BM_ExtractScalar(benchmark::State& st) {
  const Scenario sc = fixtures::scalar_bound();
  for (auto _ : st) benchmark::DoNotOptimize(extract(sc.demos, sc.task, sc.model));
}
BENCHMARK(BM_ExtractScalar)->Unit(benchmark::kMillisecond);

void BM_PlanCcGate(benchmark::State& st) {
  const Scenario sc = fixtures::gate_wall();
  const Belief b = belief_from_support(BoxUnion{sc.model.theta_prior()});
  const Lattice lat = Lattice::for_dynamics(sc.task.dynamics, 0.1, 2, false);
  const double eps = static_cast<double>(st.range(0)) / 100.0;
  for (auto _ : st) benchmark::DoNotOptimize(plan_cc(b, sc.task, sc.model, eps, lat));
}
BENCHMARK(BM_PlanCcGate)->Arg(10)->Arg(30)->Unit(benchmark::kMillisecond);

void BM_PlanRatioMaze(benchmark::State& st) {
  const Scenario sc = fixtures::maze_shortcut();
  const Belief b = belief_from_support(BoxUnion{sc.model.theta_prior()});
  const Lattice lat = Lattice::for_dynamics(sc.task.dynamics, 0.1, 2, false);
  for (auto _ : st) benchmark::DoNotOptimize(plan_ratio(b, sc.task, sc.model, lat));
}
BENCHMARK(BM_PlanRatioMaze)->Unit(benchmark::kMillisecond);

void BM_EpisodesGate(benchmark::State& st) {
  const Scenario sc = fixtures::gate_wall();
  const Belief b = belief_from_support(BoxUnion{sc.model.theta_prior()});
  PolicyConfig cfg;
  cfg.lattice = Lattice::for_dynamics(sc.task.dynamics, 0.1, 2, false);
  BenchmarkOptions bo;
  bo.n_trials = static_cast<std::size_t>(st.range(0));
  bo.threads = 1;
  bo.use_tree = st.range(1) != 0;
  for (auto _ : st) benchmark::DoNotOptimize(kktplan::benchmark(sc.task, sc.model, b, {{"epsmin", cfg}}, bo));
  st.SetItemsProcessed(st.iterations() * st.range(0));
  st.SetLabel(bo.use_tree ? "tree" : "online");
}
BENCHMARK(BM_EpisodesGate)->Args({200, 1})->Args({200, 0})->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
