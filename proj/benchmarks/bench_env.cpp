#include <benchmark/benchmark.h>

#include "relay/env.hpp"
#include "relay/rng.hpp"

namespace {

void BM_EnvStep(benchmark::State& state) {
  const relay::EnvSpec spec = relay::make_env_spec(relay::EnvSpec{});
  relay::EnvState s = relay::initial_state(spec);
  relay::Rng rng(1);
  const relay::Action a = relay::clamp_action(
      spec, Eigen::Vector3d(rng.uniform(-0.05, 0.05),
                            rng.uniform(-0.05, 0.05), rng.uniform(-1, 1)));
  for (auto _ : state) {
    s = relay::step(spec, s, a);
    benchmark::DoNotOptimize(s.joints.data());
    if (s.t > 100000) s.t = 0;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_EnvStep);

void BM_ScriptedDemo(benchmark::State& state) {
  const relay::EnvSpec spec = relay::make_env_spec(relay::EnvSpec{});
  const relay::CompoundGoal goal =
      relay::make_compound_goal(spec, {0, 1, 2, 3});
  std::uint64_t seed = 0;
  for (auto _ : state) {
    const relay::Trajectory demo =
        relay::scripted_demo(spec, goal, 0.01, seed++);
    benchmark::DoNotOptimize(demo.states.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ScriptedDemo);

}  // namespace

BENCHMARK_MAIN();
