#include <benchmark/benchmark.h>

#include "relay/dataset.hpp"
#include "relay/env.hpp"
#include "relay/rng.hpp"

namespace {

std::vector<relay::Trajectory> demo_pool(int count) {
  const relay::EnvSpec spec = relay::make_env_spec(relay::EnvSpec{});
  std::vector<relay::Trajectory> demos;
  for (int i = 0; i < count; ++i) {
    relay::Rng pick(relay::derive_seed(1, i));
    std::vector<int> all(spec.num_elements);
    for (int j = 0; j < spec.num_elements; ++j) all[j] = j;
    pick.shuffle(all);
    std::array<int, 4> subset{all[0], all[1], all[2], all[3]};
    std::sort(subset.begin(), subset.end());
    demos.push_back(relay::scripted_demo(
        spec, relay::make_compound_goal(spec, subset), 0.01,
        relay::derive_seed(1, i, 2)));
  }
  return demos;
}

void BM_RelabelLowBuild(benchmark::State& state) {
  auto pool = relay::make_pool(demo_pool(static_cast<int>(state.range(0))));
  for (auto _ : state) {
    const relay::Dataset d = relay::relabel_low(pool, relay::RelabelConfig{});
    benchmark::DoNotOptimize(d.size());
  }
}
BENCHMARK(BM_RelabelLowBuild)->Arg(10)->Arg(50);

void BM_TupleAccess(benchmark::State& state) {
  auto pool = relay::make_pool(demo_pool(20));
  const relay::Dataset d = relay::relabel_high(pool, relay::RelabelConfig{});
  relay::Rng rng(3);
  for (auto _ : state) {
    const relay::GoalTuple tuple = d.get(rng.uniform_index(d.size()));
    benchmark::DoNotOptimize(tuple.state.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TupleAccess);

void BM_MinibatchGather(benchmark::State& state) {
  auto pool = relay::make_pool(demo_pool(20));
  const relay::Dataset d = relay::relabel_low(pool, relay::RelabelConfig{});
  relay::Rng rng(4);
  std::vector<std::size_t> idx(128);
  Eigen::MatrixXd X, A;
  for (auto _ : state) {
    for (auto& i : idx) i = rng.uniform_index(d.size());
    d.gather(idx, X, A);
    benchmark::DoNotOptimize(X.data());
  }
  state.SetItemsProcessed(state.iterations() * 128);
}
BENCHMARK(BM_MinibatchGather);

}  // namespace

BENCHMARK_MAIN();
