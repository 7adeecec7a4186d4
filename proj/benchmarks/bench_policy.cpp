#include <benchmark/benchmark.h>

#include "relay/policy.hpp"
#include "relay/rng.hpp"

namespace {

relay::GaussianPolicy policy_of(int width) {
  relay::MlpShape shape{18, 3, {width, width}};
  return relay::GaussianPolicy::random_init(shape, 7, 1.0);
}

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  relay::Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = rng.uniform(-1, 1);
  return m;
}

void BM_ForwardSingle(benchmark::State& state) {
  const relay::GaussianPolicy p = policy_of(static_cast<int>(state.range(0)));
  const Eigen::VectorXd s = Eigen::VectorXd::Constant(9, 0.3);
  const Eigen::VectorXd g = Eigen::VectorXd::Constant(9, 0.7);
  for (auto _ : state) {
    const auto out = relay::forward(p, s, g);
    benchmark::DoNotOptimize(out.first.data());
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_ForwardSingle)->Arg(64)->Arg(256);

void BM_BatchGradient(benchmark::State& state) {
  const relay::GaussianPolicy p = policy_of(64);
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd X = random_matrix(n, 18, 1);
  const Eigen::MatrixXd A = random_matrix(n, 3, 2);
  const Eigen::VectorXd w = Eigen::VectorXd::Ones(n);
  for (auto _ : state) {
    const relay::WeightedLogProb res =
        relay::weighted_log_prob_grad(p, X, A, w);
    benchmark::DoNotOptimize(res.grad.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_BatchGradient)->Arg(128)->Arg(1024);

void BM_ScoreMatrix(benchmark::State& state) {
  const relay::GaussianPolicy p = policy_of(64);
  const int n = static_cast<int>(state.range(0));
  const Eigen::MatrixXd X = random_matrix(n, 18, 3);
  const Eigen::MatrixXd A = random_matrix(n, 3, 4);
  for (auto _ : state) {
    const Eigen::MatrixXd scores = relay::score_matrix(p, X, A);
    benchmark::DoNotOptimize(scores.data());
  }
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_ScoreMatrix)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
