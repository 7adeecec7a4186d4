#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>
#include <numbers>

#include "relay/env.hpp"
#include "relay/executor.hpp"
#include "relay/policy.hpp"
#include "relay/rng.hpp"

using namespace relay;

namespace {

GaussianPolicy random_policy(const MlpShape& shape, std::uint64_t seed,
                             double weight_scale = 1.0) {
  GaussianPolicy p(shape);
  Rng rng(seed);
  for (Eigen::Index i = 0; i < p.params().size(); ++i)
    p.params()[i] = weight_scale * rng.uniform(-0.8, 0.8);
  p.clamp_log_std();
  return p;
}

// Closed-form diagonal Gaussian density, written independently of the
// policy code path.
double oracle_log_density(const Eigen::VectorXd& action,
                          const Eigen::VectorXd& mean,
                          const Eigen::VectorXd& log_std) {
  double total = 0.0;
  for (Eigen::Index d = 0; d < action.size(); ++d) {
    const double sigma = std::exp(log_std[d]);
    const double z = (action[d] - mean[d]) / sigma;
    total += -0.5 * z * z - std::log(sigma) -
             0.5 * std::log(2.0 * std::numbers::pi);
  }
  return total;
}

Eigen::VectorXd fd_gradient(const GaussianPolicy& policy,
                            const Eigen::VectorXd& state,
                            const Eigen::VectorXd& goal,
                            const Eigen::VectorXd& action, double h = 1e-5) {
  GaussianPolicy p = policy;
  Eigen::VectorXd grad(p.param_count());
  for (int i = 0; i < p.param_count(); ++i) {
    const double saved = p.params()[i];
    p.params()[i] = saved + h;
    const double up = log_prob(p, state, goal, action);
    p.params()[i] = saved - h;
    const double down = log_prob(p, state, goal, action);
    p.params()[i] = saved;
    grad[i] = (up - down) / (2.0 * h);
  }
  return grad;
}

}  // namespace

TEST_CASE("zero parameters give a zero mean") {
  MlpShape shape{4, 3, {8, 8}};
  GaussianPolicy p(shape);
  const auto [mean, log_std] = forward(p, Eigen::VectorXd::Constant(2, 0.4),
                                       Eigen::VectorXd::Constant(2, -0.7));
  CHECK(mean == Eigen::VectorXd::Zero(3));
  CHECK(log_std == Eigen::VectorXd::Zero(3));
}

TEST_CASE("forward is deterministic and shape-checked") {
  MlpShape shape{6, 2, {16, 16}};
  const GaussianPolicy p = random_policy(shape, 3);
  Eigen::VectorXd s = Eigen::VectorXd::LinSpaced(3, -1.0, 1.0);
  Eigen::VectorXd g = Eigen::VectorXd::LinSpaced(3, 0.0, 0.5);
  const auto a = forward(p, s, g);
  const auto b = forward(p, s, g);
  CHECK(a.first == b.first);
  CHECK_THROWS_AS(forward(p, s, Eigen::VectorXd::Zero(4)),
                  std::invalid_argument);
}

TEST_CASE("output perturbation is bounded by the product of spectral norms") {
  MlpShape shape{5, 3, {12, 10}};
  const GaussianPolicy p = random_policy(shape, 11);
  double lipschitz = 1.0;
  for (int l = 0; l < shape.num_layers(); ++l) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(p.weight(l));
    lipschitz *= svd.singularValues()[0];
  }
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd x(5), delta(5);
    for (int i = 0; i < 5; ++i) {
      x[i] = rng.uniform(-1, 1);
      delta[i] = 1e-3 * rng.uniform(-1, 1);
    }
    const Eigen::MatrixXd base = forward_mean_batch(p, x.transpose());
    const Eigen::MatrixXd moved =
        forward_mean_batch(p, (x + delta).transpose());
    CHECK((moved - base).norm() <= lipschitz * delta.norm() + 1e-12);
  }
}

TEST_CASE("log density at the mode and one standard deviation out") {
  MlpShape shape{4, 3, {8}};
  GaussianPolicy p(shape);  // zero net: mean 0, log_std 0
  const Eigen::VectorXd s = Eigen::VectorXd::Zero(2);
  const Eigen::VectorXd g = Eigen::VectorXd::Zero(2);

  const double at_mode = log_prob(p, s, g, Eigen::VectorXd::Zero(3));
  CHECK(at_mode == doctest::Approx(-1.5 * std::log(2.0 * std::numbers::pi))
                       .epsilon(1e-12));

  Eigen::VectorXd one_std = Eigen::VectorXd::Zero(3);
  one_std[1] = 1.0;  // sigma = exp(0) = 1
  CHECK(log_prob(p, s, g, one_std) ==
        doctest::Approx(at_mode - 0.5).epsilon(1e-12));
}

TEST_CASE("log_prob matches an independent closed-form evaluator") {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    MlpShape shape{4, 2, {7, 5}};
    const GaussianPolicy p = random_policy(shape, 100 + trial);
    Eigen::VectorXd s(2), g(2), a(2);
    for (int i = 0; i < 2; ++i) {
      s[i] = rng.uniform(-1, 1);
      g[i] = rng.uniform(-1, 1);
      a[i] = rng.uniform(-2, 2);
    }
    const auto [mean, log_std] = forward(p, s, g);
    CHECK(log_prob(p, s, g, a) ==
          doctest::Approx(oracle_log_density(a, mean, log_std)).epsilon(1e-12));
  }
}

TEST_CASE("log-std gradient has the analytic form on a constant net") {
  // Zero weights: mean equals the output bias b, so
  // d log pi / d log_std_k = -1 + (a_k - b_k)^2 / sigma_k^2.
  MlpShape shape{2, 3, {4}};
  GaussianPolicy p(shape);
  p.bias(1) << 0.3, -0.2, 0.1;
  p.log_std() << -0.5, 0.0, 0.7;

  const Eigen::VectorXd s = Eigen::VectorXd::Constant(1, 0.2);
  const Eigen::VectorXd g = Eigen::VectorXd::Constant(1, -0.4);
  Eigen::VectorXd a(3);
  a << 1.0, 0.5, -0.3;

  const Eigen::VectorXd grad = grad_log_prob(p, s, g, a);
  for (int k = 0; k < 3; ++k) {
    const double sigma = std::exp(p.log_std()[k]);
    const double diff = a[k] - p.bias(1)[k];
    const double expected = -1.0 + diff * diff / (sigma * sigma);
    CHECK(grad[p.log_std_offset() + k] ==
          doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("reverse-mode gradient matches central finite differences") {
  Rng rng(23);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    MlpShape shape{4, 2, {6, 5}};
    const GaussianPolicy p = random_policy(shape, 500 + trial, 0.7);
    Eigen::VectorXd s(2), g(2), a(2);
    for (int i = 0; i < 2; ++i) {
      s[i] = rng.uniform(-1, 1);
      g[i] = rng.uniform(-1, 1);
      a[i] = rng.uniform(-1.5, 1.5);
    }
    const Eigen::VectorXd grad = grad_log_prob(p, s, g, a);
    const Eigen::VectorXd fd = fd_gradient(p, s, g, a);
    for (int i = 0; i < p.param_count(); ++i) {
      const double denom = std::max({std::abs(grad[i]), std::abs(fd[i]), 1e-6});
      worst = std::max(worst, std::abs(grad[i] - fd[i]) / denom);
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  MlpShape shape{4, 2, {5}};
  const GaussianPolicy p = random_policy(shape, 900);
  Rng rng(31);
  const int n = 16;
  Eigen::MatrixXd X(n, 4), A(n, 2);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 4; ++j) X(i, j) = rng.uniform(-1, 1);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < 2; ++j) A(i, j) = rng.uniform(-1, 1);

  const WeightedLogProb batch =
      weighted_log_prob_grad(p, X, A, Eigen::VectorXd::Ones(n));
  Eigen::VectorXd manual = Eigen::VectorXd::Zero(p.param_count());
  for (int i = 0; i < n; ++i)
    manual += grad_log_prob(p, X.row(i).head(2).transpose(),
                            X.row(i).tail(2).transpose(), A.row(i).transpose());
  manual /= static_cast<double>(n);
  CHECK((batch.grad - manual).norm() <= 1e-12 * (1.0 + manual.norm()));

  const Eigen::MatrixXd scores = score_matrix(p, X, A);
  const Eigen::VectorXd from_scores = scores.colwise().mean().transpose();
  CHECK((from_scores - manual).norm() <= 1e-12 * (1.0 + manual.norm()));
}

TEST_CASE("density integrates to one for a 1-D action") {
  MlpShape shape{2, 1, {6}};
  const GaussianPolicy p = random_policy(shape, 1200);
  const Eigen::VectorXd s = Eigen::VectorXd::Constant(1, 0.3);
  const Eigen::VectorXd g = Eigen::VectorXd::Constant(1, -0.2);
  const auto [mean, log_std] = forward(p, s, g);
  const double sigma = std::exp(log_std[0]);

  const double lo = mean[0] - 10.0 * sigma;
  const double hi = mean[0] + 10.0 * sigma;
  const int n = 4000;  // Simpson rule, even interval count
  const double h = (hi - lo) / n;
  double integral = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double x = lo + i * h;
    const double fx =
        std::exp(log_prob(p, s, g, Eigen::VectorXd::Constant(1, x)));
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    integral += w * fx;
  }
  integral *= h / 3.0;
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("sampling moments match the network outputs") {
  MlpShape shape{4, 2, {8}};
  const GaussianPolicy p = random_policy(shape, 2500);
  const Eigen::VectorXd s = Eigen::VectorXd::Constant(2, 0.1);
  const Eigen::VectorXd g = Eigen::VectorXd::Constant(2, 0.6);
  const auto [mean, log_std] = forward(p, s, g);

  const int n = 100000;
  Rng rng(77);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(2);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(2);
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd a = sample_action(p, s, g, rng);
    sum += a;
    sum_sq += a.cwiseProduct(a);
  }
  for (int d = 0; d < 2; ++d) {
    const double sigma = std::exp(log_std[d]);
    const double emp_mean = sum[d] / n;
    const double emp_var = sum_sq[d] / n - emp_mean * emp_mean;
    const double mean_se = sigma / std::sqrt(static_cast<double>(n));
    const double var_se =
        sigma * sigma * std::sqrt(2.0 / static_cast<double>(n - 1));
    CHECK(std::abs(emp_mean - mean[d]) < 3.0 * mean_se);
    CHECK(std::abs(emp_var - sigma * sigma) < 3.0 * var_se);
  }
}

TEST_CASE("log-std stays inside its clamp range") {
  MlpShape shape{2, 2, {4}};
  GaussianPolicy p(shape);
  p.log_std() << -9.0, 9.0;
  p.clamp_log_std();
  CHECK(p.log_std()[0] == kLogStdMin);
  CHECK(p.log_std()[1] == kLogStdMax);
}

TEST_CASE("mean KL is zero against itself and positive otherwise") {
  MlpShape shape{4, 2, {6}};
  const GaussianPolicy p = random_policy(shape, 3200);
  GaussianPolicy q = p;
  Rng rng(5);
  Eigen::MatrixXd X(32, 4);
  for (int i = 0; i < 32; ++i)
    for (int j = 0; j < 4; ++j) X(i, j) = rng.uniform(-1, 1);
  CHECK(mean_kl(p, q, X) == doctest::Approx(0.0).epsilon(1e-14));
  q.params()[0] += 0.05;
  q.params()[q.log_std_offset()] += 0.1;
  CHECK(mean_kl(p, q, X) > 0.0);
}

TEST_CASE("hierarchical executor keeps subgoals fixed for H steps") {
  const EnvSpec spec = make_env_spec(EnvSpec{});
  MlpShape hs{2 * spec.state_dim(), spec.state_dim(), {8}};
  MlpShape ls{2 * spec.state_dim(), EnvSpec::kActionDim, {8}};
  const GaussianPolicy high = random_policy(hs, 1, 0.1);
  const GaussianPolicy low = random_policy(ls, 2, 0.1);
  const CompoundGoal goal = make_compound_goal(spec, {0, 1, 2, 3});

  ExecutorConfig cfg{30, 280, false};
  const Trajectory tr = run_hierarchical(high, low, spec, initial_state(spec),
                                         goal.target_state, cfg, 9);
  REQUIRE(tr.num_actions() == 280);
  REQUIRE(tr.block_starts.size() == 10);  // ceil(280/30)
  for (std::size_t b = 0; b < tr.block_starts.size(); ++b)
    CHECK(tr.block_starts[b] == static_cast<int>(b) * 30);
  for (int t = 0; t < tr.num_actions(); ++t) {
    if (t % 30 != 0) CHECK(tr.subgoals.row(t) == tr.subgoals.row(t - 1));
  }
  // the last block covers only 10 steps
  CHECK(tr.subgoals.row(279) == tr.subgoals.row(270));
}

TEST_CASE("degenerate period gives a single subgoal") {
  const EnvSpec spec = make_env_spec(EnvSpec{});
  MlpShape hs{2 * spec.state_dim(), spec.state_dim(), {6}};
  MlpShape ls{2 * spec.state_dim(), EnvSpec::kActionDim, {6}};
  const GaussianPolicy high = random_policy(hs, 3, 0.1);
  const GaussianPolicy low = random_policy(ls, 4, 0.1);
  const CompoundGoal goal = make_compound_goal(spec, {1, 2, 3, 4});

  ExecutorConfig cfg{280, 280, false};
  const Trajectory tr = run_hierarchical(high, low, spec, initial_state(spec),
                                         goal.target_state, cfg, 10);
  CHECK(tr.block_starts == std::vector<int>{0});
  for (int t = 1; t < tr.num_actions(); ++t)
    CHECK(tr.subgoals.row(t) == tr.subgoals.row(0));
}

TEST_CASE("executor reruns are reproducible from the seed") {
  const EnvSpec spec = make_env_spec(EnvSpec{});
  MlpShape hs{2 * spec.state_dim(), spec.state_dim(), {8}};
  MlpShape ls{2 * spec.state_dim(), EnvSpec::kActionDim, {8}};
  const GaussianPolicy high = random_policy(hs, 5, 0.1);
  const GaussianPolicy low = random_policy(ls, 6, 0.1);
  const CompoundGoal goal = make_compound_goal(spec, {0, 2, 4, 6});

  for (const bool deterministic : {false, true}) {
    ExecutorConfig cfg{30, 120, deterministic};
    const Trajectory a = run_hierarchical(high, low, spec, initial_state(spec),
                                          goal.target_state, cfg, 31);
    const Trajectory b = run_hierarchical(high, low, spec, initial_state(spec),
                                          goal.target_state, cfg, 31);
    CHECK(a.states == b.states);
    CHECK(a.actions == b.actions);
    CHECK(a.subgoals == b.subgoals);
  }
}

TEST_CASE("random init is reproducible and near-zero at the output") {
  MlpShape shape{6, 3, {16, 16}};
  const GaussianPolicy p = GaussianPolicy::random_init(shape, 9);
  CHECK(p.weight(2).cwiseAbs().maxCoeff() <= 0.01 / std::sqrt(16.0));
  CHECK(p.log_std() == Eigen::VectorXd::Constant(3, -1.0));
  const GaussianPolicy q = GaussianPolicy::random_init(shape, 9);
  CHECK(p.params() == q.params());
}
