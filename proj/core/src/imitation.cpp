#include "relay/imitation.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "relay/rng.hpp"

namespace relay {

void validate_il_config(const ILConfig& cfg) {
  if (cfg.batch_size < 1) throw std::invalid_argument("batch_size < 1");
  if (cfg.learning_rate <= 0.0)
    throw std::invalid_argument("learning_rate must be positive");
  if (cfg.epochs < 1) throw std::invalid_argument("epochs < 1");
  if (cfg.hidden_units < 1) throw std::invalid_argument("hidden_units < 1");
}

AdamOptimizer::AdamOptimizer(int dim, double lr, double b1, double b2,
                             double eps)
    : learning_rate(lr),
      beta1(b1),
      beta2(b2),
      epsilon(eps),
      m(Eigen::VectorXd::Zero(dim)),
      v(Eigen::VectorXd::Zero(dim)) {}

void AdamOptimizer::update(Eigen::VectorXd& params,
                           const Eigen::VectorXd& grad) {
  ++step_count;
  m = beta1 * m + (1.0 - beta1) * grad;
  v = beta2 * v + (1.0 - beta2) * grad.cwiseProduct(grad);
  const double bias1 = 1.0 - std::pow(beta1, static_cast<double>(step_count));
  const double bias2 = 1.0 - std::pow(beta2, static_cast<double>(step_count));
  params.array() -= learning_rate * (m.array() / bias1) /
                    ((v.array() / bias2).sqrt() + epsilon);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> input_statistics(
    const Dataset& data) {
  const int dim = 2 * data.state_dim();
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(dim);
  const std::size_t n = data.size();
  for (std::size_t i = 0; i < n; ++i) {
    const GoalTuple tuple = data.get(i);
    Eigen::VectorXd x(dim);
    x.head(data.state_dim()) = tuple.state;
    x.tail(data.state_dim()) = tuple.goal;
    sum += x;
    sum_sq += x.cwiseProduct(x);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::VectorXd mean = sum * inv_n;
  Eigen::VectorXd var = sum_sq * inv_n - mean.cwiseProduct(mean);
  Eigen::VectorXd std =
      var.cwiseMax(0.0).cwiseSqrt().cwiseMax(1e-3);  // floor constant dims
  return {std::move(mean), std::move(std)};
}

std::pair<GaussianPolicy, std::vector<EpochRecord>> train_policy(
    const Dataset& data, const ILConfig& cfg, std::uint64_t stream) {
  validate_il_config(cfg);
  if (data.empty()) throw std::invalid_argument("empty training dataset");

  MlpShape shape;
  shape.input_dim = 2 * data.state_dim();
  shape.output_dim = data.action_dim();
  shape.hidden = {cfg.hidden_units, cfg.hidden_units};

  GaussianPolicy policy = GaussianPolicy::random_init(
      shape, derive_seed(cfg.seed, stream, 0x1417));
  auto [mean, std] = input_statistics(data);
  policy.set_standardization(std::move(mean), std::move(std));

  AdamOptimizer adam(policy.param_count(), cfg.learning_rate, cfg.adam_beta1,
                     cfg.adam_beta2, cfg.adam_eps);
  Rng rng(derive_seed(cfg.seed, stream, 0xba7c));

  const std::size_t n = data.size();
  const std::size_t batch =
      std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size), n);
  const std::size_t full_batches = (n + batch - 1) / batch;
  const std::size_t batches_per_epoch =
      cfg.max_batches_per_epoch > 0
          ? std::min<std::size_t>(full_batches,
                                  static_cast<std::size_t>(
                                      cfg.max_batches_per_epoch))
          : full_batches;
  const bool capped = batches_per_epoch < full_batches;

  std::vector<std::size_t> order;
  if (!capped) {
    order.resize(n);
    std::iota(order.begin(), order.end(), 0);
  }

  std::vector<EpochRecord> records;
  records.reserve(cfg.epochs);
  std::vector<std::size_t> indices(batch);
  Eigen::MatrixXd X, A;
  const Eigen::VectorXd minus_ones = -Eigen::VectorXd::Ones(
      static_cast<Eigen::Index>(batch));

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double nll_sum = 0.0;
    std::size_t seen = 0;
    if (!capped) rng.shuffle(order);
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      std::size_t count = batch;
      if (capped) {
        for (std::size_t i = 0; i < batch; ++i)
          indices[i] = rng.uniform_index(n);
      } else {
        const std::size_t begin = b * batch;
        count = std::min(batch, n - begin);
        indices.assign(order.begin() + static_cast<std::ptrdiff_t>(begin),
                       order.begin() + static_cast<std::ptrdiff_t>(begin + count));
      }
      data.gather(indices, X, A);
      const Eigen::VectorXd w =
          count == batch ? minus_ones
                         : -Eigen::VectorXd::Ones(
                               static_cast<Eigen::Index>(count));
      // weights -1: value is the batch NLL and grad its descent direction
      const WeightedLogProb res = weighted_log_prob_grad(policy, X, A, w);
      if (!std::isfinite(res.value))
        throw std::runtime_error("imitation training diverged: NLL not finite");
      adam.update(policy.params(), res.grad);
      policy.clamp_log_std();
      nll_sum += res.value * static_cast<double>(count);
      seen += count;
      if (capped) indices.resize(batch);
    }
    records.push_back({epoch + 1, nll_sum / static_cast<double>(seen)});
  }
  return {std::move(policy), std::move(records)};
}

RilResult train_ril(const Dataset& d_low, const Dataset& d_high,
                    const ILConfig& cfg) {
  if (d_low.level() != Level::kLow || d_high.level() != Level::kHigh)
    throw std::invalid_argument("train_ril expects (low, high) datasets");
  RilResult out;
  auto [low, low_records] = train_policy(d_low, cfg, 0);
  auto [high, high_records] = train_policy(d_high, cfg, 1);
  out.low = std::move(low);
  out.high = std::move(high);
  out.report.low = std::move(low_records);
  out.report.high = std::move(high_records);
  return out;
}

std::pair<GaussianPolicy, ILReport> train_flat(const Dataset& data,
                                               const ILConfig& cfg) {
  if (data.level() != Level::kLow)
    throw std::invalid_argument("train_flat expects a low-level dataset");
  auto [policy, records] = train_policy(data, cfg, 0);
  ILReport report;
  report.low = std::move(records);
  return {std::move(policy), std::move(report)};
}

}  // namespace relay
