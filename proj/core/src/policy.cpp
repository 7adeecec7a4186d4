#include "relay/policy.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace relay {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;  // log(2*pi)
}

std::pair<int, int> MlpShape::layer_dims(int layer) const {
  const int n = num_layers();
  if (layer < 0 || layer >= n) throw std::out_of_range("layer index");
  const int in = layer == 0 ? input_dim : hidden[layer - 1];
  const int out = layer == n - 1 ? output_dim : hidden[layer];
  return {out, in};
}

int MlpShape::param_count() const {
  int count = 0;
  for (int l = 0; l < num_layers(); ++l) {
    const auto [out, in] = layer_dims(l);
    count += out * in + out;
  }
  return count + output_dim;  // log-std
}

GaussianPolicy::GaussianPolicy(MlpShape shape) : shape_(std::move(shape)) {
  if (shape_.input_dim < 1 || shape_.output_dim < 1)
    throw std::invalid_argument("policy needs positive input/output dims");
  int offset = 0;
  for (int l = 0; l < shape_.num_layers(); ++l) {
    const auto [out, in] = shape_.layer_dims(l);
    weight_offsets_.push_back(offset);
    offset += out * in;
    bias_offsets_.push_back(offset);
    offset += out;
  }
  log_std_offset_ = offset;
  params_ = Eigen::VectorXd::Zero(shape_.param_count());
  input_mean_ = Eigen::VectorXd::Zero(shape_.input_dim);
  input_std_ = Eigen::VectorXd::Ones(shape_.input_dim);
}

GaussianPolicy GaussianPolicy::random_init(const MlpShape& shape,
                                           std::uint64_t seed,
                                           double final_layer_scale,
                                           double initial_log_std) {
  GaussianPolicy policy(shape);
  Rng rng(derive_seed(seed, 0x90711c4));
  const int layers = shape.num_layers();
  for (int l = 0; l < layers; ++l) {
    const auto [out, in] = shape.layer_dims(l);
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    const double scale = l == layers - 1 ? final_layer_scale : 1.0;
    auto w = policy.weight(l);
    for (int c = 0; c < in; ++c)
      for (int r = 0; r < out; ++r) w(r, c) = scale * rng.uniform(-bound, bound);
    policy.bias(l).setZero();
  }
  policy.log_std().setConstant(initial_log_std);
  policy.clamp_log_std();
  return policy;
}

Eigen::Map<Eigen::MatrixXd> GaussianPolicy::weight(int layer) {
  const auto [out, in] = shape_.layer_dims(layer);
  return {params_.data() + weight_offsets_[layer], out, in};
}
Eigen::Map<const Eigen::MatrixXd> GaussianPolicy::weight(int layer) const {
  const auto [out, in] = shape_.layer_dims(layer);
  return {params_.data() + weight_offsets_[layer], out, in};
}
Eigen::Map<Eigen::VectorXd> GaussianPolicy::bias(int layer) {
  const auto [out, in] = shape_.layer_dims(layer);
  (void)in;
  return {params_.data() + bias_offsets_[layer], out};
}
Eigen::Map<const Eigen::VectorXd> GaussianPolicy::bias(int layer) const {
  const auto [out, in] = shape_.layer_dims(layer);
  (void)in;
  return {params_.data() + bias_offsets_[layer], out};
}
Eigen::Map<Eigen::VectorXd> GaussianPolicy::log_std() {
  return {params_.data() + log_std_offset_, shape_.output_dim};
}
Eigen::Map<const Eigen::VectorXd> GaussianPolicy::log_std() const {
  return {params_.data() + log_std_offset_, shape_.output_dim};
}

void GaussianPolicy::set_standardization(Eigen::VectorXd mean,
                                         Eigen::VectorXd std) {
  if (mean.size() != shape_.input_dim || std.size() != shape_.input_dim)
    throw std::invalid_argument("standardization dimension mismatch");
  if ((std.array() <= 0.0).any())
    throw std::invalid_argument("standardization std must be positive");
  input_mean_ = std::move(mean);
  input_std_ = std::move(std);
}

void GaussianPolicy::clamp_log_std() {
  log_std() = log_std().cwiseMax(kLogStdMin).cwiseMin(kLogStdMax);
}

int GaussianPolicy::weight_offset(int layer) const {
  return weight_offsets_[layer];
}
int GaussianPolicy::bias_offset(int layer) const {
  return bias_offsets_[layer];
}
int GaussianPolicy::log_std_offset() const { return log_std_offset_; }

namespace {

// Forward pass over a batch; keeps the post-ReLU activations (and the
// standardized input) that backprop needs.
struct ForwardCache {
  Eigen::MatrixXd xs;                  // standardized input, N x in
  std::vector<Eigen::MatrixXd> acts;   // hidden activations, N x h_l
  Eigen::MatrixXd mean;                // N x out
};

void forward_batch(const GaussianPolicy& p, const Eigen::MatrixXd& X,
                   ForwardCache& cache) {
  if (X.cols() != p.input_dim())
    throw std::invalid_argument("input dimension mismatch");
  cache.xs = (X.rowwise() - p.input_mean().transpose()).array().rowwise() /
             p.input_std().transpose().array();
  const int layers = p.shape().num_layers();
  cache.acts.resize(layers - 1);
  const Eigen::MatrixXd* cur = &cache.xs;
  for (int l = 0; l < layers - 1; ++l) {
    cache.acts[l] = ((*cur) * p.weight(l).transpose()).rowwise() +
                    p.bias(l).transpose();
    cache.acts[l] = cache.acts[l].cwiseMax(0.0);
    cur = &cache.acts[l];
  }
  cache.mean = ((*cur) * p.weight(layers - 1).transpose()).rowwise() +
               p.bias(layers - 1).transpose();
}

// Reverse pass: dL/dmean (N x out) plus an optional dL/dlog_std row vector
// accumulated over samples -> gradient w.r.t. the flat parameter vector.
Eigen::VectorXd backward_batch(const GaussianPolicy& p,
                               const ForwardCache& cache,
                               const Eigen::MatrixXd& dmean,
                               const Eigen::VectorXd& dlog_std) {
  const int layers = p.shape().num_layers();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.param_count());
  Eigen::MatrixXd delta = dmean;
  for (int l = layers - 1; l >= 0; --l) {
    const Eigen::MatrixXd& below = l == 0 ? cache.xs : cache.acts[l - 1];
    const auto [out, in] = p.shape().layer_dims(l);
    Eigen::Map<Eigen::MatrixXd>(grad.data() + p.weight_offset(l), out, in) =
        delta.transpose() * below;
    Eigen::Map<Eigen::VectorXd>(grad.data() + p.bias_offset(l), out) =
        delta.colwise().sum().transpose();
    if (l > 0) {
      delta = (delta * p.weight(l)).array() *
              (cache.acts[l - 1].array() > 0.0).cast<double>();
    }
  }
  grad.segment(p.log_std_offset(), p.output_dim()) = dlog_std;
  return grad;
}

}  // namespace

std::pair<Eigen::VectorXd, Eigen::VectorXd> forward(
    const GaussianPolicy& policy, const Eigen::VectorXd& state,
    const Eigen::VectorXd& goal) {
  if (state.size() + goal.size() != policy.input_dim())
    throw std::invalid_argument("state+goal dimension mismatch");
  Eigen::MatrixXd X(1, policy.input_dim());
  X.row(0).head(state.size()) = state.transpose();
  X.row(0).tail(goal.size()) = goal.transpose();
  ForwardCache cache;
  forward_batch(policy, X, cache);
  return {cache.mean.row(0).transpose(), policy.log_std()};
}

double log_prob(const GaussianPolicy& policy, const Eigen::VectorXd& state,
                const Eigen::VectorXd& goal, const Eigen::VectorXd& action) {
  const auto [mean, log_std] = forward(policy, state, goal);
  if (action.size() != mean.size())
    throw std::invalid_argument("action dimension mismatch");
  const Eigen::ArrayXd z =
      (action - mean).array() / log_std.array().exp();
  return -0.5 * z.square().sum() - log_std.sum() -
         0.5 * kLog2Pi * static_cast<double>(mean.size());
}

Eigen::VectorXd grad_log_prob(const GaussianPolicy& policy,
                              const Eigen::VectorXd& state,
                              const Eigen::VectorXd& goal,
                              const Eigen::VectorXd& action) {
  Eigen::MatrixXd X(1, policy.input_dim());
  X.row(0).head(state.size()) = state.transpose();
  X.row(0).tail(goal.size()) = goal.transpose();
  Eigen::MatrixXd A = action.transpose();
  const WeightedLogProb res =
      weighted_log_prob_grad(policy, X, A, Eigen::VectorXd::Ones(1));
  return res.grad;
}

Eigen::VectorXd sample_action(const GaussianPolicy& policy,
                              const Eigen::VectorXd& state,
                              const Eigen::VectorXd& goal, Rng& rng) {
  const auto [mean, log_std] = forward(policy, state, goal);
  Eigen::VectorXd a(mean.size());
  for (Eigen::Index d = 0; d < mean.size(); ++d)
    a[d] = mean[d] + std::exp(log_std[d]) * rng.normal();
  return a;
}

Eigen::MatrixXd forward_mean_batch(const GaussianPolicy& policy,
                                   const Eigen::MatrixXd& X) {
  ForwardCache cache;
  forward_batch(policy, X, cache);
  return cache.mean;
}

Eigen::VectorXd log_prob_batch(const GaussianPolicy& policy,
                               const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& A) {
  ForwardCache cache;
  forward_batch(policy, X, cache);
  const Eigen::ArrayXd inv_std = (-policy.log_std().array()).exp();
  const Eigen::ArrayXXd z =
      (A - cache.mean).array().rowwise() * inv_std.transpose();
  const double base =
      policy.log_std().sum() + 0.5 * kLog2Pi * policy.output_dim();
  return (-0.5 * z.square().rowwise().sum() - base).matrix();
}

WeightedLogProb weighted_log_prob_grad(const GaussianPolicy& policy,
                                       const Eigen::MatrixXd& X,
                                       const Eigen::MatrixXd& A,
                                       const Eigen::VectorXd& weights) {
  if (X.rows() != A.rows() || X.rows() != weights.size())
    throw std::invalid_argument("batch size mismatch");
  const double n = static_cast<double>(X.rows());
  ForwardCache cache;
  forward_batch(policy, X, cache);

  const Eigen::ArrayXd inv_var = (-2.0 * policy.log_std().array()).exp();
  const Eigen::ArrayXXd diff = (A - cache.mean).array();
  const Eigen::ArrayXXd z2 = diff.square().rowwise() * inv_var.transpose();

  // d(w log pi)/dmean = w * (a - mu) / sigma^2
  Eigen::MatrixXd dmean =
      ((diff.rowwise() * inv_var.transpose()).colwise() * weights.array())
          .matrix() /
      n;
  // d(w log pi)/dlog_std = w * (z^2 - 1) per dimension
  Eigen::VectorXd dlog_std =
      ((z2 - 1.0).colwise() * weights.array()).colwise().sum().transpose() /
      n;

  WeightedLogProb out;
  const Eigen::ArrayXd log_probs =
      -0.5 * z2.rowwise().sum() - policy.log_std().sum() -
      0.5 * kLog2Pi * policy.output_dim();
  out.value = (log_probs * weights.array()).sum() / n;
  out.grad = backward_batch(policy, cache, dmean, dlog_std);
  return out;
}

Eigen::MatrixXd score_matrix(const GaussianPolicy& policy,
                             const Eigen::MatrixXd& X,
                             const Eigen::MatrixXd& A) {
  const Eigen::Index n = X.rows();
  Eigen::MatrixXd scores(n, policy.param_count());
  ForwardCache cache;
  forward_batch(policy, X, cache);
  const Eigen::ArrayXd inv_var = (-2.0 * policy.log_std().array()).exp();
  const int layers = policy.shape().num_layers();

  // Per-sample backprop; the net is small, so explicit rows beat assembling
  // a rank-3 tensor.
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd delta =
        ((A.row(i) - cache.mean.row(i)).transpose().array() * inv_var)
            .matrix();
    for (int l = layers - 1; l >= 0; --l) {
      const auto [out, in] = policy.shape().layer_dims(l);
      const Eigen::VectorXd below =
          l == 0 ? cache.xs.row(i).transpose()
                 : cache.acts[l - 1].row(i).transpose();
      for (int c = 0; c < in; ++c)
        for (int r = 0; r < out; ++r)
          scores(i, policy.weight_offset(l) + c * out + r) =
              delta[r] * below[c];
      for (int r = 0; r < out; ++r)
        scores(i, policy.bias_offset(l) + r) = delta[r];
      if (l > 0) {
        delta = (policy.weight(l).transpose() * delta).array() *
                (cache.acts[l - 1].row(i).transpose().array() > 0.0)
                    .cast<double>();
      }
    }
    const Eigen::ArrayXd z2 = (A.row(i) - cache.mean.row(i))
                                  .transpose()
                                  .array()
                                  .square() *
                              inv_var;
    for (int d = 0; d < policy.output_dim(); ++d)
      scores(i, policy.log_std_offset() + d) = z2[d] - 1.0;
  }
  return scores;
}

double mean_kl(const GaussianPolicy& old_policy,
               const GaussianPolicy& new_policy, const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd mean_old = forward_mean_batch(old_policy, X);
  const Eigen::MatrixXd mean_new = forward_mean_batch(new_policy, X);
  const Eigen::ArrayXd ls_old = old_policy.log_std().array();
  const Eigen::ArrayXd ls_new = new_policy.log_std().array();
  const Eigen::ArrayXd var_old = (2.0 * ls_old).exp();
  const Eigen::ArrayXd inv_var_new = (-2.0 * ls_new).exp();
  const double n = static_cast<double>(X.rows());

  const Eigen::ArrayXXd diff2 = (mean_old - mean_new).array().square();
  double kl = 0.0;
  kl += ((ls_new - ls_old).sum()) * n;
  kl += 0.5 * (diff2.rowwise() * inv_var_new.transpose()).sum();
  kl += 0.5 * n * (var_old * inv_var_new).sum();
  kl -= 0.5 * n * static_cast<double>(old_policy.output_dim());
  return kl / n;
}

std::uint64_t param_hash(const GaussianPolicy& policy) {
  const auto* bytes =
      reinterpret_cast<const unsigned char*>(policy.params().data());
  const std::size_t len = sizeof(double) * policy.params().size();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace relay
