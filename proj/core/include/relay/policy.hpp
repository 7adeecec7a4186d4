#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <utility>
#include <vector>

#include "relay/rng.hpp"

namespace relay {

// Fully-connected net: input -> hidden (ReLU) ... -> linear output. An
// empty hidden list gives a plain linear map, handy for tiny test policies.
struct MlpShape {
  int input_dim = 0;
  int output_dim = 0;
  std::vector<int> hidden = {256, 256};

  int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
  std::pair<int, int> layer_dims(int layer) const;  // (out, in)
  int param_count() const;  // all weights + biases + per-output log-std
};

inline constexpr double kLogStdMin = -5.0;
inline constexpr double kLogStdMax = 2.0;

// Diagonal-Gaussian policy: the MLP maps a standardized [state | goal]
// input to the mean, the (state-independent) log-std is part of the
// parameter vector. All parameters live in one flat vector so optimizer
// and natural-gradient code can treat the policy as a point in R^P.
class GaussianPolicy {
 public:
  GaussianPolicy() = default;
  explicit GaussianPolicy(MlpShape shape);

  static GaussianPolicy random_init(const MlpShape& shape, std::uint64_t seed,
                                    double final_layer_scale = 0.01,
                                    double initial_log_std = -1.0);

  const MlpShape& shape() const { return shape_; }
  int input_dim() const { return shape_.input_dim; }
  int output_dim() const { return shape_.output_dim; }
  int param_count() const { return static_cast<int>(params_.size()); }

  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  Eigen::Map<Eigen::MatrixXd> weight(int layer);
  Eigen::Map<const Eigen::MatrixXd> weight(int layer) const;
  Eigen::Map<Eigen::VectorXd> bias(int layer);
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<Eigen::VectorXd> log_std();
  Eigen::Map<const Eigen::VectorXd> log_std() const;

  // Frozen input standardization; identity until set.
  const Eigen::VectorXd& input_mean() const { return input_mean_; }
  const Eigen::VectorXd& input_std() const { return input_std_; }
  void set_standardization(Eigen::VectorXd mean, Eigen::VectorXd std);

  void clamp_log_std();

  // Offset of a named chunk inside the flat vector (for serialization).
  int weight_offset(int layer) const;
  int bias_offset(int layer) const;
  int log_std_offset() const;

 private:
  MlpShape shape_;
  Eigen::VectorXd params_;
  Eigen::VectorXd input_mean_, input_std_;
  std::vector<int> weight_offsets_, bias_offsets_;
  int log_std_offset_ = 0;
};

// --- single-input operations ---

// Mean action and log-std for one (state, goal) pair.
std::pair<Eigen::VectorXd, Eigen::VectorXd> forward(
    const GaussianPolicy& policy, const Eigen::VectorXd& state,
    const Eigen::VectorXd& goal);

double log_prob(const GaussianPolicy& policy, const Eigen::VectorXd& state,
                const Eigen::VectorXd& goal, const Eigen::VectorXd& action);

// Exact reverse-mode gradient of log_prob with respect to the flat
// parameter vector.
Eigen::VectorXd grad_log_prob(const GaussianPolicy& policy,
                              const Eigen::VectorXd& state,
                              const Eigen::VectorXd& goal,
                              const Eigen::VectorXd& action);

Eigen::VectorXd sample_action(const GaussianPolicy& policy,
                              const Eigen::VectorXd& state,
                              const Eigen::VectorXd& goal, Rng& rng);

// --- batched operations; X rows are [state | goal] ---

Eigen::MatrixXd forward_mean_batch(const GaussianPolicy& policy,
                                   const Eigen::MatrixXd& X);

Eigen::VectorXd log_prob_batch(const GaussianPolicy& policy,
                               const Eigen::MatrixXd& X,
                               const Eigen::MatrixXd& A);

struct WeightedLogProb {
  double value = 0.0;        // (1/N) sum_i w_i log pi(a_i | x_i)
  Eigen::VectorXd grad;      // gradient of value w.r.t. params
};

WeightedLogProb weighted_log_prob_grad(const GaussianPolicy& policy,
                                       const Eigen::MatrixXd& X,
                                       const Eigen::MatrixXd& A,
                                       const Eigen::VectorXd& weights);

// Per-sample score rows grad log pi(a_i | x_i); N x P.
Eigen::MatrixXd score_matrix(const GaussianPolicy& policy,
                             const Eigen::MatrixXd& X,
                             const Eigen::MatrixXd& A);

// Mean KL(old || new) of the two conditional Gaussians over the rows of X.
double mean_kl(const GaussianPolicy& old_policy,
               const GaussianPolicy& new_policy, const Eigen::MatrixXd& X);

// FNV-1a over the parameter bytes; used to assert parameter freezes.
std::uint64_t param_hash(const GaussianPolicy& policy);

}  // namespace relay
