#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "relay/dataset.hpp"
#include "relay/policy.hpp"

namespace relay {

struct ILConfig {
  int batch_size = 128;
  double learning_rate = 0.005;
  int epochs = 50;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  int hidden_units = 256;
  // Desk-scale cap on optimizer steps per epoch; 0 runs the full pass.
  int max_batches_per_epoch = 0;
};

void validate_il_config(const ILConfig& cfg);

struct AdamOptimizer {
  explicit AdamOptimizer(int dim, double lr, double beta1 = 0.9,
                         double beta2 = 0.999, double eps = 1e-8);
  // Applies one descent step in place.
  void update(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

  double learning_rate, beta1, beta2, epsilon;
  long step_count = 0;
  Eigen::VectorXd m, v;
};

struct EpochRecord {
  int epoch = 0;
  double nll = 0.0;
};

struct ILReport {
  std::vector<EpochRecord> low;   // flat trainers fill only this series
  std::vector<EpochRecord> high;
};

// Maximum-likelihood training of one Gaussian policy on one dataset.
// Standardization is fit from the dataset once and frozen on the policy.
std::pair<GaussianPolicy, std::vector<EpochRecord>> train_policy(
    const Dataset& data, const ILConfig& cfg, std::uint64_t stream);

struct RilResult {
  GaussianPolicy high;
  GaussianPolicy low;
  ILReport report;
};

// Relay imitation learning: the two levels are trained independently, each
// maximizing the likelihood of its own relabeled tuples.
RilResult train_ril(const Dataset& d_low, const Dataset& d_high,
                    const ILConfig& cfg);

// Flat goal-conditioned behavior cloning (the BC / GCBC baselines,
// depending on how the dataset was relabeled).
std::pair<GaussianPolicy, ILReport> train_flat(const Dataset& data,
                                               const ILConfig& cfg);

// Mean/std of the [state | goal] inputs over the dataset (std floored away
// from zero).
std::pair<Eigen::VectorXd, Eigen::VectorXd> input_statistics(
    const Dataset& data);

}  // namespace relay
