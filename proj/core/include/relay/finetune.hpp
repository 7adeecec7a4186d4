#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "relay/dataset.hpp"
#include "relay/env.hpp"
#include "relay/executor.hpp"
#include "relay/npg.hpp"
#include "relay/policy.hpp"
#include "relay/rewards.hpp"

namespace relay {

// NPG-RPL drops the demonstration likelihood term, DAPG-RPL keeps it with
// fixed buffers, IRIL-RPL additionally relay-relabels each iteration's
// rollouts into the buffers.
enum class FinetuneVariant { kNpgRpl, kDapgRpl, kIrilRpl };

enum class FinetuneMode { kRelay, kFlat, kPretrainLowLevel };

std::string to_string(FinetuneVariant v);
FinetuneVariant finetune_variant_from_string(const std::string& s);
std::string to_string(FinetuneMode m);
FinetuneMode finetune_mode_from_string(const std::string& s);

struct FinetuneConfig {
  int trajectories_per_iter = 100;
  double discount = 0.995;
  double lambda_low = 1e-4;
  double lambda_high = 1e-4;
  double kl_step = 0.01;
  int cg_iters = 10;
  double cg_damping = 1e-4;
  int max_backtracks = 12;
  int iterations = 30;
  FinetuneVariant variant = FinetuneVariant::kDapgRpl;
  FinetuneMode mode = FinetuneMode::kRelay;
  bool finetune_high = false;
  RewardConfig reward_low;
  RewardConfig reward_high;
  int fisher_batch = 4096;
  int demo_batch = 2048;
  // Episode starts are jittered so open-loop replay is not trivially
  // optimal in a deterministic environment.
  double start_jitter_effector = 0.2;
  double start_jitter_joints = 0.1;
  std::uint64_t seed = 0;
  int workers = 0;
};

void validate_finetune_config(const FinetuneConfig& cfg);

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct IterationStats {
  int iteration = 0;
  double mean_return_low = 0.0;   // per-episode sum of low-level rewards
  double mean_return_high = 0.0;  // per-episode sum of high-level rewards
  double success_rate = 0.0;      // over the iteration's rollouts
  double mean_completion = 0.0;
  double kl = 0.0;
  double grad_norm = 0.0;
  double natural_norm = 0.0;
  double step_scale = 0.0;
  bool accepted = false;
  std::size_t dl_size = 0;
  std::size_t dh_size = 0;
};

struct FinetuneResult {
  GaussianPolicy high;
  GaussianPolicy low;
  std::vector<IterationStats> stats;
};

EnvState jittered_initial_state(const EnvSpec& spec, double effector_jitter,
                                double joint_jitter, Rng& rng);

// n seeded hierarchical rollouts toward the goal, with subgoal traces and
// both reward channels annotated (low vs the active subgoal at every step,
// high vs the episode goal at each decision boundary).
std::vector<Trajectory> collect_rollouts(const GaussianPolicy& high,
                                         const GaussianPolicy& low,
                                         const EnvSpec& spec,
                                         const CompoundGoal& goal, int n,
                                         const FinetuneConfig& cfg,
                                         const ExecutorConfig& exec,
                                         std::uint64_t iter_seed);

// Relay reinforcement fine-tuning of RIL-initialized policies on one goal.
// By default only the low level is updated; the high level stays fixed and
// keeps sampling subgoals stochastically.
FinetuneResult finetune_goal(const GaussianPolicy& high,
                             const GaussianPolicy& low, const EnvSpec& spec,
                             const CompoundGoal& goal, Dataset d_low,
                             Dataset d_high, const RelabelConfig& relabel,
                             const FinetuneConfig& cfg,
                             const ExecutorConfig& exec);

// Flat fine-tuning (plain with lambda = 0, demonstration-augmented
// otherwise) of a flat goal-conditioned policy.
FinetuneResult finetune_flat(const GaussianPolicy& policy, const EnvSpec& spec,
                             const CompoundGoal& goal, Dataset d_flat,
                             const FinetuneConfig& cfg,
                             const ExecutorConfig& exec);

// Keeps the imitation-learned low level frozen and trains a fresh high
// level from scratch with the RL term only.
FinetuneResult pretrain_low_level_mode(const GaussianPolicy& low,
                                       const EnvSpec& spec,
                                       const CompoundGoal& goal,
                                       const FinetuneConfig& cfg,
                                       const ExecutorConfig& exec);

// Discounted suffix sums within one reward segment.
Eigen::VectorXd discounted_returns(const Eigen::VectorXd& rewards,
                                   double discount);

}  // namespace relay
