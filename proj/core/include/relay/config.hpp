#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "relay/dataset.hpp"
#include "relay/env.hpp"
#include "relay/evaluate.hpp"
#include "relay/executor.hpp"
#include "relay/finetune.hpp"
#include "relay/imitation.hpp"
#include "relay/rewards.hpp"

namespace relay {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything one experiment needs, persisted as one human-editable JSON
// file; a saved RunConfig plus the code version pins a run exactly.
struct RunConfig {
  std::string output_dir = "out";
  int workers = 0;  // 0 = hardware concurrency

  EnvSpec env;  // element_sites regenerated from site_seed on finalize
  RelabelConfig relabel;
  ExecutorConfig exec;

  int demo_count = 400;
  double demo_noise = 0.01;
  std::uint64_t demo_seed = 2;

  int goal_count = 17;
  std::uint64_t goal_seed = 1;

  ILConfig il;

  FinetuneConfig finetune;
  RewardKind reward_low_kind = RewardKind::kSparse;
  RewardKind reward_high_kind = RewardKind::kSparse;
  double reward_epsilon = 0.1;
  int finetune_goal_count = 8;

  EvalProtocol eval;
  std::uint64_t eval_seed = 3;

  int rpl_seeds = 3;
  int baseline_seeds = 2;

  int distill_rollouts = 40;
  std::uint64_t distill_seed = 11;

  std::vector<int> ablation_windows = {10, 30, 90};
  std::vector<RewardKind> ablation_rewards = {RewardKind::kSparse,
                                              RewardKind::kEuclidean};
  int ablation_iterations = 10;
  int ablation_goal_count = 2;
};

// Fills derived fields (environment sites, reward index sets, jitters shared
// between fine-tuning and evaluation) and validates all invariants. Throws
// ConfigError with the offending key on bad input.
RunConfig finalize_run_config(RunConfig cfg);

RunConfig default_run_config();

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const std::filesystem::path& path, const RunConfig& cfg);

std::string run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const std::string& text);

}  // namespace relay
