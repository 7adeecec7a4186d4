#pragma once

#include <cstdint>
#include <vector>

#include "relay/env.hpp"
#include "relay/executor.hpp"
#include "relay/policy.hpp"

namespace relay {

struct EvalProtocol {
  int episodes_per_goal = 20;
  double start_jitter_effector = 0.2;
  double start_jitter_joints = 0.1;
  bool deterministic_policy = false;
};

struct EpisodeRecord {
  int goal_index = 0;
  int episode = 0;
  int completion = 0;  // of 4
  bool success = false;
};

// Success rate and step-completion aggregates in the style of the headline
// table: completion mean/std are over all episodes pooled.
struct EvalStats {
  double success_rate = 0.0;
  double mean_completion = 0.0;
  double std_completion = 0.0;
  std::vector<EpisodeRecord> episodes;
};

EvalStats summarize_episodes(std::vector<EpisodeRecord> episodes);

EvalStats evaluate_hierarchical(const GaussianPolicy& high,
                                const GaussianPolicy& low, const EnvSpec& spec,
                                const std::vector<CompoundGoal>& goals,
                                const ExecutorConfig& exec,
                                const EvalProtocol& protocol,
                                std::uint64_t seed, int workers = 0);

EvalStats evaluate_flat(const GaussianPolicy& policy, const EnvSpec& spec,
                        const std::vector<CompoundGoal>& goals,
                        const ExecutorConfig& exec,
                        const EvalProtocol& protocol, std::uint64_t seed,
                        int workers = 0);

// Nearest-neighbor baseline: per episode the selected demonstration's
// actions are replayed open-loop from the jittered start.
EvalStats evaluate_open_loop(const std::vector<Eigen::MatrixXd>& action_plans,
                             const EnvSpec& spec,
                             const std::vector<CompoundGoal>& goals,
                             const EvalProtocol& protocol, std::uint64_t seed,
                             int workers = 0);

}  // namespace relay
