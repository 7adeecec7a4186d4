#pragma once

#include <cstdint>

#include "relay/env.hpp"
#include "relay/policy.hpp"
#include "relay/trajectory.hpp"

namespace relay {

// Bi-level execution: the high level commits to a subgoal every
// high_period steps, the low level acts at every step against the current
// subgoal.
struct ExecutorConfig {
  int high_period = 30;      // H
  int episode_length = 280;  // T
  bool deterministic = false;  // mean actions instead of samples
};

void validate_executor_config(const ExecutorConfig& cfg);

// Runs one episode from `start`. The trajectory records the subgoal trace
// (one row per step) and the block start indices; rewards are left empty
// for the fine-tuning code to annotate.
Trajectory run_hierarchical(const GaussianPolicy& high,
                            const GaussianPolicy& low, const EnvSpec& spec,
                            const EnvState& start,
                            const Eigen::VectorXd& goal_high,
                            const ExecutorConfig& cfg, std::uint64_t seed);

// Flat baseline executor: one policy conditioned directly on the episode
// goal.
Trajectory run_flat(const GaussianPolicy& policy, const EnvSpec& spec,
                    const EnvState& start, const Eigen::VectorXd& goal,
                    const ExecutorConfig& cfg, std::uint64_t seed);

// Replays a recorded action sequence open-loop.
Trajectory run_open_loop(const Eigen::MatrixXd& actions, const EnvSpec& spec,
                         const EnvState& start);

}  // namespace relay
