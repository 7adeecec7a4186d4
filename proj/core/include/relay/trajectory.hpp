#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>
#include <vector>

namespace relay {

// One episode or demonstration: states s_0..s_T (rows) and actions
// a_0..a_{T-1} (rows), so states always has one more row than actions.
// Rollouts collected by the hierarchical executor additionally carry the
// per-step subgoal trace and, after reward annotation, per-step low-level
// rewards plus one high-level reward per decision block.
struct Trajectory {
  Eigen::MatrixXd states;   // (T+1) x state_dim
  Eigen::MatrixXd actions;  // T x action_dim

  std::uint64_t seed = 0;
  bool is_demo = false;
  bool truncated = false;

  Eigen::MatrixXd subgoals;      // T x state_dim, or empty
  std::vector<int> block_starts; // indices where the high level decided
  Eigen::VectorXd low_rewards;   // length T, or empty
  Eigen::VectorXd high_rewards;  // one per block, or empty

  int num_actions() const { return static_cast<int>(actions.rows()); }
  int num_states() const { return static_cast<int>(states.rows()); }
  int state_dim() const { return static_cast<int>(states.cols()); }
  int action_dim() const { return static_cast<int>(actions.cols()); }

  Eigen::VectorXd final_state() const {
    return states.row(states.rows() - 1).transpose();
  }

  bool consistent() const {
    return states.rows() == actions.rows() + 1 && states.rows() >= 1;
  }
};

using TrajectoryPool = std::shared_ptr<const std::vector<Trajectory>>;

inline TrajectoryPool make_pool(std::vector<Trajectory> trajectories) {
  return std::make_shared<const std::vector<Trajectory>>(
      std::move(trajectories));
}

}  // namespace relay
