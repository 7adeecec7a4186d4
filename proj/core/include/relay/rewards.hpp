#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "relay/env.hpp"

namespace relay {

enum class RewardKind { kSparse, kEuclidean, kElementwiseSparse };

std::string to_string(RewardKind kind);
RewardKind reward_kind_from_string(const std::string& s);

// Goal-reaching rewards over full state vectors. The element-wise variant
// scores each scene element's own state indices separately and never looks
// at the effector coordinates.
struct RewardConfig {
  RewardKind kind = RewardKind::kSparse;
  double epsilon = 0.1;
  std::vector<std::vector<int>> element_indices;  // per element
};

void validate_reward_config(const RewardConfig& cfg, int state_dim);

RewardConfig default_reward_config(const EnvSpec& spec,
                                   RewardKind kind = RewardKind::kSparse);

// sparse: 1 if ||s-g|| < eps else 0; euclidean: -||s-g||;
// elementwise_sparse: count of elements with ||s[idx]-g[idx]|| < eps.
double reward(const RewardConfig& cfg, const Eigen::VectorXd& s,
              const Eigen::VectorXd& g);

}  // namespace relay
