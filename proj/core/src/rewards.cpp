#include "relay/rewards.hpp"

#include <stdexcept>

namespace relay {

std::string to_string(RewardKind kind) {
  switch (kind) {
    case RewardKind::kSparse: return "sparse";
    case RewardKind::kEuclidean: return "euclidean";
    case RewardKind::kElementwiseSparse: return "elementwise_sparse";
  }
  throw std::logic_error("unknown reward kind");
}

RewardKind reward_kind_from_string(const std::string& s) {
  if (s == "sparse") return RewardKind::kSparse;
  if (s == "euclidean") return RewardKind::kEuclidean;
  if (s == "elementwise_sparse") return RewardKind::kElementwiseSparse;
  throw std::invalid_argument("unknown reward kind: " + s);
}

void validate_reward_config(const RewardConfig& cfg, int state_dim) {
  if (cfg.epsilon <= 0.0) throw std::invalid_argument("reward epsilon <= 0");
  std::vector<bool> used(static_cast<std::size_t>(state_dim), false);
  for (const auto& idx : cfg.element_indices) {
    for (int i : idx) {
      if (i < 2 || i >= state_dim)
        throw std::invalid_argument(
            "element indices must address joint coordinates only");
      if (used[static_cast<std::size_t>(i)])
        throw std::invalid_argument("element index sets must be disjoint");
      used[static_cast<std::size_t>(i)] = true;
    }
  }
}

RewardConfig default_reward_config(const EnvSpec& spec, RewardKind kind) {
  RewardConfig cfg;
  cfg.kind = kind;
  cfg.epsilon = spec.completion_tolerance;
  cfg.element_indices.reserve(spec.num_elements);
  for (int j = 0; j < spec.num_elements; ++j)
    cfg.element_indices.push_back({2 + j});
  validate_reward_config(cfg, spec.state_dim());
  return cfg;
}

double reward(const RewardConfig& cfg, const Eigen::VectorXd& s,
              const Eigen::VectorXd& g) {
  if (s.size() != g.size())
    throw std::invalid_argument("reward: state/goal dimension mismatch");
  switch (cfg.kind) {
    case RewardKind::kSparse:
      return (s - g).norm() < cfg.epsilon ? 1.0 : 0.0;
    case RewardKind::kEuclidean:
      return -(s - g).norm();
    case RewardKind::kElementwiseSparse: {
      double total = 0.0;
      for (const auto& idx : cfg.element_indices) {
        double sq = 0.0;
        for (int i : idx) {
          const double d = s[i] - g[i];
          sq += d * d;
        }
        if (std::sqrt(sq) < cfg.epsilon) total += 1.0;
      }
      return total;
    }
  }
  throw std::logic_error("unknown reward kind");
}

}  // namespace relay
