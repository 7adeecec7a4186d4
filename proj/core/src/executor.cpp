#include "relay/executor.hpp"

#include <stdexcept>

namespace relay {

void validate_executor_config(const ExecutorConfig& cfg) {
  if (cfg.high_period < 1) throw std::invalid_argument("high_period < 1");
  if (cfg.episode_length < cfg.high_period)
    throw std::invalid_argument("episode_length must be >= high_period");
}

Trajectory run_hierarchical(const GaussianPolicy& high,
                            const GaussianPolicy& low, const EnvSpec& spec,
                            const EnvState& start,
                            const Eigen::VectorXd& goal_high,
                            const ExecutorConfig& cfg, std::uint64_t seed) {
  validate_executor_config(cfg);
  if (goal_high.size() != spec.state_dim())
    throw std::invalid_argument("goal dimension mismatch");
  const int T = cfg.episode_length;
  const int ds = spec.state_dim();

  Trajectory traj;
  traj.states.resize(T + 1, ds);
  traj.actions.resize(T, EnvSpec::kActionDim);
  traj.subgoals.resize(T, ds);
  traj.seed = seed;

  Rng rng(derive_seed(seed, 0xe8ec));
  EnvState state = start;
  traj.states.row(0) = state.as_vector().transpose();
  Eigen::VectorXd subgoal;
  for (int t = 0; t < T; ++t) {
    const Eigen::VectorXd sv = state.as_vector();
    if (t % cfg.high_period == 0) {
      if (cfg.deterministic) {
        subgoal = forward(high, sv, goal_high).first;
      } else {
        subgoal = sample_action(high, sv, goal_high, rng);
      }
      traj.block_starts.push_back(t);
    }
    Eigen::VectorXd a = cfg.deterministic
                            ? forward(low, sv, subgoal).first
                            : sample_action(low, sv, subgoal, rng);
    const Action act = clamp_action(spec, Eigen::Vector3d(a[0], a[1], a[2]));
    state = step(spec, state, act);
    traj.subgoals.row(t) = subgoal.transpose();
    traj.actions.row(t) = act.as_vector().transpose();
    traj.states.row(t + 1) = state.as_vector().transpose();
  }
  return traj;
}

Trajectory run_flat(const GaussianPolicy& policy, const EnvSpec& spec,
                    const EnvState& start, const Eigen::VectorXd& goal,
                    const ExecutorConfig& cfg, std::uint64_t seed) {
  validate_executor_config(cfg);
  const int T = cfg.episode_length;
  const int ds = spec.state_dim();

  Trajectory traj;
  traj.states.resize(T + 1, ds);
  traj.actions.resize(T, EnvSpec::kActionDim);
  traj.seed = seed;

  Rng rng(derive_seed(seed, 0xf1a7));
  EnvState state = start;
  traj.states.row(0) = state.as_vector().transpose();
  for (int t = 0; t < T; ++t) {
    const Eigen::VectorXd sv = state.as_vector();
    Eigen::VectorXd a = cfg.deterministic
                            ? forward(policy, sv, goal).first
                            : sample_action(policy, sv, goal, rng);
    const Action act = clamp_action(spec, Eigen::Vector3d(a[0], a[1], a[2]));
    state = step(spec, state, act);
    traj.actions.row(t) = act.as_vector().transpose();
    traj.states.row(t + 1) = state.as_vector().transpose();
  }
  return traj;
}

Trajectory run_open_loop(const Eigen::MatrixXd& actions, const EnvSpec& spec,
                         const EnvState& start) {
  const int T = static_cast<int>(actions.rows());
  Trajectory traj;
  traj.states.resize(T + 1, spec.state_dim());
  traj.actions.resize(T, EnvSpec::kActionDim);

  EnvState state = start;
  traj.states.row(0) = state.as_vector().transpose();
  for (int t = 0; t < T; ++t) {
    const Action act = clamp_action(
        spec, Eigen::Vector3d(actions(t, 0), actions(t, 1), actions(t, 2)));
    state = step(spec, state, act);
    traj.actions.row(t) = act.as_vector().transpose();
    traj.states.row(t + 1) = state.as_vector().transpose();
  }
  return traj;
}

}  // namespace relay
