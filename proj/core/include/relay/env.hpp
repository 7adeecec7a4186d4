#pragma once

#include <Eigen/Core>
#include <array>
#include <cstdint>
#include <vector>

#include "relay/trajectory.hpp"

namespace relay {

// Deterministic desk-scale manipulation scene: a planar effector moves in
// the unit square and can drive the joint of whichever element's
// interaction zone it currently occupies. Sites are separated by more than
// twice the interaction radius, so at most one element is in reach.
struct EnvSpec {
  int num_elements = 7;                // M
  double interaction_radius = 0.15;    // zone radius around each site
  double max_effector_speed = 0.05;    // per-component displacement bound
  double manipulation_gain = 0.05;     // joint change per step at full effort
  int episode_length = 280;            // T
  double completion_tolerance = 0.1;   // scoring tolerance on joints
  std::uint64_t site_seed = 7;
  Eigen::Matrix<double, Eigen::Dynamic, 2> element_sites;  // M x 2

  int state_dim() const { return 2 + num_elements; }
  static constexpr int kActionDim = 3;
};

// Fills element_sites from site_seed (unless already provided) and checks
// every invariant; the returned spec is treated as immutable.
EnvSpec make_env_spec(EnvSpec draft);
void validate_env_spec(const EnvSpec& spec);

struct EnvState {
  Eigen::Vector2d effector;   // in [0,1]^2
  Eigen::VectorXd joints;     // M values in [0,1]
  int t = 0;

  Eigen::VectorXd as_vector() const;  // [effector; joints]
};

EnvState initial_state(const EnvSpec& spec);
EnvState state_from_vector(const EnvSpec& spec, const Eigen::VectorXd& v,
                           int t = 0);

struct Action {
  Eigen::Vector2d delta;  // each component within +-max_effector_speed
  double effort = 0.0;    // in [-1, 1]

  Eigen::Vector3d as_vector() const {
    return Eigen::Vector3d(delta.x(), delta.y(), effort);
  }
};

// Clamps a raw 3-vector control onto the admissible action box.
Action clamp_action(const EnvSpec& spec, const Eigen::Vector3d& raw);

// Pure transition function. Clamps everything, advances t by one, and
// updates at most the single joint whose zone contains the effector.
EnvState step(const EnvSpec& spec, const EnvState& state, const Action& action);

// A task: four elements that must reach joint value 1.0. The target state
// places the effector at the centroid of the active sites and all inactive
// joints at 0.
struct CompoundGoal {
  Eigen::VectorXd target_state;        // dim 2 + M
  std::array<int, 4> active_elements;  // sorted, distinct
};

CompoundGoal make_compound_goal(const EnvSpec& spec,
                                std::array<int, 4> elements);

// Distinct 4-element subsets, reproducible from the seed. Throws when count
// exceeds C(M, 4).
std::vector<CompoundGoal> sample_compound_goals(const EnvSpec& spec, int count,
                                                std::uint64_t seed);

std::uint64_t subset_count_choose4(int num_elements);

// Number of active elements whose joint is strictly within tolerance of its
// target.
int step_completion(const EnvState& state, const CompoundGoal& goal,
                    double tolerance);
int step_completion(const Eigen::VectorXd& state_vec, const CompoundGoal& goal,
                    double tolerance);

// Play-style scripted demonstration: visits the goal's four elements in a
// seed-determined order, steering by proportional control with Gaussian
// control noise, and works each joint to its target before moving on. The
// emitted trajectory carries no goal annotation. If the budget of
// episode_length steps runs out first, the trajectory is truncated and
// flagged.
Trajectory scripted_demo(const EnvSpec& spec, const CompoundGoal& goal,
                         double noise_scale, std::uint64_t seed);

}  // namespace relay
