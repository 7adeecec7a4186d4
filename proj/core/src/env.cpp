#include "relay/env.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "relay/rng.hpp"

namespace relay {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

void validate_env_spec(const EnvSpec& spec) {
  if (spec.num_elements < 1) throw std::invalid_argument("num_elements < 1");
  if (spec.interaction_radius <= 0.0)
    throw std::invalid_argument("interaction_radius must be positive");
  if (spec.max_effector_speed <= 0.0)
    throw std::invalid_argument("max_effector_speed must be positive");
  if (spec.manipulation_gain <= 0.0)
    throw std::invalid_argument("manipulation_gain must be positive");
  if (spec.episode_length < 1)
    throw std::invalid_argument("episode_length < 1");
  if (spec.completion_tolerance <= 0.0)
    throw std::invalid_argument("completion_tolerance must be positive");
  if (spec.element_sites.rows() != spec.num_elements)
    throw std::invalid_argument("element_sites count != num_elements");
  for (int i = 0; i < spec.num_elements; ++i) {
    const Eigen::Vector2d a = spec.element_sites.row(i).transpose();
    if (a.x() < 0.0 || a.x() > 1.0 || a.y() < 0.0 || a.y() > 1.0)
      throw std::invalid_argument("element site outside the unit square");
    for (int j = i + 1; j < spec.num_elements; ++j) {
      const Eigen::Vector2d b = spec.element_sites.row(j).transpose();
      if ((a - b).norm() <= 2.0 * spec.interaction_radius)
        throw std::invalid_argument(
            "element sites closer than twice the interaction radius");
    }
  }
}

EnvSpec make_env_spec(EnvSpec draft) {
  if (draft.element_sites.rows() == 0) {
    // Rejection-sample sites with separation strictly above 2*radius. A
    // small margin keeps zones inside the square and gives the sampler
    // slack against the > comparison.
    const double margin = 0.05;
    const double min_dist = 2.0 * draft.interaction_radius * 1.05;
    Rng rng(derive_seed(draft.site_seed, 0x5173));
    const int max_restarts = 1000;
    for (int restart = 0; restart < max_restarts; ++restart) {
      Eigen::Matrix<double, Eigen::Dynamic, 2> sites(draft.num_elements, 2);
      int placed = 0;
      for (; placed < draft.num_elements; ++placed) {
        bool ok = false;
        for (int attempt = 0; attempt < 200 && !ok; ++attempt) {
          const Eigen::Vector2d p(rng.uniform(margin, 1.0 - margin),
                                  rng.uniform(margin, 1.0 - margin));
          ok = true;
          for (int j = 0; j < placed; ++j) {
            if ((p - Eigen::Vector2d(sites.row(j).transpose())).norm() <
                min_dist) {
              ok = false;
              break;
            }
          }
          if (ok) sites.row(placed) = p.transpose();
        }
        if (!ok) break;
      }
      if (placed == draft.num_elements) {
        draft.element_sites = sites;
        break;
      }
    }
    if (draft.element_sites.rows() == 0)
      throw std::runtime_error(
          "could not place element sites; radius too large for element count");
  }
  validate_env_spec(draft);
  return draft;
}

Eigen::VectorXd EnvState::as_vector() const {
  Eigen::VectorXd v(2 + joints.size());
  v.head<2>() = effector;
  v.tail(joints.size()) = joints;
  return v;
}

EnvState initial_state(const EnvSpec& spec) {
  EnvState s;
  s.effector = Eigen::Vector2d(0.5, 0.5);
  s.joints = Eigen::VectorXd::Zero(spec.num_elements);
  s.t = 0;
  return s;
}

EnvState state_from_vector(const EnvSpec& spec, const Eigen::VectorXd& v,
                           int t) {
  if (v.size() != spec.state_dim())
    throw std::invalid_argument("state vector has wrong dimension");
  EnvState s;
  s.effector = v.head<2>();
  s.joints = v.tail(spec.num_elements);
  s.t = t;
  return s;
}

Action clamp_action(const EnvSpec& spec, const Eigen::Vector3d& raw) {
  Action a;
  const double m = spec.max_effector_speed;
  a.delta.x() = std::clamp(raw.x(), -m, m);
  a.delta.y() = std::clamp(raw.y(), -m, m);
  a.effort = std::clamp(raw.z(), -1.0, 1.0);
  return a;
}

EnvState step(const EnvSpec& spec, const EnvState& state,
              const Action& action) {
  const Action a = clamp_action(spec, action.as_vector());
  EnvState next;
  next.effector.x() = clamp01(state.effector.x() + a.delta.x());
  next.effector.y() = clamp01(state.effector.y() + a.delta.y());
  next.joints = state.joints;
  for (int j = 0; j < spec.num_elements; ++j) {
    const Eigen::Vector2d site = spec.element_sites.row(j).transpose();
    if ((next.effector - site).norm() < spec.interaction_radius) {
      next.joints[j] =
          clamp01(state.joints[j] + spec.manipulation_gain * a.effort);
      break;  // sites are separated by > 2*radius, so at most one matches
    }
  }
  next.t = state.t + 1;
  return next;
}

CompoundGoal make_compound_goal(const EnvSpec& spec,
                                std::array<int, 4> elements) {
  std::sort(elements.begin(), elements.end());
  for (int i = 0; i < 4; ++i) {
    if (elements[i] < 0 || elements[i] >= spec.num_elements)
      throw std::invalid_argument("goal element index out of range");
    if (i > 0 && elements[i] == elements[i - 1])
      throw std::invalid_argument("goal element indices must be distinct");
  }
  CompoundGoal goal;
  goal.active_elements = elements;
  goal.target_state = Eigen::VectorXd::Zero(spec.state_dim());
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (int e : elements) {
    centroid += spec.element_sites.row(e).transpose();
    goal.target_state[2 + e] = 1.0;
  }
  goal.target_state.head<2>() = centroid / 4.0;
  return goal;
}

std::uint64_t subset_count_choose4(int num_elements) {
  if (num_elements < 4) return 0;
  const std::uint64_t m = static_cast<std::uint64_t>(num_elements);
  return m * (m - 1) * (m - 2) * (m - 3) / 24;
}

std::vector<CompoundGoal> sample_compound_goals(const EnvSpec& spec, int count,
                                                std::uint64_t seed) {
  const std::uint64_t total = subset_count_choose4(spec.num_elements);
  if (count < 0 || static_cast<std::uint64_t>(count) > total)
    throw std::invalid_argument(
        "requested more compound goals than distinct 4-element subsets");
  std::vector<std::array<int, 4>> subsets;
  subsets.reserve(total);
  const int m = spec.num_elements;
  for (int a = 0; a < m; ++a)
    for (int b = a + 1; b < m; ++b)
      for (int c = b + 1; c < m; ++c)
        for (int d = c + 1; d < m; ++d)
          subsets.push_back({a, b, c, d});
  Rng rng(derive_seed(seed, 0x60a1));
  rng.shuffle(subsets);
  std::vector<CompoundGoal> goals;
  goals.reserve(count);
  for (int i = 0; i < count; ++i)
    goals.push_back(make_compound_goal(spec, subsets[i]));
  return goals;
}

int step_completion(const EnvState& state, const CompoundGoal& goal,
                    double tolerance) {
  return step_completion(state.as_vector(), goal, tolerance);
}

int step_completion(const Eigen::VectorXd& state_vec, const CompoundGoal& goal,
                    double tolerance) {
  int done = 0;
  for (int e : goal.active_elements) {
    if (std::abs(state_vec[2 + e] - goal.target_state[2 + e]) < tolerance)
      ++done;
  }
  return done;
}

Trajectory scripted_demo(const EnvSpec& spec, const CompoundGoal& goal,
                         double noise_scale, std::uint64_t seed) {
  if (noise_scale < 0.0)
    throw std::invalid_argument("noise_scale must be non-negative");
  Rng rng(derive_seed(seed, 0xde30));

  std::vector<int> order(goal.active_elements.begin(),
                         goal.active_elements.end());
  rng.shuffle(order);

  // Work a joint until it is well inside the completion tolerance; once the
  // effector leaves the zone the joint cannot drift, so half the tolerance
  // leaves room for control noise on the last push.
  const double push_tol = 0.5 * spec.completion_tolerance;

  EnvState state = initial_state(spec);
  std::vector<Eigen::VectorXd> states;
  std::vector<Eigen::Vector3d> actions;
  states.push_back(state.as_vector());

  std::size_t target_idx = 0;
  bool truncated = false;
  while (target_idx < order.size()) {
    const int j = order[target_idx];
    const double target = goal.target_state[2 + j];
    if (std::abs(state.joints[j] - target) < push_tol) {
      ++target_idx;
      continue;
    }
    if (state.t >= spec.episode_length) {
      truncated = true;
      break;
    }
    const Eigen::Vector2d site = spec.element_sites.row(j).transpose();
    Eigen::Vector3d control = Eigen::Vector3d::Zero();
    control.head<2>() = site - state.effector;
    if ((state.effector - site).norm() < spec.interaction_radius) {
      const double err = target - state.joints[j];
      control.z() = std::clamp(err / spec.manipulation_gain, -1.0, 1.0);
    }
    if (noise_scale > 0.0) {
      control.x() += noise_scale * rng.normal();
      control.y() += noise_scale * rng.normal();
      control.z() += noise_scale * rng.normal();
    }
    const Action a = clamp_action(spec, control);
    state = step(spec, state, a);
    actions.push_back(a.as_vector());
    states.push_back(state.as_vector());
  }

  Trajectory traj;
  traj.states.resize(static_cast<Eigen::Index>(states.size()),
                     spec.state_dim());
  for (std::size_t i = 0; i < states.size(); ++i)
    traj.states.row(static_cast<Eigen::Index>(i)) = states[i].transpose();
  traj.actions.resize(static_cast<Eigen::Index>(actions.size()),
                      EnvSpec::kActionDim);
  for (std::size_t i = 0; i < actions.size(); ++i)
    traj.actions.row(static_cast<Eigen::Index>(i)) = actions[i].transpose();
  traj.seed = seed;
  traj.is_demo = true;
  traj.truncated = truncated;
  return traj;
}

}  // namespace relay
