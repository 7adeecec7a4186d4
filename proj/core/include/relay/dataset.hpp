#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "relay/trajectory.hpp"

namespace relay {

// Sliding-window sizes for goal relabeling: every state reached within
// low_window steps becomes a low-level goal, every state within high_window
// steps a high-level goal.
struct RelabelConfig {
  int low_window = 30;    // W_l
  int high_window = 260;  // W_h
};

void validate_relabel_config(const RelabelConfig& cfg);

enum class Level { kLow, kHigh };

// Where a tuple came from: trajectory index (global across appends), the
// source step t, and the window offset w, so every field can be rebuilt
// from the original trajectory.
struct Provenance {
  std::size_t trajectory = 0;
  int t = 0;
  int w = 0;
};

struct GoalTuple {
  Eigen::VectorXd state;
  Eigen::VectorXd goal;
  Eigen::VectorXd action;  // env action (low) or subgoal state (high)
  Provenance origin;
};

// Tuples the window loop emits for one trajectory with T actions:
// sum over t in [0,T) of min(window, T - t).
std::size_t window_tuple_count(int num_actions, int window);

// Goal-conditioned tuple store. Window-relabeled portions are kept as views
// over shared trajectory pools and materialize tuples on access, so a
// dataset over millions of window positions costs no tuple storage; read-in
// or hand-built tuples are kept as explicit columns. Appending (the
// iterative relabeling buffer) adds blocks and never mutates existing ones.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(Level level, int state_dim, int action_dim);

  Level level() const { return level_; }
  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  std::size_t num_trajectories() const { return next_trajectory_id_; }
  // Zero-action trajectories contribute no tuples; callers surface these.
  std::size_t skipped_empty() const { return skipped_empty_; }

  GoalTuple get(std::size_t index) const;

  // Batch assembly: X rows are [state | goal], A rows are actions.
  void gather(const std::vector<std::size_t>& indices, Eigen::MatrixXd& X,
              Eigen::MatrixXd& A) const;

  // Window-relabeled trajectories. action_window empty = low level (the
  // action is the stored env action); action_window set = high level (the
  // action is the state at t + min(w, action_window)). goal_window empty =
  // final-state labeling (one tuple per t, goal s_T).
  void append_window_block(TrajectoryPool pool,
                           std::optional<int> goal_window,
                           std::optional<int> action_window);

  void append_columns(Eigen::MatrixXd states, Eigen::MatrixXd goals,
                      Eigen::MatrixXd actions, std::vector<Provenance> origin);

 private:
  struct WindowBlock {
    TrajectoryPool pool;
    std::optional<int> goal_window;
    std::optional<int> action_window;
    std::vector<std::size_t> offsets;  // per-trajectory cumulative counts
    std::size_t trajectory_base = 0;
  };
  struct ColumnBlock {
    Eigen::MatrixXd states, goals, actions;
    std::vector<Provenance> origin;
  };
  using Block = std::variant<WindowBlock, ColumnBlock>;

  GoalTuple get_from(const WindowBlock& block, std::size_t local) const;
  GoalTuple get_from(const ColumnBlock& block, std::size_t local) const;

  Level level_ = Level::kLow;
  int state_dim_ = 0;
  int action_dim_ = 0;
  std::size_t size_ = 0;
  std::size_t skipped_empty_ = 0;
  std::size_t next_trajectory_id_ = 0;
  std::vector<Block> blocks_;
  std::vector<std::size_t> block_offsets_;  // cumulative sizes
};

// Relay data relabeling, low level: for every step t and every offset
// w in [1, W_l] still inside the trajectory, emit (s_t, goal s_{t+w}, a_t).
Dataset relabel_low(TrajectoryPool trajectories, const RelabelConfig& cfg);

// Relay data relabeling, high level: for every t and w in [1, W_h] inside
// the trajectory, emit state s_t, goal s_{t+w}, and as the action the
// subgoal s_{t+min(w, W_l)} — the goal itself when it is near enough,
// otherwise the state exactly W_l steps ahead.
Dataset relabel_high(TrajectoryPool trajectories, const RelabelConfig& cfg);

// Flat-baseline relabeling: same loop as relabel_low with an arbitrary
// window; window = nullopt labels every step with the trajectory's final
// state (one tuple per step).
Dataset relabel_flat(TrajectoryPool trajectories, std::optional<int> window);

// Splits [0, T] wherever some element's joint has moved more than eps_seg
// since the current segment began. Returns strictly increasing boundaries
// starting at 0 and ending at T.
std::vector<int> oracle_segment(const Trajectory& trajectory, double eps_seg);

// Variable-length-segment datasets: low-level tuples aim at the enclosing
// segment's end state; one high-level tuple per segment uses the segment
// end as the action and the trajectory's final state as the goal.
std::pair<Dataset, Dataset> segments_to_datasets(
    const Trajectory& trajectory, const std::vector<int>& boundaries);

}  // namespace relay
