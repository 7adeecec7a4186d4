#include "relay/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace relay {

void validate_relabel_config(const RelabelConfig& cfg) {
  if (cfg.low_window < 1)
    throw std::invalid_argument("low_window must be at least 1");
  if (cfg.high_window < cfg.low_window)
    throw std::invalid_argument("high_window must be >= low_window");
}

std::size_t window_tuple_count(int num_actions, int window) {
  const std::size_t t = static_cast<std::size_t>(num_actions);
  const std::size_t w = static_cast<std::size_t>(window);
  if (w >= t) return t * (t + 1) / 2;
  // t - w + 1 steps see the full window, the tail shrinks to 1.
  return (t - w + 1) * w + w * (w - 1) / 2;
}

namespace {

// Inverts the flattened (t, w) enumeration for one trajectory: index k in
// [0, window_tuple_count) -> the k-th pair of the loop
//   for t in [0, T): for w in [1, min(window, T - t)]
void resolve_window_index(int num_actions, int window, std::size_t k, int& t,
                          int& w) {
  const int T = num_actions;
  const int W = window;
  if (W < T) {
    const std::size_t full = static_cast<std::size_t>(T - W + 1);
    if (k < full * static_cast<std::size_t>(W)) {
      t = static_cast<int>(k / static_cast<std::size_t>(W));
      w = static_cast<int>(k % static_cast<std::size_t>(W)) + 1;
      return;
    }
    k -= full * static_cast<std::size_t>(W);
    // Remaining rows have widths W-1, W-2, ..., 1.
    const int c0 = W - 1;
    auto cum = [c0](int j) {
      return static_cast<std::size_t>(j) * static_cast<std::size_t>(c0) -
             static_cast<std::size_t>(j) * (static_cast<std::size_t>(j) - 1) / 2;
    };
    int j = static_cast<int>(
        std::floor((2.0 * c0 + 1.0 -
                    std::sqrt((2.0 * c0 + 1.0) * (2.0 * c0 + 1.0) -
                              8.0 * static_cast<double>(k))) /
                   2.0));
    j = std::clamp(j, 0, c0 - 1);
    while (j + 1 <= c0 - 1 && cum(j + 1) <= k) ++j;
    while (j > 0 && cum(j) > k) --j;
    t = T - W + 1 + j;
    w = static_cast<int>(k - cum(j)) + 1;
    return;
  }
  // Window covers the whole trajectory: widths T, T-1, ..., 1.
  auto cum = [T](int j) {
    return static_cast<std::size_t>(j) * static_cast<std::size_t>(T) -
           static_cast<std::size_t>(j) * (static_cast<std::size_t>(j) - 1) / 2;
  };
  int j = static_cast<int>(
      std::floor((2.0 * T + 1.0 -
                  std::sqrt((2.0 * T + 1.0) * (2.0 * T + 1.0) -
                            8.0 * static_cast<double>(k))) /
                 2.0));
  j = std::clamp(j, 0, T - 1);
  while (j + 1 <= T - 1 && cum(j + 1) <= k) ++j;
  while (j > 0 && cum(j) > k) --j;
  t = j;
  w = static_cast<int>(k - cum(j)) + 1;
}

}  // namespace

Dataset::Dataset(Level level, int state_dim, int action_dim)
    : level_(level), state_dim_(state_dim), action_dim_(action_dim) {}

void Dataset::append_window_block(TrajectoryPool pool,
                                  std::optional<int> goal_window,
                                  std::optional<int> action_window) {
  if (!pool || pool->empty())
    throw std::invalid_argument("relabeling requires a non-empty trajectory pool");
  if (goal_window && *goal_window < 1)
    throw std::invalid_argument("goal window must be at least 1");
  WindowBlock block;
  block.pool = std::move(pool);
  block.goal_window = goal_window;
  block.action_window = action_window;
  block.trajectory_base = next_trajectory_id_;
  block.offsets.reserve(block.pool->size() + 1);
  block.offsets.push_back(0);
  std::size_t total = 0;
  for (const Trajectory& traj : *block.pool) {
    if (!traj.consistent())
      throw std::invalid_argument("inconsistent trajectory in pool");
    const int T = traj.num_actions();
    if (state_dim_ == 0) state_dim_ = traj.state_dim();
    if (action_dim_ == 0)
      action_dim_ = action_window ? traj.state_dim() : traj.action_dim();
    if (traj.state_dim() != state_dim_)
      throw std::invalid_argument("trajectory state dimension mismatch");
    // Zero-action trajectories contribute nothing; they stay in the pool so
    // trajectory ids keep their meaning.
    if (T > 0) {
      total += goal_window ? window_tuple_count(T, *goal_window)
                           : static_cast<std::size_t>(T);
    } else {
      ++skipped_empty_;
    }
    block.offsets.push_back(total);
  }
  next_trajectory_id_ += block.pool->size();
  size_ += total;
  blocks_.push_back(std::move(block));
  block_offsets_.push_back(size_);
}

void Dataset::append_columns(Eigen::MatrixXd states, Eigen::MatrixXd goals,
                             Eigen::MatrixXd actions,
                             std::vector<Provenance> origin) {
  if (states.rows() != goals.rows() || states.rows() != actions.rows() ||
      origin.size() != static_cast<std::size_t>(states.rows()))
    throw std::invalid_argument("column block row mismatch");
  if (state_dim_ == 0) state_dim_ = static_cast<int>(states.cols());
  if (action_dim_ == 0) action_dim_ = static_cast<int>(actions.cols());
  if (states.cols() != state_dim_ || goals.cols() != state_dim_ ||
      actions.cols() != action_dim_)
    throw std::invalid_argument("column block dimension mismatch");
  size_ += static_cast<std::size_t>(states.rows());
  ColumnBlock block{std::move(states), std::move(goals), std::move(actions),
                    std::move(origin)};
  blocks_.push_back(std::move(block));
  block_offsets_.push_back(size_);
}

GoalTuple Dataset::get_from(const WindowBlock& block, std::size_t local) const {
  const auto it =
      std::upper_bound(block.offsets.begin(), block.offsets.end(), local);
  const std::size_t traj_idx =
      static_cast<std::size_t>(it - block.offsets.begin()) - 1;
  const std::size_t k = local - block.offsets[traj_idx];
  const Trajectory& traj = (*block.pool)[traj_idx];
  const int T = traj.num_actions();

  GoalTuple tuple;
  int t = 0, w = 0;
  if (block.goal_window) {
    resolve_window_index(T, *block.goal_window, k, t, w);
  } else {
    t = static_cast<int>(k);
    w = T - t;
  }
  tuple.state = traj.states.row(t).transpose();
  tuple.goal = traj.states.row(t + w).transpose();
  if (block.action_window) {
    const int ahead = std::min(w, *block.action_window);
    tuple.action = traj.states.row(t + ahead).transpose();
  } else {
    tuple.action = traj.actions.row(t).transpose();
  }
  tuple.origin = Provenance{block.trajectory_base + traj_idx, t, w};
  return tuple;
}

GoalTuple Dataset::get_from(const ColumnBlock& block, std::size_t local) const {
  GoalTuple tuple;
  const auto i = static_cast<Eigen::Index>(local);
  tuple.state = block.states.row(i).transpose();
  tuple.goal = block.goals.row(i).transpose();
  tuple.action = block.actions.row(i).transpose();
  tuple.origin = block.origin[local];
  return tuple;
}

GoalTuple Dataset::get(std::size_t index) const {
  if (index >= size_) throw std::out_of_range("dataset index out of range");
  const auto it =
      std::upper_bound(block_offsets_.begin(), block_offsets_.end(), index);
  const std::size_t block_idx =
      static_cast<std::size_t>(it - block_offsets_.begin());
  const std::size_t local =
      block_idx == 0 ? index : index - block_offsets_[block_idx - 1];
  return std::visit(
      [&](const auto& block) { return get_from(block, local); },
      blocks_[block_idx]);
}

void Dataset::gather(const std::vector<std::size_t>& indices,
                     Eigen::MatrixXd& X, Eigen::MatrixXd& A) const {
  const auto n = static_cast<Eigen::Index>(indices.size());
  X.resize(n, 2 * state_dim_);
  A.resize(n, action_dim_);
  for (Eigen::Index i = 0; i < n; ++i) {
    const GoalTuple tuple = get(indices[static_cast<std::size_t>(i)]);
    X.row(i).head(state_dim_) = tuple.state.transpose();
    X.row(i).tail(state_dim_) = tuple.goal.transpose();
    A.row(i) = tuple.action.transpose();
  }
}

Dataset relabel_low(TrajectoryPool trajectories, const RelabelConfig& cfg) {
  validate_relabel_config(cfg);
  Dataset d(Level::kLow, 0, 0);
  d.append_window_block(std::move(trajectories), cfg.low_window, std::nullopt);
  return d;
}

Dataset relabel_high(TrajectoryPool trajectories, const RelabelConfig& cfg) {
  validate_relabel_config(cfg);
  Dataset d(Level::kHigh, 0, 0);
  d.append_window_block(std::move(trajectories), cfg.high_window,
                        cfg.low_window);
  return d;
}

Dataset relabel_flat(TrajectoryPool trajectories, std::optional<int> window) {
  Dataset d(Level::kLow, 0, 0);
  d.append_window_block(std::move(trajectories), window, std::nullopt);
  return d;
}

std::vector<int> oracle_segment(const Trajectory& trajectory, double eps_seg) {
  if (trajectory.num_actions() < 1)
    throw std::invalid_argument("oracle_segment needs at least one action");
  const int T = trajectory.num_actions();
  const int m = trajectory.state_dim() - 2;
  std::vector<int> boundaries{0};
  int start = 0;
  for (int t = 1; t <= T; ++t) {
    bool moved = false;
    for (int j = 0; j < m && !moved; ++j) {
      moved = std::abs(trajectory.states(t, 2 + j) -
                       trajectory.states(start, 2 + j)) > eps_seg;
    }
    if (moved && t < T) {
      boundaries.push_back(t);
      start = t;
    }
  }
  boundaries.push_back(T);
  return boundaries;
}

std::pair<Dataset, Dataset> segments_to_datasets(
    const Trajectory& trajectory, const std::vector<int>& boundaries) {
  if (boundaries.size() < 2 || boundaries.front() != 0 ||
      boundaries.back() != trajectory.num_actions())
    throw std::invalid_argument("boundaries must partition [0, T]");
  for (std::size_t i = 1; i < boundaries.size(); ++i) {
    if (boundaries[i] <= boundaries[i - 1])
      throw std::invalid_argument("boundaries must be strictly increasing");
  }
  const int ds = trajectory.state_dim();
  const int da = trajectory.action_dim();
  const Eigen::VectorXd final_state = trajectory.final_state();

  std::size_t low_count = 0;
  for (std::size_t b = 0; b + 1 < boundaries.size(); ++b)
    low_count += static_cast<std::size_t>(boundaries[b + 1] - boundaries[b]);
  const std::size_t high_count = boundaries.size() - 1;

  Eigen::MatrixXd ls(low_count, ds), lg(low_count, ds), la(low_count, da);
  std::vector<Provenance> lp(low_count);
  Eigen::MatrixXd hs(high_count, ds), hg(high_count, ds), ha(high_count, ds);
  std::vector<Provenance> hp(high_count);

  std::size_t li = 0;
  for (std::size_t b = 0; b + 1 < boundaries.size(); ++b) {
    const int seg_start = boundaries[b];
    const int seg_end = boundaries[b + 1];
    for (int t = seg_start; t < seg_end; ++t, ++li) {
      ls.row(static_cast<Eigen::Index>(li)) = trajectory.states.row(t);
      lg.row(static_cast<Eigen::Index>(li)) = trajectory.states.row(seg_end);
      la.row(static_cast<Eigen::Index>(li)) = trajectory.actions.row(t);
      lp[li] = Provenance{0, t, seg_end - t};
    }
    hs.row(static_cast<Eigen::Index>(b)) = trajectory.states.row(seg_start);
    ha.row(static_cast<Eigen::Index>(b)) = trajectory.states.row(seg_end);
    hg.row(static_cast<Eigen::Index>(b)) = final_state.transpose();
    hp[b] = Provenance{0, seg_start, seg_end - seg_start};
  }

  Dataset low(Level::kLow, ds, da);
  low.append_columns(std::move(ls), std::move(lg), std::move(la),
                     std::move(lp));
  Dataset high(Level::kHigh, ds, ds);
  high.append_columns(std::move(hs), std::move(hg), std::move(ha),
                      std::move(hp));
  return {std::move(low), std::move(high)};
}

}  // namespace relay
