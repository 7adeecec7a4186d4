#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "relay/dataset.hpp"
#include "relay/env.hpp"
#include "relay/rng.hpp"

using namespace relay;

namespace {

// Random-walk trajectory; content only needs to be distinct per (t, dim).
Trajectory synthetic_trajectory(int num_actions, int state_dim, int action_dim,
                                std::uint64_t seed) {
  Rng rng(seed);
  Trajectory tr;
  tr.states.resize(num_actions + 1, state_dim);
  tr.actions.resize(num_actions, action_dim);
  for (int t = 0; t <= num_actions; ++t)
    for (int d = 0; d < state_dim; ++d) tr.states(t, d) = rng.uniform(-1, 1);
  for (int t = 0; t < num_actions; ++t)
    for (int d = 0; d < action_dim; ++d) tr.actions(t, d) = rng.uniform(-1, 1);
  tr.seed = seed;
  return tr;
}

// Independent oracle: the literal double loop from the window relabeling
// scheme, materializing every tuple.
std::vector<GoalTuple> brute_force_low(const std::vector<Trajectory>& trajs,
                                       int window) {
  std::vector<GoalTuple> out;
  for (std::size_t n = 0; n < trajs.size(); ++n) {
    const int T = trajs[n].num_actions();
    for (int t = 0; t < T; ++t) {
      for (int w = 1; w <= window && t + w <= T; ++w) {
        GoalTuple tuple;
        tuple.state = trajs[n].states.row(t).transpose();
        tuple.goal = trajs[n].states.row(t + w).transpose();
        tuple.action = trajs[n].actions.row(t).transpose();
        tuple.origin = {n, t, w};
        out.push_back(std::move(tuple));
      }
    }
  }
  return out;
}

std::vector<GoalTuple> brute_force_high(const std::vector<Trajectory>& trajs,
                                        int high_window, int low_window) {
  std::vector<GoalTuple> out;
  for (std::size_t n = 0; n < trajs.size(); ++n) {
    const int T = trajs[n].num_actions();
    for (int t = 0; t < T; ++t) {
      for (int w = 1; w <= high_window && t + w <= T; ++w) {
        GoalTuple tuple;
        tuple.state = trajs[n].states.row(t).transpose();
        tuple.goal = trajs[n].states.row(t + w).transpose();
        tuple.action =
            trajs[n].states.row(t + std::min(w, low_window)).transpose();
        tuple.origin = {n, t, w};
        out.push_back(std::move(tuple));
      }
    }
  }
  return out;
}

}  // namespace

TEST_CASE("low-level relabeling matches the hand enumeration for T=5, W=2") {
  std::vector<Trajectory> trajs{synthetic_trajectory(5, 3, 2, 1)};
  const Trajectory& tr = trajs[0];
  const Dataset d = relabel_low(make_pool(trajs), RelabelConfig{2, 260});
  REQUIRE(d.size() == 9);
  // (t, w) pairs in loop order with boundary clipping
  const std::vector<std::pair<int, int>> expected = {
      {0, 1}, {0, 2}, {1, 1}, {1, 2}, {2, 1},
      {2, 2}, {3, 1}, {3, 2}, {4, 1}};
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const GoalTuple tuple = d.get(i);
    const auto [t, w] = expected[i];
    CHECK(tuple.origin.t == t);
    CHECK(tuple.origin.w == w);
    CHECK(tuple.state == tr.states.row(t).transpose());
    CHECK(tuple.goal == tr.states.row(t + w).transpose());
    CHECK(tuple.action == tr.actions.row(t).transpose());
  }
}

TEST_CASE("window of one emits exactly T next-state tuples") {
  std::vector<Trajectory> trajs{synthetic_trajectory(12, 3, 2, 2)};
  const Dataset d = relabel_low(make_pool(trajs), RelabelConfig{1, 260});
  REQUIRE(d.size() == 12);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const GoalTuple tuple = d.get(i);
    CHECK(tuple.origin.w == 1);
    CHECK(tuple.goal ==
          trajs[0].states.row(tuple.origin.t + 1).transpose());
  }
}

TEST_CASE("window at least T gives the triangular count") {
  const int T = 9;
  std::vector<Trajectory> trajs{synthetic_trajectory(T, 3, 2, 3)};
  const Dataset d = relabel_low(make_pool(trajs), RelabelConfig{40, 260});
  CHECK(d.size() == static_cast<std::size_t>(T * (T + 1) / 2));
  CHECK(window_tuple_count(T, 40) == d.size());
}

TEST_CASE("high-level relabeling clips the action to the low window") {
  std::vector<Trajectory> trajs{synthetic_trajectory(5, 3, 2, 4)};
  const Trajectory& tr = trajs[0];
  const Dataset d = relabel_high(make_pool(trajs), RelabelConfig{2, 4});
  REQUIRE(d.size() == 14);  // per-t counts 4,4,3,2,1

  bool checked_clipped = false;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const GoalTuple tuple = d.get(i);
    const int t = tuple.origin.t;
    const int w = tuple.origin.w;
    if (t == 0 && w == 3) {
      // action s_2 (clipped), goal s_3
      CHECK(tuple.action == tr.states.row(2).transpose());
      CHECK(tuple.goal == tr.states.row(3).transpose());
      checked_clipped = true;
    }
    if (w <= 2) CHECK(tuple.action == tuple.goal);
    if (w > 2) CHECK(tuple.action == tr.states.row(t + 2).transpose());
  }
  CHECK(checked_clipped);
}

TEST_CASE("count law holds exactly against brute force") {
  Rng rng(7);
  std::vector<Trajectory> trajs;
  for (int n = 0; n < 40; ++n)
    trajs.push_back(synthetic_trajectory(
        static_cast<int>(rng.uniform_int(1, 120)), 4, 2, 100 + n));
  TrajectoryPool pool = make_pool(trajs);
  for (int window : {1, 7, 30, 260}) {
    std::size_t expected = 0;
    for (const Trajectory& tr : trajs)
      expected += window_tuple_count(tr.num_actions(), window);
    const Dataset low =
        relabel_low(pool, RelabelConfig{window, std::max(window, 260)});
    CHECK(low.size() == expected);
    CHECK(low.size() == brute_force_low(trajs, window).size());
    const Dataset high =
        relabel_high(pool, RelabelConfig{std::min(window, 30), window});
    CHECK(high.size() == expected);
  }
}

TEST_CASE("every tuple reconstructs exactly from its provenance") {
  Rng rng(11);
  std::vector<Trajectory> trajs;
  for (int n = 0; n < 10; ++n)
    trajs.push_back(synthetic_trajectory(
        static_cast<int>(rng.uniform_int(1, 60)), 4, 2, 200 + n));
  TrajectoryPool pool = make_pool(trajs);
  const RelabelConfig cfg{5, 17};

  const Dataset low = relabel_low(pool, cfg);
  const auto oracle_low = brute_force_low(trajs, cfg.low_window);
  REQUIRE(low.size() == oracle_low.size());
  for (std::size_t i = 0; i < low.size(); ++i) {
    const GoalTuple a = low.get(i);
    const GoalTuple& b = oracle_low[i];
    REQUIRE(a.origin.trajectory == b.origin.trajectory);
    REQUIRE(a.origin.t == b.origin.t);
    REQUIRE(a.origin.w == b.origin.w);
    REQUIRE(a.state == b.state);
    REQUIRE(a.goal == b.goal);
    REQUIRE(a.action == b.action);
  }

  const Dataset high = relabel_high(pool, cfg);
  const auto oracle_high =
      brute_force_high(trajs, cfg.high_window, cfg.low_window);
  REQUIRE(high.size() == oracle_high.size());
  for (std::size_t i = 0; i < high.size(); ++i) {
    const GoalTuple a = high.get(i);
    const GoalTuple& b = oracle_high[i];
    REQUIRE(a.origin.t == b.origin.t);
    REQUIRE(a.origin.w == b.origin.w);
    REQUIRE(a.state == b.state);
    REQUIRE(a.goal == b.goal);
    REQUIRE(a.action == b.action);
  }
}

TEST_CASE("low-level goals are reachable within the window") {
  std::vector<Trajectory> trajs{synthetic_trajectory(50, 4, 2, 5)};
  const RelabelConfig cfg{8, 20};
  const Dataset d = relabel_low(make_pool(trajs), cfg);
  for (std::size_t i = 0; i < d.size(); ++i) {
    const GoalTuple tuple = d.get(i);
    CHECK(tuple.origin.w >= 1);
    CHECK(tuple.origin.w <= cfg.low_window);
    CHECK(tuple.origin.t + tuple.origin.w <= trajs[0].num_actions());
  }
}

TEST_CASE("flat relabeling with the low window reproduces relabel_low") {
  std::vector<Trajectory> trajs{synthetic_trajectory(30, 4, 2, 6),
                                synthetic_trajectory(11, 4, 2, 7)};
  TrajectoryPool pool = make_pool(trajs);
  const Dataset a = relabel_low(pool, RelabelConfig{9, 260});
  const Dataset b = relabel_flat(pool, 9);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.get(i).state == b.get(i).state);
    CHECK(a.get(i).goal == b.get(i).goal);
    CHECK(a.get(i).action == b.get(i).action);
  }
}

TEST_CASE("final-state labeling tags every step with the last state") {
  std::vector<Trajectory> trajs{synthetic_trajectory(23, 4, 2, 8)};
  const Dataset d = relabel_flat(make_pool(trajs), std::nullopt);
  REQUIRE(d.size() == 23);
  const Eigen::VectorXd last = trajs[0].final_state();
  for (std::size_t i = 0; i < d.size(); ++i) {
    const GoalTuple tuple = d.get(i);
    CHECK(tuple.goal == last);
    CHECK(tuple.origin.t == static_cast<int>(i));
    CHECK(tuple.origin.w == 23 - static_cast<int>(i));
  }
}

TEST_CASE("flat window count matches the closed formula") {
  Rng rng(17);
  std::vector<Trajectory> trajs;
  std::size_t expected = 0;
  for (int n = 0; n < 25; ++n) {
    const int T = static_cast<int>(rng.uniform_int(1, 300));
    trajs.push_back(synthetic_trajectory(T, 3, 2, 300 + n));
    expected += window_tuple_count(T, 260);
  }
  const Dataset d = relabel_flat(make_pool(trajs), 260);
  CHECK(d.size() == expected);
}

TEST_CASE("empty trajectories are skipped, empty pools rejected") {
  std::vector<Trajectory> trajs{synthetic_trajectory(4, 3, 2, 9)};
  Trajectory empty;
  empty.states.resize(1, 3);
  empty.states.setZero();
  empty.actions.resize(0, 2);
  trajs.push_back(empty);
  const Dataset d = relabel_low(make_pool(trajs), RelabelConfig{2, 2});
  CHECK(d.size() == window_tuple_count(4, 2));
  CHECK(d.skipped_empty() == 1);

  CHECK_THROWS_AS(relabel_low(make_pool({}), RelabelConfig{2, 2}),
                  std::invalid_argument);
}

TEST_CASE("relabel config invariants") {
  CHECK_THROWS_AS(validate_relabel_config(RelabelConfig{0, 5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_relabel_config(RelabelConfig{10, 5}),
                  std::invalid_argument);
  CHECK_NOTHROW(validate_relabel_config(RelabelConfig{5, 5}));
}

TEST_CASE("IRIL-style appends grow by the count law and keep ids") {
  std::vector<Trajectory> first{synthetic_trajectory(20, 4, 2, 30)};
  std::vector<Trajectory> second{synthetic_trajectory(14, 4, 2, 31),
                                 synthetic_trajectory(9, 4, 2, 32)};
  Dataset d = relabel_low(make_pool(first), RelabelConfig{6, 260});
  const std::size_t before = d.size();
  CHECK(before == window_tuple_count(20, 6));

  d.append_window_block(make_pool(second), 6, std::nullopt);
  CHECK(d.size() ==
        before + window_tuple_count(14, 6) + window_tuple_count(9, 6));
  CHECK(d.num_trajectories() == 3);

  const GoalTuple from_second = d.get(before);
  CHECK(from_second.origin.trajectory == 1);
  CHECK(from_second.state == second[0].states.row(0).transpose());
}

TEST_CASE("oracle segmentation splits on joint travel") {
  const EnvSpec spec = make_env_spec(EnvSpec{});
  const CompoundGoal goal = make_compound_goal(spec, {0, 1, 2, 3});
  const Trajectory demo = scripted_demo(spec, goal, 0.0, 42);

  const std::vector<int> bounds = oracle_segment(demo, 0.3);
  REQUIRE(bounds.size() >= 2);
  CHECK(bounds.front() == 0);
  CHECK(bounds.back() == demo.num_actions());
  for (std::size_t i = 1; i < bounds.size(); ++i)
    CHECK(bounds[i] > bounds[i - 1]);
  // Four elements each travel 1.0 > 0.3, so at least four interior crossings
  // partition the demo into at least five segments (>= 4 boundaries beyond
  // the leading zero).
  CHECK(bounds.size() - 1 >= 4);
}

TEST_CASE("oracle segmentation degenerates to one segment") {
  Trajectory flat = synthetic_trajectory(10, 5, 2, 50);
  // Freeze the joints so nothing ever moves beyond the threshold.
  for (int t = 0; t <= 10; ++t)
    for (int d = 2; d < 5; ++d) flat.states(t, d) = 0.25;
  const std::vector<int> bounds = oracle_segment(flat, 0.3);
  CHECK(bounds == std::vector<int>{0, 10});

  const EnvSpec spec = make_env_spec(EnvSpec{});
  const Trajectory demo =
      scripted_demo(spec, make_compound_goal(spec, {0, 1, 2, 3}), 0.0, 4);
  const std::vector<int> one = oracle_segment(demo, 5.0);
  CHECK(one == std::vector<int>{0, demo.num_actions()});
}

TEST_CASE("segment datasets target segment ends") {
  std::vector<Trajectory> trajs{synthetic_trajectory(10, 4, 2, 60)};
  const Trajectory& tr = trajs[0];

  SUBCASE("single segment shares the final goal") {
    const auto [low, high] = segments_to_datasets(tr, {0, 10});
    REQUIRE(low.size() == 10);
    for (std::size_t i = 0; i < low.size(); ++i)
      CHECK(low.get(i).goal == tr.final_state());
    REQUIRE(high.size() == 1);
    CHECK(high.get(0).action == tr.final_state());
  }

  SUBCASE("boundaries at every step give next-state goals") {
    std::vector<int> bounds(11);
    std::iota(bounds.begin(), bounds.end(), 0);
    const auto [low, high] = segments_to_datasets(tr, bounds);
    REQUIRE(low.size() == 10);
    for (std::size_t i = 0; i < low.size(); ++i) {
      const GoalTuple tuple = low.get(i);
      CHECK(tuple.goal == tr.states.row(tuple.origin.t + 1).transpose());
    }
    REQUIRE(high.size() == 10);
    for (std::size_t i = 0; i < high.size(); ++i)
      CHECK(high.get(i).goal == tr.final_state());
  }

  SUBCASE("invalid partitions are rejected") {
    CHECK_THROWS_AS(segments_to_datasets(tr, {0, 4, 4, 10}),
                    std::invalid_argument);
    CHECK_THROWS_AS(segments_to_datasets(tr, {1, 10}), std::invalid_argument);
  }
}

TEST_CASE("segment boundaries of a demo align with element completions") {
  const EnvSpec spec = make_env_spec(EnvSpec{});
  const CompoundGoal goal = make_compound_goal(spec, {1, 2, 4, 6});
  const Trajectory demo = scripted_demo(spec, goal, 0.0, 99);
  const std::vector<int> bounds = oracle_segment(demo, 0.3);
  const auto [low, high] = segments_to_datasets(demo, bounds);
  // Interior high-level actions are states where some element has just
  // crossed the travel threshold relative to the previous boundary.
  for (std::size_t b = 0; b + 1 < static_cast<std::size_t>(high.size()); ++b) {
    const GoalTuple tuple = high.get(b);
    const int start = bounds[b];
    const int end = bounds[b + 1];
    double moved = 0.0;
    for (int j = 0; j < spec.num_elements; ++j)
      moved = std::max(moved, std::abs(demo.states(end, 2 + j) -
                                       demo.states(start, 2 + j)));
    CHECK(moved > 0.3);
    CHECK(tuple.action == demo.states.row(end).transpose());
  }
}
