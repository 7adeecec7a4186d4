#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "relay/harness.hpp"

using namespace relay;

namespace {

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("relay_harness_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
};

// Small enough to run the whole pipeline in seconds. The generous
// completion tolerance keeps success-gated stages (distillation) exercised
// even though the policies are barely trained.
RunConfig tiny_run_config(const std::filesystem::path& out) {
  RunConfig cfg;
  cfg.output_dir = out.string();
  cfg.workers = 2;
  cfg.env.completion_tolerance = 1.5;
  cfg.env.episode_length = 120;
  cfg.exec.episode_length = 120;
  cfg.demo_count = 6;
  cfg.goal_count = 5;
  cfg.finetune_goal_count = 2;
  cfg.il.epochs = 2;
  cfg.il.hidden_units = 8;
  cfg.il.max_batches_per_epoch = 40;
  cfg.finetune.iterations = 1;
  cfg.finetune.trajectories_per_iter = 4;
  cfg.finetune.fisher_batch = 96;
  cfg.finetune.demo_batch = 64;
  cfg.eval.episodes_per_goal = 2;
  cfg.rpl_seeds = 2;
  cfg.baseline_seeds = 1;
  cfg.distill_rollouts = 3;
  cfg.ablation_windows = {2, 5};
  cfg.ablation_iterations = 1;
  cfg.ablation_goal_count = 1;
  return finalize_run_config(cfg);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("demo goals come from the evaluation goal distribution") {
  TempDir tmp("demos");
  const RunConfig cfg = tiny_run_config(tmp.path / "out");
  const std::vector<Trajectory> demos = generate_demos(cfg);
  REQUIRE(demos.size() == 6);
  for (const Trajectory& tr : demos) {
    CHECK(tr.is_demo);
    CHECK(tr.state_dim() == cfg.env.state_dim());
  }
  // reproducible
  const std::vector<Trajectory> again = generate_demos(cfg);
  for (std::size_t i = 0; i < demos.size(); ++i)
    CHECK(demos[i].states == again[i].states);
}

TEST_CASE("nearest neighbor picks the closest final state, lowest index first") {
  const EnvSpec spec = make_env_spec(EnvSpec{});
  std::vector<Trajectory> demos;
  for (int i = 0; i < 4; ++i) {
    Trajectory tr;
    tr.states.resize(2, spec.state_dim());
    tr.states.setZero();
    tr.states(1, 2) = 0.25 * i;  // distinct final states
    tr.actions.resize(1, 3);
    tr.actions.setZero();
    demos.push_back(tr);
  }
  Eigen::VectorXd goal = demos[2].final_state();
  CHECK(nearest_neighbor_index(demos, goal) == 2);

  // exact tie between demos 1 and 3 -> the lower index wins
  goal = Eigen::VectorXd::Zero(spec.state_dim());
  goal[2] = 0.5;
  demos[2].states(1, 2) = 2.0;  // move the exact match out of the way
  demos[3].states(1, 2) = 0.75;
  demos[1].states(1, 2) = 0.25;
  CHECK((goal - demos[1].final_state()).norm() ==
        (goal - demos[3].final_state()).norm());
  CHECK(nearest_neighbor_index(demos, goal) == 1);

  CHECK_THROWS_AS(nearest_neighbor_index({}, goal), std::invalid_argument);
}

TEST_CASE("distillation pools successful rollouts and retrains") {
  TempDir tmp("distill");
  RunConfig cfg = tiny_run_config(tmp.path / "out");
  // A generous tolerance makes every rollout a success, exercising the full
  // pooling + relabel + retrain path cheaply.
  cfg.env.completion_tolerance = 2.0;
  cfg = finalize_run_config(cfg);
  const std::vector<CompoundGoal> goals = evaluation_goals(cfg);

  MlpShape hs{2 * cfg.env.state_dim(), cfg.env.state_dim(), {8}};
  MlpShape ls{2 * cfg.env.state_dim(), EnvSpec::kActionDim, {8}};
  std::vector<PerGoalPolicy> policies;
  for (int g = 0; g < 2; ++g) {
    PerGoalPolicy pg;
    pg.goal_index = g;
    pg.high = GaussianPolicy::random_init(hs, 10 + g);
    pg.low = GaussianPolicy::random_init(ls, 20 + g);
    policies.push_back(std::move(pg));
  }

  const DistillResult res = distill(policies, cfg, goals);
  CHECK(res.distilled_goals == std::vector<int>{0, 1});
  CHECK(res.skipped_goals.empty());
  CHECK(res.kept_episodes == 6);  // 3 rollouts per goal, all successful
  CHECK(res.dl_size > 0);
  CHECK(res.dh_size > res.dl_size);  // wider window emits more tuples
  CHECK(res.low.output_dim() == EnvSpec::kActionDim);
  CHECK(res.high.output_dim() == cfg.env.state_dim());

  CHECK_THROWS_AS(distill({policies[0]}, cfg, goals), std::invalid_argument);
}

TEST_CASE("distillation reports goals without successes") {
  TempDir tmp("distill2");
  RunConfig cfg = tiny_run_config(tmp.path / "out");
  // Impossible tolerance: no rollout can succeed.
  cfg.env.completion_tolerance = 1e-12;
  cfg = finalize_run_config(cfg);
  const std::vector<CompoundGoal> goals = evaluation_goals(cfg);

  MlpShape hs{2 * cfg.env.state_dim(), cfg.env.state_dim(), {8}};
  MlpShape ls{2 * cfg.env.state_dim(), EnvSpec::kActionDim, {8}};
  std::vector<PerGoalPolicy> policies;
  for (int g = 0; g < 2; ++g) {
    PerGoalPolicy pg;
    pg.goal_index = g;
    pg.high = GaussianPolicy::random_init(hs, 30 + g);
    pg.low = GaussianPolicy::random_init(ls, 40 + g);
    policies.push_back(std::move(pg));
  }
  CHECK_THROWS_AS(distill(policies, cfg, goals), RuntimeError3);
}

TEST_CASE("window ablation rows carry the count law and tied period") {
  TempDir tmp("ablw");
  RunConfig cfg = tiny_run_config(tmp.path / "out");
  cfg.rpl_seeds = 1;
  cfg = finalize_run_config(cfg);
  const std::vector<Trajectory> demos = generate_demos(cfg);
  const std::vector<CompoundGoal> goals = evaluation_goals(cfg);

  const auto rows = ablate_window(cfg, demos, goals);
  REQUIRE(rows.size() == 2);
  for (const auto& row : rows) {
    std::size_t expected = 0;
    for (const Trajectory& tr : demos)
      expected += window_tuple_count(tr.num_actions(), row.window);
    CHECK(row.dl_size == expected);
    CHECK(row.per_seed_completion.size() == 1);
    CHECK(row.mean_completion >= 0.0);
    CHECK(row.mean_completion <= 4.0);
  }
  CHECK(rows[0].window == 2);
  CHECK(rows[1].window == 5);
}

TEST_CASE("reward ablation branches every kind from one init per seed") {
  TempDir tmp("ablr");
  RunConfig cfg = tiny_run_config(tmp.path / "out");
  cfg.rpl_seeds = 2;
  cfg = finalize_run_config(cfg);
  const std::vector<Trajectory> demos = generate_demos(cfg);
  const std::vector<CompoundGoal> goals = evaluation_goals(cfg);

  const auto rows = ablate_reward(cfg, demos, goals);
  REQUIRE(rows.size() == cfg.ablation_rewards.size());
  for (std::size_t k = 1; k < rows.size(); ++k) {
    REQUIRE(rows[k].init_hashes.size() == rows[0].init_hashes.size());
    for (std::size_t s = 0; s < rows[0].init_hashes.size(); ++s)
      CHECK(rows[k].init_hashes[s] == rows[0].init_hashes[s]);
  }
}

TEST_CASE("pipeline stages compose and rerun deterministically") {
  TempDir tmp("pipe");
  const std::filesystem::path out_a = tmp.path / "a";
  const std::filesystem::path out_b = tmp.path / "b";

  auto run_all = [&](const std::filesystem::path& out) {
    Pipeline p(tiny_run_config(out));
    p.gen_demos();
    p.relabel({"low", "high", "gcbc", "bc"});
    p.train_il("all");
    p.finetune("dapg-rpl");
    p.finetune("flat-gcbc");
    p.finetune("pretrain");
    p.distill_stage();
    p.evaluate("ril");
    p.evaluate("gcbc");
    p.evaluate("bc");
    p.evaluate("nn");
    p.evaluate("ft-dapg-rpl");
    p.evaluate("distill");
    p.report();
    p.verify();
  };
  run_all(out_a);
  run_all(out_b);

  // metrics and report files must be byte-identical across the two runs
  int compared = 0;
  for (const std::string dir : {"metrics", "report"}) {
    for (const auto& entry :
         std::filesystem::directory_iterator(out_a / dir)) {
      const auto other = out_b / dir / entry.path().filename();
      REQUIRE(std::filesystem::exists(other));
      CHECK(slurp(entry.path()) == slurp(other));
      ++compared;
    }
  }
  CHECK(compared >= 10);

  // spot-check core artifacts
  CHECK(std::filesystem::exists(out_a / "demos.jsonl"));
  CHECK(std::filesystem::exists(out_a / "datasets" / "low.jsonl"));
  CHECK(std::filesystem::exists(out_a / "params" / "ril_low_seed0.bin"));
  CHECK(std::filesystem::exists(out_a / "report" / "table1.txt"));
}

TEST_CASE("stages demand their upstream artifacts") {
  TempDir tmp("order");
  Pipeline p(tiny_run_config(tmp.path / "out"));
  CHECK_THROWS_AS(p.relabel({"low"}), MissingArtifactError);
  CHECK_THROWS_AS(p.train_il("ril"), MissingArtifactError);
  CHECK_THROWS_AS(p.report(), MissingArtifactError);
  CHECK_THROWS_AS(p.verify(), std::exception);
}

#ifdef RPL_BINARY
TEST_CASE("command line exit codes") {
  TempDir tmp("cli");
  const std::string binary = RPL_BINARY;
  const auto cfg_path = tmp.path / "cfg.json";
  save_run_config(cfg_path, tiny_run_config(tmp.path / "out"));

  auto run = [&](const std::string& args) {
    const std::string cmd = binary + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
  };

  // invalid config file -> 1
  const auto bad_cfg = tmp.path / "bad.json";
  std::ofstream(bad_cfg) << "{ not json";
  CHECK(run("-c " + bad_cfg.string() + " show-config") == 1);
  // missing upstream artifact -> 2
  CHECK(run("-c " + cfg_path.string() + " relabel") == 2);
  // fine path -> 0
  CHECK(run("-c " + cfg_path.string() + " gen-demos") == 0);
  CHECK(run("-c " + cfg_path.string() + " relabel --sets low high") == 0);
}
#endif
