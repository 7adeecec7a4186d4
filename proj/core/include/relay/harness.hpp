#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "relay/config.hpp"
#include "relay/dataset.hpp"
#include "relay/env.hpp"
#include "relay/evaluate.hpp"
#include "relay/finetune.hpp"
#include "relay/imitation.hpp"
#include "relay/io.hpp"

namespace relay {

// --- shared experiment building blocks ---

std::vector<CompoundGoal> evaluation_goals(const RunConfig& cfg);

// Play-style demonstrations whose goals are drawn from the same 4-element
// subset distribution as the evaluation goals.
std::vector<Trajectory> generate_demos(const RunConfig& cfg);

// Index of the demonstration whose final state is nearest to the goal
// (ties broken toward the lowest index); its action sequence is the
// open-loop baseline plan.
std::size_t nearest_neighbor_index(const std::vector<Trajectory>& demos,
                                   const Eigen::VectorXd& goal);

struct PerGoalPolicy {
  int goal_index = 0;
  GaussianPolicy high;
  GaussianPolicy low;
};

struct DistillResult {
  GaussianPolicy high;
  GaussianPolicy low;
  std::vector<int> distilled_goals;
  std::vector<int> skipped_goals;  // goals with no successful rollout
  std::size_t kept_episodes = 0;
  std::size_t dl_size = 0;
  std::size_t dh_size = 0;
  ILReport report;
};

// Rolls out every fine-tuned policy on its own goal, pools the successful
// episodes, relay-relabels them and trains one goal-conditioned bi-level
// policy on the pool.
DistillResult distill(const std::vector<PerGoalPolicy>& policies,
                      const RunConfig& cfg,
                      const std::vector<CompoundGoal>& goals);

struct WindowAblationRow {
  int window = 0;
  std::vector<double> per_seed_completion;
  std::vector<double> per_seed_success;
  double mean_completion = 0.0;
  double mean_success = 0.0;
  std::size_t dl_size = 0;
};

// Full imitation per low-level window (high window fixed), evaluated with
// the subgoal period tied to the window.
std::vector<WindowAblationRow> ablate_window(
    const RunConfig& cfg, const std::vector<Trajectory>& demos,
    const std::vector<CompoundGoal>& goals);

struct RewardAblationRow {
  RewardKind kind = RewardKind::kSparse;
  std::vector<double> per_seed_success_init;
  std::vector<double> per_seed_success_final;
  std::vector<std::uint64_t> init_hashes;  // per seed, shared across kinds
  double mean_success_init = 0.0;
  double mean_success_final = 0.0;
};

// Short fine-tune per reward kind, all kinds branching from one RIL
// initialization per seed.
std::vector<RewardAblationRow> ablate_reward(
    const RunConfig& cfg, const std::vector<Trajectory>& demos,
    const std::vector<CompoundGoal>& goals);

// --- pipeline stages behind the CLI ---

struct RuntimeError3 : std::runtime_error {  // maps to exit code 3
  using std::runtime_error::runtime_error;
};

class Pipeline {
 public:
  explicit Pipeline(RunConfig cfg);

  const RunConfig& config() const { return cfg_; }

  void gen_demos();
  void relabel(const std::vector<std::string>& sets);
  void train_il(const std::string& method);  // ril | gcbc | bc | all
  // npg-rpl | dapg-rpl | iril-rpl | rpl (all three) | flat-gcbc | pretrain |
  // all
  void finetune(const std::string& target);
  void distill_stage();
  // ril | gcbc | bc | nn | ft-<variant> | flat-gcbc-ft | pretrain | distill |
  // all (everything with artifacts present)
  void evaluate(const std::string& method);
  void ablate(const std::string& kind);  // window | reward | all
  void report();
  void verify();

  std::filesystem::path demos_path() const;
  std::filesystem::path dataset_path(const std::string& name) const;
  std::filesystem::path params_stem(const std::string& name) const;
  std::filesystem::path metrics_path(const std::string& name) const;
  std::filesystem::path report_path(const std::string& name) const;

 private:
  std::vector<Trajectory> load_demos() const;
  Dataset load_dataset(const std::string& name) const;
  std::vector<int> finetune_goal_indices() const;

  void evaluate_one(const std::string& method);

  RunConfig cfg_;
  std::filesystem::path out_;
};

}  // namespace relay
