#include "relay/evaluate.hpp"

#include <cmath>
#include <stdexcept>

#include "relay/finetune.hpp"
#include "relay/parallel.hpp"

namespace relay {

EvalStats summarize_episodes(std::vector<EpisodeRecord> episodes) {
  EvalStats stats;
  stats.episodes = std::move(episodes);
  if (stats.episodes.empty()) return stats;
  const double n = static_cast<double>(stats.episodes.size());
  double sum = 0.0, successes = 0.0;
  for (const EpisodeRecord& e : stats.episodes) {
    sum += e.completion;
    if (e.success) successes += 1.0;
  }
  stats.mean_completion = sum / n;
  stats.success_rate = successes / n;
  double sq = 0.0;
  for (const EpisodeRecord& e : stats.episodes) {
    const double d = e.completion - stats.mean_completion;
    sq += d * d;
  }
  stats.std_completion = n > 1.0 ? std::sqrt(sq / (n - 1.0)) : 0.0;
  return stats;
}

namespace {

template <typename RunEpisode>
EvalStats evaluate_generic(const EnvSpec& spec,
                           const std::vector<CompoundGoal>& goals,
                           const EvalProtocol& protocol, std::uint64_t seed,
                           int workers, RunEpisode&& run_episode) {
  const std::size_t per_goal =
      static_cast<std::size_t>(protocol.episodes_per_goal);
  std::vector<EpisodeRecord> records(goals.size() * per_goal);
  parallel_for(records.size(), workers, [&](std::size_t k) {
    const std::size_t gi = k / per_goal;
    const std::size_t ep = k % per_goal;
    const std::uint64_t ep_seed = derive_seed(seed, gi, ep, 0xe5a1);
    Rng start_rng(derive_seed(ep_seed, 0x57a9));
    const EnvState start = jittered_initial_state(
        spec, protocol.start_jitter_effector, protocol.start_jitter_joints,
        start_rng);
    const Eigen::VectorXd final_state =
        run_episode(gi, start, ep_seed);
    EpisodeRecord rec;
    rec.goal_index = static_cast<int>(gi);
    rec.episode = static_cast<int>(ep);
    rec.completion =
        step_completion(final_state, goals[gi], spec.completion_tolerance);
    rec.success = rec.completion == 4;
    records[k] = rec;
  });
  return summarize_episodes(std::move(records));
}

}  // namespace

EvalStats evaluate_hierarchical(const GaussianPolicy& high,
                                const GaussianPolicy& low, const EnvSpec& spec,
                                const std::vector<CompoundGoal>& goals,
                                const ExecutorConfig& exec,
                                const EvalProtocol& protocol,
                                std::uint64_t seed, int workers) {
  ExecutorConfig cfg = exec;
  cfg.deterministic = protocol.deterministic_policy;
  return evaluate_generic(
      spec, goals, protocol, seed, workers,
      [&](std::size_t gi, const EnvState& start, std::uint64_t ep_seed) {
        const Trajectory tr =
            run_hierarchical(high, low, spec, start,
                             goals[gi].target_state, cfg, ep_seed);
        return tr.final_state();
      });
}

EvalStats evaluate_flat(const GaussianPolicy& policy, const EnvSpec& spec,
                        const std::vector<CompoundGoal>& goals,
                        const ExecutorConfig& exec,
                        const EvalProtocol& protocol, std::uint64_t seed,
                        int workers) {
  ExecutorConfig cfg = exec;
  cfg.deterministic = protocol.deterministic_policy;
  return evaluate_generic(
      spec, goals, protocol, seed, workers,
      [&](std::size_t gi, const EnvState& start, std::uint64_t ep_seed) {
        const Trajectory tr = run_flat(policy, spec, start,
                                       goals[gi].target_state, cfg, ep_seed);
        return tr.final_state();
      });
}

EvalStats evaluate_open_loop(const std::vector<Eigen::MatrixXd>& action_plans,
                             const EnvSpec& spec,
                             const std::vector<CompoundGoal>& goals,
                             const EvalProtocol& protocol, std::uint64_t seed,
                             int workers) {
  if (action_plans.size() != goals.size())
    throw std::invalid_argument("one action plan required per goal");
  return evaluate_generic(
      spec, goals, protocol, seed, workers,
      [&](std::size_t gi, const EnvState& start, std::uint64_t) {
        const Trajectory tr = run_open_loop(action_plans[gi], spec, start);
        return tr.final_state();
      });
}

}  // namespace relay
