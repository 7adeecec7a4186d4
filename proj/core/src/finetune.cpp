#include "relay/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "relay/parallel.hpp"

namespace relay {

std::string to_string(FinetuneVariant v) {
  switch (v) {
    case FinetuneVariant::kNpgRpl: return "npg-rpl";
    case FinetuneVariant::kDapgRpl: return "dapg-rpl";
    case FinetuneVariant::kIrilRpl: return "iril-rpl";
  }
  throw std::logic_error("unknown variant");
}

FinetuneVariant finetune_variant_from_string(const std::string& s) {
  if (s == "npg-rpl") return FinetuneVariant::kNpgRpl;
  if (s == "dapg-rpl") return FinetuneVariant::kDapgRpl;
  if (s == "iril-rpl") return FinetuneVariant::kIrilRpl;
  throw std::invalid_argument("unknown fine-tuning variant: " + s);
}

std::string to_string(FinetuneMode m) {
  switch (m) {
    case FinetuneMode::kRelay: return "relay";
    case FinetuneMode::kFlat: return "flat";
    case FinetuneMode::kPretrainLowLevel: return "pretrain-low-level";
  }
  throw std::logic_error("unknown mode");
}

FinetuneMode finetune_mode_from_string(const std::string& s) {
  if (s == "relay") return FinetuneMode::kRelay;
  if (s == "flat") return FinetuneMode::kFlat;
  if (s == "pretrain-low-level") return FinetuneMode::kPretrainLowLevel;
  throw std::invalid_argument("unknown fine-tuning mode: " + s);
}

void validate_finetune_config(const FinetuneConfig& cfg) {
  if (cfg.trajectories_per_iter < 1)
    throw std::invalid_argument("trajectories_per_iter < 1");
  if (cfg.discount <= 0.0 || cfg.discount > 1.0)
    throw std::invalid_argument("discount must be in (0, 1]");
  if (cfg.lambda_low < 0.0 || cfg.lambda_high < 0.0)
    throw std::invalid_argument("demo weights must be non-negative");
  if (cfg.kl_step <= 0.0) throw std::invalid_argument("kl_step <= 0");
  if (cfg.cg_iters < 1) throw std::invalid_argument("cg_iters < 1");
  if (cfg.cg_damping <= 0.0) throw std::invalid_argument("cg_damping <= 0");
  if (cfg.iterations < 1) throw std::invalid_argument("iterations < 1");
  if (cfg.fisher_batch < 1) throw std::invalid_argument("fisher_batch < 1");
  if (cfg.demo_batch < 1) throw std::invalid_argument("demo_batch < 1");
  if (cfg.start_jitter_effector < 0.0 || cfg.start_jitter_joints < 0.0)
    throw std::invalid_argument("start jitters must be non-negative");
}

EnvState jittered_initial_state(const EnvSpec& spec, double effector_jitter,
                                double joint_jitter, Rng& rng) {
  EnvState s = initial_state(spec);
  if (effector_jitter > 0.0) {
    s.effector.x() = std::clamp(
        s.effector.x() + rng.uniform(-effector_jitter, effector_jitter), 0.0,
        1.0);
    s.effector.y() = std::clamp(
        s.effector.y() + rng.uniform(-effector_jitter, effector_jitter), 0.0,
        1.0);
  }
  if (joint_jitter > 0.0) {
    for (int j = 0; j < spec.num_elements; ++j)
      s.joints[j] = rng.uniform(0.0, joint_jitter);
  }
  return s;
}

namespace {

void annotate_rewards(Trajectory& traj, const CompoundGoal& goal,
                      const FinetuneConfig& cfg) {
  const int T = traj.num_actions();
  traj.low_rewards.resize(T);
  for (int t = 0; t < T; ++t) {
    traj.low_rewards[t] =
        reward(cfg.reward_low, traj.states.row(t + 1).transpose(),
               traj.subgoals.row(t).transpose());
  }
  const int blocks = static_cast<int>(traj.block_starts.size());
  traj.high_rewards.resize(blocks);
  for (int b = 0; b < blocks; ++b) {
    const int end = b + 1 < blocks ? traj.block_starts[b + 1] : T;
    traj.high_rewards[b] = reward(
        cfg.reward_high, traj.states.row(end).transpose(), goal.target_state);
  }
}

struct LevelBatch {
  NpgBatch npg;
  double mean_return = 0.0;  // per-episode undiscounted reward sum
};

// Each high-level decision block is one low-level episode: returns are
// discounted within the block, against its fixed subgoal.
LevelBatch build_low_batch(const std::vector<Trajectory>& rollouts,
                           double discount, int high_period) {
  std::size_t total = 0;
  for (const Trajectory& tr : rollouts)
    total += static_cast<std::size_t>(tr.num_actions());
  const int ds = rollouts.front().state_dim();
  const int da = rollouts.front().action_dim();

  LevelBatch out;
  out.npg.X.resize(static_cast<Eigen::Index>(total), 2 * ds);
  out.npg.A.resize(static_cast<Eigen::Index>(total), da);
  Eigen::VectorXd returns(static_cast<Eigen::Index>(total));
  Eigen::VectorXd tau(static_cast<Eigen::Index>(total));

  Eigen::Index row = 0;
  double reward_sum = 0.0;
  for (const Trajectory& tr : rollouts) {
    const int T = tr.num_actions();
    reward_sum += tr.low_rewards.sum();
    const int blocks = static_cast<int>(tr.block_starts.size());
    for (int b = 0; b < blocks; ++b) {
      const int t0 = tr.block_starts[b];
      const int t1 = b + 1 < blocks ? tr.block_starts[b + 1] : T;
      const Eigen::VectorXd seg =
          discounted_returns(tr.low_rewards.segment(t0, t1 - t0), discount);
      for (int t = t0; t < t1; ++t, ++row) {
        out.npg.X.row(row).head(ds) = tr.states.row(t);
        out.npg.X.row(row).tail(ds) = tr.subgoals.row(t);
        out.npg.A.row(row) = tr.actions.row(t);
        returns[row] = seg[t - t0];
        tau[row] = static_cast<double>(t - t0) /
                   static_cast<double>(high_period);
      }
    }
  }
  out.mean_return = reward_sum / static_cast<double>(rollouts.size());

  const Eigen::MatrixXd feats =
      LinearBaseline::features(out.npg.X, tau, ds);
  const LinearBaseline baseline = LinearBaseline::fit(feats, returns);
  Eigen::VectorXd adv = returns - baseline.predict(feats);
  const double mean = adv.mean();
  const double sd = std::sqrt(
      (adv.array() - mean).square().sum() /
      std::max<double>(1.0, static_cast<double>(adv.size()) - 1.0));
  out.npg.advantage = (adv.array() - mean) / (sd + 1e-8);
  return out;
}

// One sample per high-level decision; the goal stays the episode goal.
LevelBatch build_high_batch(const std::vector<Trajectory>& rollouts,
                            const Eigen::VectorXd& goal_target,
                            double discount) {
  std::size_t total = 0;
  for (const Trajectory& tr : rollouts) total += tr.block_starts.size();
  const int ds = rollouts.front().state_dim();

  LevelBatch out;
  out.npg.X.resize(static_cast<Eigen::Index>(total), 2 * ds);
  out.npg.A.resize(static_cast<Eigen::Index>(total), ds);
  Eigen::VectorXd returns(static_cast<Eigen::Index>(total));
  Eigen::VectorXd tau(static_cast<Eigen::Index>(total));

  Eigen::Index row = 0;
  double reward_sum = 0.0;
  for (const Trajectory& tr : rollouts) {
    const int blocks = static_cast<int>(tr.block_starts.size());
    reward_sum += tr.high_rewards.sum();
    const Eigen::VectorXd seg = discounted_returns(tr.high_rewards, discount);
    for (int b = 0; b < blocks; ++b, ++row) {
      const int t0 = tr.block_starts[b];
      out.npg.X.row(row).head(ds) = tr.states.row(t0);
      out.npg.X.row(row).tail(ds) = goal_target.transpose();
      out.npg.A.row(row) = tr.subgoals.row(t0);
      returns[row] = seg[b];
      tau[row] = static_cast<double>(b) / static_cast<double>(blocks);
    }
  }
  out.mean_return = reward_sum / static_cast<double>(rollouts.size());

  const Eigen::MatrixXd feats = LinearBaseline::features(out.npg.X, tau, ds);
  const LinearBaseline baseline = LinearBaseline::fit(feats, returns);
  Eigen::VectorXd adv = returns - baseline.predict(feats);
  const double mean = adv.mean();
  const double sd = std::sqrt(
      (adv.array() - mean).square().sum() /
      std::max<double>(1.0, static_cast<double>(adv.size()) - 1.0));
  out.npg.advantage = (adv.array() - mean) / (sd + 1e-8);
  return out;
}

// Deterministic subsample without replacement for the curvature estimate.
void fisher_subsample(const NpgBatch& batch, int size, Rng& rng,
                      Eigen::MatrixXd& X, Eigen::MatrixXd& A) {
  const std::size_t n = static_cast<std::size_t>(batch.X.rows());
  if (static_cast<std::size_t>(size) >= n) {
    X = batch.X;
    A = batch.A;
    return;
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < size; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) +
        rng.uniform_index(n - static_cast<std::size_t>(i));
    std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
  }
  X.resize(size, batch.X.cols());
  A.resize(size, batch.A.cols());
  for (int i = 0; i < size; ++i) {
    X.row(i) = batch.X.row(static_cast<Eigen::Index>(idx[i]));
    A.row(i) = batch.A.row(static_cast<Eigen::Index>(idx[i]));
  }
}

std::optional<DemoBatch> sample_demo_batch(const Dataset& buffer,
                                           double lambda, int size, Rng& rng) {
  if (lambda <= 0.0 || buffer.empty()) return std::nullopt;
  const std::size_t n = buffer.size();
  std::vector<std::size_t> idx(
      static_cast<std::size_t>(std::min<std::size_t>(
          static_cast<std::size_t>(size), n)));
  for (auto& i : idx) i = rng.uniform_index(n);
  DemoBatch demo;
  demo.weight = lambda;
  buffer.gather(idx, demo.X, demo.A);
  return demo;
}

IterationStats rollout_stats(const std::vector<Trajectory>& rollouts,
                             const EnvSpec& spec, const CompoundGoal& goal) {
  IterationStats s;
  double completion = 0.0;
  int successes = 0;
  for (const Trajectory& tr : rollouts) {
    const int done =
        step_completion(tr.final_state(), goal, spec.completion_tolerance);
    completion += done;
    if (done == 4) ++successes;
  }
  s.mean_completion = completion / static_cast<double>(rollouts.size());
  s.success_rate =
      static_cast<double>(successes) / static_cast<double>(rollouts.size());
  return s;
}

NpgSettings npg_settings(const FinetuneConfig& cfg) {
  return NpgSettings{cfg.kl_step, cfg.cg_iters, cfg.cg_damping,
                     cfg.max_backtracks};
}

}  // namespace

Eigen::VectorXd discounted_returns(const Eigen::VectorXd& rewards,
                                   double discount) {
  Eigen::VectorXd out(rewards.size());
  double acc = 0.0;
  for (Eigen::Index t = rewards.size() - 1; t >= 0; --t) {
    acc = rewards[t] + discount * acc;
    out[t] = acc;
  }
  return out;
}

std::vector<Trajectory> collect_rollouts(const GaussianPolicy& high,
                                         const GaussianPolicy& low,
                                         const EnvSpec& spec,
                                         const CompoundGoal& goal, int n,
                                         const FinetuneConfig& cfg,
                                         const ExecutorConfig& exec,
                                         std::uint64_t iter_seed) {
  if (n < 1) throw std::invalid_argument("rollout count < 1");
  std::vector<Trajectory> rollouts(static_cast<std::size_t>(n));
  parallel_for(static_cast<std::size_t>(n), cfg.workers, [&](std::size_t i) {
    const std::uint64_t seed = derive_seed(iter_seed, i, 0xc0);
    Rng start_rng(derive_seed(seed, 0x57a9));
    const EnvState start = jittered_initial_state(
        spec, cfg.start_jitter_effector, cfg.start_jitter_joints, start_rng);
    Trajectory tr = run_hierarchical(high, low, spec, start, goal.target_state,
                                     exec, seed);
    annotate_rewards(tr, goal, cfg);
    rollouts[i] = std::move(tr);
  });
  return rollouts;
}

FinetuneResult finetune_goal(const GaussianPolicy& high,
                             const GaussianPolicy& low, const EnvSpec& spec,
                             const CompoundGoal& goal, Dataset d_low,
                             Dataset d_high, const RelabelConfig& relabel,
                             const FinetuneConfig& cfg,
                             const ExecutorConfig& exec) {
  validate_finetune_config(cfg);
  const bool with_demos = cfg.variant != FinetuneVariant::kNpgRpl;
  if (with_demos && (d_low.empty() || d_high.empty()))
    throw std::invalid_argument(
        "demonstration buffers required for this variant");

  FinetuneResult result;
  result.high = high;
  result.low = low;
  const NpgSettings settings = npg_settings(cfg);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const std::uint64_t iter_seed = derive_seed(cfg.seed, iter, 0xf17e);
    Rng rng(derive_seed(iter_seed, 0x5a));
    const std::vector<Trajectory> rollouts =
        collect_rollouts(result.high, result.low, spec, goal,
                         cfg.trajectories_per_iter, cfg, exec, iter_seed);

    if (cfg.variant == FinetuneVariant::kIrilRpl) {
      // Rollouts reach whatever states they reach; relabeled against those
      // states they are optimal goal-reaching data and join the buffers.
      TrajectoryPool pool = make_pool(rollouts);
      d_low.append_window_block(pool, relabel.low_window, std::nullopt);
      d_high.append_window_block(pool, relabel.high_window,
                                 relabel.low_window);
    }

    IterationStats stats = rollout_stats(rollouts, spec, goal);
    stats.iteration = iter;
    stats.dl_size = d_low.size();
    stats.dh_size = d_high.size();

    LevelBatch low_batch =
        build_low_batch(rollouts, cfg.discount, exec.high_period);
    stats.mean_return_low = low_batch.mean_return;
    if (!std::isfinite(stats.mean_return_low))
      throw DivergenceError("fine-tuning diverged: low-level return not finite");

    Eigen::MatrixXd fx, fa;
    fisher_subsample(low_batch.npg, cfg.fisher_batch, rng, fx, fa);
    const std::optional<DemoBatch> demo = with_demos
        ? sample_demo_batch(d_low, cfg.lambda_low, cfg.demo_batch, rng)
        : std::nullopt;
    const NpgOutcome outcome =
        npg_step(result.low, low_batch.npg, demo, fx, fa, settings);
    stats.kl = outcome.kl;
    stats.grad_norm = outcome.grad_norm;
    stats.natural_norm = outcome.natural_norm;
    stats.step_scale = outcome.step_scale;
    stats.accepted = outcome.accepted;

    if (cfg.finetune_high) {
      LevelBatch high_batch =
          build_high_batch(rollouts, goal.target_state, cfg.discount);
      stats.mean_return_high = high_batch.mean_return;
      Eigen::MatrixXd hfx, hfa;
      fisher_subsample(high_batch.npg, cfg.fisher_batch, rng, hfx, hfa);
      const std::optional<DemoBatch> high_demo = with_demos
          ? sample_demo_batch(d_high, cfg.lambda_high, cfg.demo_batch, rng)
          : std::nullopt;
      npg_step(result.high, high_batch.npg, high_demo, hfx, hfa, settings);
    } else {
      double sum = 0.0;
      for (const Trajectory& tr : rollouts) sum += tr.high_rewards.sum();
      stats.mean_return_high = sum / static_cast<double>(rollouts.size());
    }

    result.stats.push_back(stats);
  }
  return result;
}

FinetuneResult finetune_flat(const GaussianPolicy& policy, const EnvSpec& spec,
                             const CompoundGoal& goal, Dataset d_flat,
                             const FinetuneConfig& cfg,
                             const ExecutorConfig& exec) {
  validate_finetune_config(cfg);
  const bool with_demos =
      cfg.variant != FinetuneVariant::kNpgRpl && cfg.lambda_low > 0.0;
  if (with_demos && d_flat.empty())
    throw std::invalid_argument("flat demo dataset required for this variant");

  FinetuneResult result;
  result.low = policy;
  const NpgSettings settings = npg_settings(cfg);
  const int ds = spec.state_dim();

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const std::uint64_t iter_seed = derive_seed(cfg.seed, iter, 0xf1a2);
    Rng rng(derive_seed(iter_seed, 0x5b));

    std::vector<Trajectory> rollouts(
        static_cast<std::size_t>(cfg.trajectories_per_iter));
    parallel_for(rollouts.size(), cfg.workers, [&](std::size_t i) {
      const std::uint64_t seed = derive_seed(iter_seed, i, 0xc1);
      Rng start_rng(derive_seed(seed, 0x57a9));
      const EnvState start = jittered_initial_state(
          spec, cfg.start_jitter_effector, cfg.start_jitter_joints, start_rng);
      Trajectory tr =
          run_flat(result.low, spec, start, goal.target_state, exec, seed);
      const int T = tr.num_actions();
      tr.low_rewards.resize(T);
      for (int t = 0; t < T; ++t)
        tr.low_rewards[t] =
            reward(cfg.reward_high, tr.states.row(t + 1).transpose(),
                   goal.target_state);
      rollouts[i] = std::move(tr);
    });

    IterationStats stats = rollout_stats(rollouts, spec, goal);
    stats.iteration = iter;
    stats.dl_size = d_flat.size();

    // Whole episodes are the reward segments here.
    std::size_t total = 0;
    for (const Trajectory& tr : rollouts)
      total += static_cast<std::size_t>(tr.num_actions());
    NpgBatch batch;
    batch.X.resize(static_cast<Eigen::Index>(total), 2 * ds);
    batch.A.resize(static_cast<Eigen::Index>(total), EnvSpec::kActionDim);
    Eigen::VectorXd returns(static_cast<Eigen::Index>(total));
    Eigen::VectorXd tau(static_cast<Eigen::Index>(total));
    Eigen::Index row = 0;
    double reward_sum = 0.0;
    for (const Trajectory& tr : rollouts) {
      const int T = tr.num_actions();
      reward_sum += tr.low_rewards.sum();
      const Eigen::VectorXd seg =
          discounted_returns(tr.low_rewards, cfg.discount);
      for (int t = 0; t < T; ++t, ++row) {
        batch.X.row(row).head(ds) = tr.states.row(t);
        batch.X.row(row).tail(ds) = goal.target_state.transpose();
        batch.A.row(row) = tr.actions.row(t);
        returns[row] = seg[t];
        tau[row] = static_cast<double>(t) / static_cast<double>(T);
      }
    }
    stats.mean_return_low = reward_sum / static_cast<double>(rollouts.size());
    if (!std::isfinite(stats.mean_return_low))
      throw DivergenceError("fine-tuning diverged: return not finite");

    const Eigen::MatrixXd feats = LinearBaseline::features(batch.X, tau, ds);
    const LinearBaseline baseline = LinearBaseline::fit(feats, returns);
    Eigen::VectorXd adv = returns - baseline.predict(feats);
    const double mean = adv.mean();
    const double sd = std::sqrt(
        (adv.array() - mean).square().sum() /
        std::max<double>(1.0, static_cast<double>(adv.size()) - 1.0));
    batch.advantage = (adv.array() - mean) / (sd + 1e-8);

    Eigen::MatrixXd fx, fa;
    fisher_subsample(batch, cfg.fisher_batch, rng, fx, fa);
    const std::optional<DemoBatch> demo = with_demos
        ? sample_demo_batch(d_flat, cfg.lambda_low, cfg.demo_batch, rng)
        : std::nullopt;
    const NpgOutcome outcome =
        npg_step(result.low, batch, demo, fx, fa, settings);
    stats.kl = outcome.kl;
    stats.grad_norm = outcome.grad_norm;
    stats.natural_norm = outcome.natural_norm;
    stats.step_scale = outcome.step_scale;
    stats.accepted = outcome.accepted;
    result.stats.push_back(stats);
  }
  return result;
}

FinetuneResult pretrain_low_level_mode(const GaussianPolicy& low,
                                       const EnvSpec& spec,
                                       const CompoundGoal& goal,
                                       const FinetuneConfig& cfg,
                                       const ExecutorConfig& exec) {
  validate_finetune_config(cfg);
  MlpShape shape;
  shape.input_dim = 2 * spec.state_dim();
  shape.output_dim = spec.state_dim();
  shape.hidden = low.shape().hidden;

  FinetuneResult result;
  result.low = low;
  result.high = GaussianPolicy::random_init(
      shape, derive_seed(cfg.seed, 0x9e77));
  const NpgSettings settings = npg_settings(cfg);

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    const std::uint64_t iter_seed = derive_seed(cfg.seed, iter, 0xf1a3);
    Rng rng(derive_seed(iter_seed, 0x5c));
    const std::vector<Trajectory> rollouts =
        collect_rollouts(result.high, result.low, spec, goal,
                         cfg.trajectories_per_iter, cfg, exec, iter_seed);

    IterationStats stats = rollout_stats(rollouts, spec, goal);
    stats.iteration = iter;

    LevelBatch high_batch =
        build_high_batch(rollouts, goal.target_state, cfg.discount);
    stats.mean_return_high = high_batch.mean_return;
    if (!std::isfinite(stats.mean_return_high))
      throw DivergenceError("fine-tuning diverged: high-level return not finite");

    Eigen::MatrixXd fx, fa;
    fisher_subsample(high_batch.npg, cfg.fisher_batch, rng, fx, fa);
    const NpgOutcome outcome = npg_step(result.high, high_batch.npg,
                                        std::nullopt, fx, fa, settings);
    stats.kl = outcome.kl;
    stats.grad_norm = outcome.grad_norm;
    stats.natural_norm = outcome.natural_norm;
    stats.step_scale = outcome.step_scale;
    stats.accepted = outcome.accepted;
    result.stats.push_back(stats);
  }
  return result;
}

}  // namespace relay
