#include "relay/harness.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "relay/parallel.hpp"

namespace relay {

using json = nlohmann::ordered_json;

namespace {

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::array<int, 4> random_subset4(int num_elements, Rng& rng) {
  std::vector<int> all(static_cast<std::size_t>(num_elements));
  std::iota(all.begin(), all.end(), 0);
  for (int i = 0; i < 4; ++i) {
    const std::size_t j =
        static_cast<std::size_t>(i) +
        rng.uniform_index(all.size() - static_cast<std::size_t>(i));
    std::swap(all[static_cast<std::size_t>(i)], all[j]);
  }
  std::array<int, 4> subset{all[0], all[1], all[2], all[3]};
  std::sort(subset.begin(), subset.end());
  return subset;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double std_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double sq = 0.0;
  for (double x : v) sq += (x - m) * (x - m);
  return std::sqrt(sq / static_cast<double>(v.size() - 1));
}

std::string format_double(double v) {
  json j = v;
  return j.dump();
}

}  // namespace

std::vector<CompoundGoal> evaluation_goals(const RunConfig& cfg) {
  return sample_compound_goals(cfg.env, cfg.goal_count, cfg.goal_seed);
}

std::vector<Trajectory> generate_demos(const RunConfig& cfg) {
  std::vector<Trajectory> demos(static_cast<std::size_t>(cfg.demo_count));
  parallel_for(demos.size(), cfg.workers, [&](std::size_t i) {
    Rng subset_rng(derive_seed(cfg.demo_seed, i, 0x5e7));
    const CompoundGoal goal = make_compound_goal(
        cfg.env, random_subset4(cfg.env.num_elements, subset_rng));
    demos[i] = scripted_demo(cfg.env, goal, cfg.demo_noise,
                             derive_seed(cfg.demo_seed, i, 0xde0));
  });
  return demos;
}

std::size_t nearest_neighbor_index(const std::vector<Trajectory>& demos,
                                   const Eigen::VectorXd& goal) {
  if (demos.empty())
    throw std::invalid_argument("nearest neighbor needs demonstrations");
  std::size_t best = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < demos.size(); ++i) {
    const double d = (demos[i].final_state() - goal).norm();
    if (d < best_dist) {  // strict: ties keep the lowest index
      best_dist = d;
      best = i;
    }
  }
  return best;
}

DistillResult distill(const std::vector<PerGoalPolicy>& policies,
                      const RunConfig& cfg,
                      const std::vector<CompoundGoal>& goals) {
  if (policies.size() < 2)
    throw std::invalid_argument("distillation needs at least two policies");
  DistillResult result;
  std::vector<std::vector<Trajectory>> successes(policies.size());

  for (std::size_t p = 0; p < policies.size(); ++p) {
    const PerGoalPolicy& pg = policies[p];
    const CompoundGoal& goal = goals.at(static_cast<std::size_t>(pg.goal_index));
    std::vector<Trajectory> rollouts(
        static_cast<std::size_t>(cfg.distill_rollouts));
    parallel_for(rollouts.size(), cfg.workers, [&](std::size_t k) {
      const std::uint64_t seed =
          derive_seed(cfg.distill_seed, static_cast<std::uint64_t>(pg.goal_index), k);
      Rng start_rng(derive_seed(seed, 0x57a9));
      const EnvState start = jittered_initial_state(
          cfg.env, cfg.eval.start_jitter_effector, cfg.eval.start_jitter_joints,
          start_rng);
      rollouts[k] = run_hierarchical(pg.high, pg.low, cfg.env, start,
                                     goal.target_state, cfg.exec, seed);
    });
    for (Trajectory& tr : rollouts) {
      if (step_completion(tr.final_state(), goal,
                          cfg.env.completion_tolerance) == 4) {
        tr.subgoals.resize(0, 0);  // pooled data is plain trajectories
        tr.block_starts.clear();
        successes[p].push_back(std::move(tr));
      }
    }
    if (successes[p].empty()) {
      result.skipped_goals.push_back(pg.goal_index);
    } else {
      result.distilled_goals.push_back(pg.goal_index);
    }
  }

  std::vector<Trajectory> pooled;
  for (auto& group : successes)
    for (Trajectory& tr : group) pooled.push_back(std::move(tr));
  if (pooled.empty())
    throw RuntimeError3("distillation found no successful episodes");
  result.kept_episodes = pooled.size();

  TrajectoryPool pool = make_pool(std::move(pooled));
  const Dataset dl = relabel_low(pool, cfg.relabel);
  const Dataset dh = relabel_high(pool, cfg.relabel);
  result.dl_size = dl.size();
  result.dh_size = dh.size();

  ILConfig il = cfg.il;
  il.seed = derive_seed(cfg.distill_seed, 0xd157);
  RilResult ril = train_ril(dl, dh, il);
  result.high = std::move(ril.high);
  result.low = std::move(ril.low);
  result.report = std::move(ril.report);
  return result;
}

std::vector<WindowAblationRow> ablate_window(
    const RunConfig& cfg, const std::vector<Trajectory>& demos,
    const std::vector<CompoundGoal>& goals) {
  TrajectoryPool pool = make_pool(demos);
  std::vector<WindowAblationRow> rows(cfg.ablation_windows.size());

  struct Job {
    std::size_t row;
    int window;
    int seed_index;
  };
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < cfg.ablation_windows.size(); ++r) {
    rows[r].window = cfg.ablation_windows[r];
    rows[r].per_seed_completion.resize(static_cast<std::size_t>(cfg.rpl_seeds));
    rows[r].per_seed_success.resize(static_cast<std::size_t>(cfg.rpl_seeds));
    RelabelConfig rc{cfg.ablation_windows[r], cfg.relabel.high_window};
    rows[r].dl_size = relabel_low(pool, rc).size();
    for (int s = 0; s < cfg.rpl_seeds; ++s)
      jobs.push_back({r, cfg.ablation_windows[r], s});
  }

  parallel_for(jobs.size(), cfg.workers, [&](std::size_t k) {
    const Job& job = jobs[k];
    RelabelConfig rc{job.window, cfg.relabel.high_window};
    const Dataset dl = relabel_low(pool, rc);
    const Dataset dh = relabel_high(pool, rc);
    ILConfig il = cfg.il;
    il.seed = derive_seed(cfg.il.seed, static_cast<std::uint64_t>(job.seed_index),
                          0xab10, static_cast<std::uint64_t>(job.window));
    const RilResult ril = train_ril(dl, dh, il);
    ExecutorConfig exec = cfg.exec;
    exec.high_period = std::min(job.window, exec.episode_length);
    const EvalStats stats = evaluate_hierarchical(
        ril.high, ril.low, cfg.env, goals, exec, cfg.eval,
        derive_seed(cfg.eval_seed, static_cast<std::uint64_t>(job.window),
                    static_cast<std::uint64_t>(job.seed_index), 0xab11),
        1);
    rows[job.row].per_seed_completion[static_cast<std::size_t>(job.seed_index)] =
        stats.mean_completion;
    rows[job.row].per_seed_success[static_cast<std::size_t>(job.seed_index)] =
        stats.success_rate;
  });

  for (auto& row : rows) {
    row.mean_completion = mean_of(row.per_seed_completion);
    row.mean_success = mean_of(row.per_seed_success);
  }
  return rows;
}

std::vector<RewardAblationRow> ablate_reward(
    const RunConfig& cfg, const std::vector<Trajectory>& demos,
    const std::vector<CompoundGoal>& goals) {
  TrajectoryPool pool = make_pool(demos);
  const Dataset dl = relabel_low(pool, cfg.relabel);
  const Dataset dh = relabel_high(pool, cfg.relabel);

  // One RIL init per seed, branched into every reward kind.
  std::vector<RilResult> inits(static_cast<std::size_t>(cfg.rpl_seeds));
  parallel_for(inits.size(), cfg.workers, [&](std::size_t s) {
    ILConfig il = cfg.il;
    il.seed = derive_seed(cfg.il.seed, s, 0xab20);
    inits[s] = train_ril(dl, dh, il);
  });

  const std::size_t kinds = cfg.ablation_rewards.size();
  std::vector<RewardAblationRow> rows(kinds);
  for (std::size_t k = 0; k < kinds; ++k) {
    rows[k].kind = cfg.ablation_rewards[k];
    rows[k].per_seed_success_init.resize(static_cast<std::size_t>(cfg.rpl_seeds));
    rows[k].per_seed_success_final.resize(
        static_cast<std::size_t>(cfg.rpl_seeds));
    rows[k].init_hashes.resize(static_cast<std::size_t>(cfg.rpl_seeds));
  }

  const std::vector<CompoundGoal> subset(
      goals.begin(), goals.begin() + cfg.ablation_goal_count);

  struct Job {
    std::size_t kind_index;
    int seed_index;
  };
  std::vector<Job> jobs;
  for (std::size_t k = 0; k < kinds; ++k)
    for (int s = 0; s < cfg.rpl_seeds; ++s) jobs.push_back({k, s});

  parallel_for(jobs.size(), cfg.workers, [&](std::size_t jidx) {
    const Job& job = jobs[jidx];
    const RilResult& init = inits[static_cast<std::size_t>(job.seed_index)];
    rows[job.kind_index].init_hashes[static_cast<std::size_t>(job.seed_index)] =
        param_hash(init.low);

    double success_init = 0.0, success_final = 0.0;
    for (std::size_t g = 0; g < subset.size(); ++g) {
      FinetuneConfig ft = cfg.finetune;
      ft.iterations = cfg.ablation_iterations;
      ft.reward_low.kind = cfg.ablation_rewards[job.kind_index];
      ft.seed = derive_seed(cfg.finetune.seed, g,
                            static_cast<std::uint64_t>(job.seed_index),
                            0xab30 + job.kind_index);
      ft.workers = 1;
      const FinetuneResult res =
          finetune_goal(init.high, init.low, cfg.env, subset[g], dl, dh,
                        cfg.relabel, ft, cfg.exec);
      const std::vector<CompoundGoal> one{subset[g]};
      const std::uint64_t eval_seed = derive_seed(
          cfg.eval_seed, g, static_cast<std::uint64_t>(job.seed_index), 0xab31);
      const EvalStats before = evaluate_hierarchical(
          init.high, init.low, cfg.env, one, cfg.exec, cfg.eval, eval_seed, 1);
      const EvalStats after = evaluate_hierarchical(
          res.high, res.low, cfg.env, one, cfg.exec, cfg.eval, eval_seed, 1);
      success_init += before.success_rate;
      success_final += after.success_rate;
    }
    rows[job.kind_index]
        .per_seed_success_init[static_cast<std::size_t>(job.seed_index)] =
        success_init / static_cast<double>(subset.size());
    rows[job.kind_index]
        .per_seed_success_final[static_cast<std::size_t>(job.seed_index)] =
        success_final / static_cast<double>(subset.size());
  });

  for (auto& row : rows) {
    row.mean_success_init = mean_of(row.per_seed_success_init);
    row.mean_success_final = mean_of(row.per_seed_success_final);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

Pipeline::Pipeline(RunConfig cfg) : cfg_(std::move(cfg)), out_(cfg_.output_dir) {}

std::filesystem::path Pipeline::demos_path() const {
  return out_ / "demos.jsonl";
}
std::filesystem::path Pipeline::dataset_path(const std::string& name) const {
  return out_ / "datasets" / (name + ".jsonl");
}
std::filesystem::path Pipeline::params_stem(const std::string& name) const {
  return out_ / "params" / name;
}
std::filesystem::path Pipeline::metrics_path(const std::string& name) const {
  return out_ / "metrics" / (name + ".jsonl");
}
std::filesystem::path Pipeline::report_path(const std::string& name) const {
  return out_ / "report" / name;
}

std::vector<Trajectory> Pipeline::load_demos() const {
  return read_trajectories(demos_path());
}

Dataset Pipeline::load_dataset(const std::string& name) const {
  return read_dataset(dataset_path(name));
}

std::vector<int> Pipeline::finetune_goal_indices() const {
  std::vector<int> idx(static_cast<std::size_t>(cfg_.finetune_goal_count));
  std::iota(idx.begin(), idx.end(), 0);
  return idx;
}

void Pipeline::gen_demos() {
  std::filesystem::create_directories(out_);
  save_run_config(out_ / "config.json", cfg_);
  const std::vector<Trajectory> demos = generate_demos(cfg_);
  write_trajectories(demos_path(), demos);
  std::size_t truncated = 0;
  for (const Trajectory& tr : demos)
    if (tr.truncated) ++truncated;
  std::cout << "wrote " << demos.size() << " demos to " << demos_path()
            << " (" << truncated << " truncated)\n";
  if (truncated > 0)
    std::cerr << "warning: " << truncated
              << " demonstrations hit the step budget before finishing\n";
}

void Pipeline::relabel(const std::vector<std::string>& sets) {
  const std::vector<Trajectory> demos = load_demos();
  TrajectoryPool pool = make_pool(demos);
  std::filesystem::create_directories(out_ / "datasets");
  for (const std::string& set : sets) {
    Dataset data;
    if (set == "low") {
      data = relabel_low(pool, cfg_.relabel);
    } else if (set == "high") {
      data = relabel_high(pool, cfg_.relabel);
    } else if (set == "gcbc") {
      data = relabel_flat(pool, cfg_.relabel.high_window);
    } else if (set == "bc") {
      data = relabel_flat(pool, std::nullopt);
    } else {
      throw ConfigError("unknown relabel set: " + set);
    }
    if (data.skipped_empty() > 0)
      std::cerr << "warning: skipped " << data.skipped_empty()
                << " zero-action trajectories\n";
    write_dataset(dataset_path(set), data);
    std::cout << "wrote " << data.size() << " tuples to "
              << dataset_path(set) << "\n";
  }
}

void Pipeline::train_il(const std::string& method) {
  if (method == "all") {
    train_il("ril");
    train_il("gcbc");
    train_il("bc");
    return;
  }
  std::filesystem::create_directories(out_ / "params");
  std::filesystem::create_directories(out_ / "metrics");
  MetricsWriter metrics(metrics_path("il_" + method));

  const int seeds = cfg_.rpl_seeds;
  if (method == "ril") {
    const Dataset dl = load_dataset("low");
    const Dataset dh = load_dataset("high");
    std::vector<RilResult> results(static_cast<std::size_t>(seeds));
    parallel_for(results.size(), cfg_.workers, [&](std::size_t s) {
      ILConfig il = cfg_.il;
      il.seed = derive_seed(cfg_.il.seed, s, fnv1a("ril"));
      results[s] = train_ril(dl, dh, il);
    });
    for (int s = 0; s < seeds; ++s) {
      const RilResult& r = results[static_cast<std::size_t>(s)];
      write_policy(params_stem("ril_low_seed" + std::to_string(s)), r.low);
      write_policy(params_stem("ril_high_seed" + std::to_string(s)), r.high);
      for (const EpochRecord& e : r.report.low)
        metrics.record(json{{"record", "il_epoch"}, {"method", "ril"},
                            {"seed", s}, {"level", "low"},
                            {"epoch", e.epoch}, {"nll", e.nll}}.dump());
      for (const EpochRecord& e : r.report.high)
        metrics.record(json{{"record", "il_epoch"}, {"method", "ril"},
                            {"seed", s}, {"level", "high"},
                            {"epoch", e.epoch}, {"nll", e.nll}}.dump());
    }
  } else if (method == "gcbc" || method == "bc") {
    const Dataset d = load_dataset(method);
    std::vector<std::pair<GaussianPolicy, ILReport>> results(
        static_cast<std::size_t>(seeds));
    parallel_for(results.size(), cfg_.workers, [&](std::size_t s) {
      ILConfig il = cfg_.il;
      il.seed = derive_seed(cfg_.il.seed, s, fnv1a(method));
      results[s] = train_flat(d, il);
    });
    for (int s = 0; s < seeds; ++s) {
      const auto& r = results[static_cast<std::size_t>(s)];
      write_policy(params_stem(method + "_seed" + std::to_string(s)), r.first);
      for (const EpochRecord& e : r.second.low)
        metrics.record(json{{"record", "il_epoch"}, {"method", method},
                            {"seed", s}, {"level", "flat"},
                            {"epoch", e.epoch}, {"nll", e.nll}}.dump());
    }
  } else {
    throw ConfigError("unknown train-il method: " + method);
  }
  std::cout << "trained " << method << " over " << seeds << " seeds\n";
}

void Pipeline::finetune(const std::string& target) {
  if (target == "rpl" || target == "all") {
    finetune("npg-rpl");
    finetune("dapg-rpl");
    finetune("iril-rpl");
    if (target == "all") {
      finetune("flat-gcbc");
      finetune("pretrain");
    }
    return;
  }
  std::filesystem::create_directories(out_ / "params");
  std::filesystem::create_directories(out_ / "metrics");
  const std::vector<CompoundGoal> goals = evaluation_goals(cfg_);
  const std::vector<int> subset = finetune_goal_indices();

  auto record_stats = [](MetricsWriter& metrics, const std::string& method,
                         int goal, int seed,
                         const std::vector<IterationStats>& stats) {
    for (const IterationStats& it : stats) {
      metrics.record(json{{"record", "rrf_iter"},
                          {"method", method},
                          {"goal", goal},
                          {"seed", seed},
                          {"iteration", it.iteration},
                          {"mean_return_low", it.mean_return_low},
                          {"mean_return_high", it.mean_return_high},
                          {"success_rate", it.success_rate},
                          {"mean_completion", it.mean_completion},
                          {"kl", it.kl},
                          {"grad_norm", it.grad_norm},
                          {"natural_norm", it.natural_norm},
                          {"step_scale", it.step_scale},
                          {"accepted", it.accepted},
                          {"dl_size", it.dl_size},
                          {"dh_size", it.dh_size}}
                         .dump());
    }
  };

  if (target == "npg-rpl" || target == "dapg-rpl" || target == "iril-rpl") {
    const FinetuneVariant variant = finetune_variant_from_string(target);
    Dataset dl, dh;
    if (variant != FinetuneVariant::kNpgRpl) {
      dl = load_dataset("low");
      dh = load_dataset("high");
    }
    MetricsWriter metrics(metrics_path("rrf_" + target));
    for (int s = 0; s < cfg_.rpl_seeds; ++s) {
      const GaussianPolicy high =
          read_policy(params_stem("ril_high_seed" + std::to_string(s)));
      const GaussianPolicy low =
          read_policy(params_stem("ril_low_seed" + std::to_string(s)));
      for (int gi : subset) {
        FinetuneConfig ft = cfg_.finetune;
        ft.variant = variant;
        ft.mode = FinetuneMode::kRelay;
        ft.seed = derive_seed(cfg_.finetune.seed, static_cast<std::uint64_t>(gi),
                              static_cast<std::uint64_t>(s), fnv1a(target));
        const FinetuneResult res =
            finetune_goal(high, low, cfg_.env, goals[static_cast<std::size_t>(gi)],
                          dl, dh, cfg_.relabel, ft, cfg_.exec);
        const std::string stem = "ft_" + target + "_goal" + std::to_string(gi) +
                                 "_seed" + std::to_string(s);
        write_policy(params_stem(stem + "_low"), res.low);
        write_policy(params_stem(stem + "_high"), res.high);
        record_stats(metrics, target, gi, s, res.stats);
      }
    }
  } else if (target == "flat-gcbc") {
    const Dataset d = load_dataset("gcbc");
    MetricsWriter metrics(metrics_path("rrf_flat-gcbc"));
    for (int s = 0; s < cfg_.baseline_seeds; ++s) {
      const GaussianPolicy init =
          read_policy(params_stem("gcbc_seed" + std::to_string(s)));
      for (int gi : subset) {
        FinetuneConfig ft = cfg_.finetune;
        ft.mode = FinetuneMode::kFlat;
        ft.seed = derive_seed(cfg_.finetune.seed, static_cast<std::uint64_t>(gi),
                              static_cast<std::uint64_t>(s), fnv1a(target));
        const FinetuneResult res = finetune_flat(
            init, cfg_.env, goals[static_cast<std::size_t>(gi)], d, ft, cfg_.exec);
        write_policy(params_stem("ft_flat-gcbc_goal" + std::to_string(gi) +
                                 "_seed" + std::to_string(s)),
                     res.low);
        record_stats(metrics, "flat-gcbc", gi, s, res.stats);
      }
    }
  } else if (target == "pretrain") {
    MetricsWriter metrics(metrics_path("rrf_pretrain"));
    for (int s = 0; s < cfg_.baseline_seeds; ++s) {
      const GaussianPolicy low =
          read_policy(params_stem("ril_low_seed" + std::to_string(s)));
      const std::uint64_t low_hash = param_hash(low);
      for (int gi : subset) {
        FinetuneConfig ft = cfg_.finetune;
        ft.mode = FinetuneMode::kPretrainLowLevel;
        ft.seed = derive_seed(cfg_.finetune.seed, static_cast<std::uint64_t>(gi),
                              static_cast<std::uint64_t>(s), fnv1a(target));
        const FinetuneResult res = pretrain_low_level_mode(
            low, cfg_.env, goals[static_cast<std::size_t>(gi)], ft, cfg_.exec);
        if (param_hash(res.low) != low_hash)
          throw RuntimeError3("frozen low level changed during pretrain mode");
        write_policy(params_stem("pretrain_high_goal" + std::to_string(gi) +
                                 "_seed" + std::to_string(s)),
                     res.high);
        record_stats(metrics, "pretrain", gi, s, res.stats);
      }
    }
  } else {
    throw ConfigError("unknown finetune target: " + target);
  }
  std::cout << "finetune " << target << " done\n";
}

void Pipeline::distill_stage() {
  const std::vector<CompoundGoal> goals = evaluation_goals(cfg_);
  const std::string variant = to_string(cfg_.finetune.variant);
  std::vector<PerGoalPolicy> policies;
  for (int gi : finetune_goal_indices()) {
    const std::string stem =
        "ft_" + variant + "_goal" + std::to_string(gi) + "_seed0";
    PerGoalPolicy pg;
    pg.goal_index = gi;
    pg.high = read_policy(params_stem(stem + "_high"));
    pg.low = read_policy(params_stem(stem + "_low"));
    policies.push_back(std::move(pg));
  }
  const DistillResult res = distill(policies, cfg_, goals);
  for (int g : res.skipped_goals)
    std::cerr << "warning: goal " << g
              << " had no successful rollouts; excluded from distillation\n";
  std::filesystem::create_directories(out_ / "metrics");
  write_policy(params_stem("distill_low"), res.low);
  write_policy(params_stem("distill_high"), res.high);
  MetricsWriter metrics(metrics_path("distill"));
  metrics.record(json{{"record", "distill"},
                      {"goals", res.distilled_goals},
                      {"skipped", res.skipped_goals},
                      {"kept_episodes", res.kept_episodes},
                      {"dl_size", res.dl_size},
                      {"dh_size", res.dh_size}}
                     .dump());
  for (const EpochRecord& e : res.report.low)
    metrics.record(json{{"record", "il_epoch"}, {"method", "distill"},
                        {"seed", 0}, {"level", "low"}, {"epoch", e.epoch},
                        {"nll", e.nll}}.dump());
  for (const EpochRecord& e : res.report.high)
    metrics.record(json{{"record", "il_epoch"}, {"method", "distill"},
                        {"seed", 0}, {"level", "high"}, {"epoch", e.epoch},
                        {"nll", e.nll}}.dump());
  std::cout << "distilled " << res.distilled_goals.size() << " goals from "
            << res.kept_episodes << " successful episodes\n";
}

void Pipeline::evaluate(const std::string& method) {
  if (method == "all") {
    const std::vector<std::string> methods = {
        "ril", "gcbc", "bc", "nn", "ft-npg-rpl", "ft-dapg-rpl",
        "ft-iril-rpl", "flat-gcbc-ft", "pretrain", "distill"};
    for (const std::string& m : methods) {
      try {
        evaluate_one(m);
      } catch (const MissingArtifactError&) {
        std::cerr << "skipping evaluate " << m << " (artifacts missing)\n";
      }
    }
    return;
  }
  evaluate_one(method);
}

void Pipeline::evaluate_one(const std::string& method) {
  std::filesystem::create_directories(out_ / "metrics");
  const std::vector<CompoundGoal> goals = evaluation_goals(cfg_);
  const std::vector<int> subset = finetune_goal_indices();
  MetricsWriter metrics(metrics_path("eval_" + method));

  auto write_records = [&](int seed, const std::vector<EpisodeRecord>& eps) {
    for (const EpisodeRecord& e : eps) {
      metrics.record(json{{"record", "episode"},
                          {"method", method},
                          {"seed", seed},
                          {"goal", e.goal_index},
                          {"episode", e.episode},
                          {"completion", e.completion},
                          {"success", e.success}}
                         .dump());
    }
  };
  auto write_summary = [&](int seed, const EvalStats& stats) {
    metrics.record(json{{"record", "eval_summary"},
                        {"method", method},
                        {"seed", seed},
                        {"episodes", stats.episodes.size()},
                        {"success_rate", stats.success_rate},
                        {"mean_completion", stats.mean_completion},
                        {"std_completion", stats.std_completion}}
                       .dump());
  };
  const std::uint64_t base_seed = derive_seed(cfg_.eval_seed, fnv1a(method));

  if (method == "ril") {
    for (int s = 0; s < cfg_.rpl_seeds; ++s) {
      const GaussianPolicy high =
          read_policy(params_stem("ril_high_seed" + std::to_string(s)));
      const GaussianPolicy low =
          read_policy(params_stem("ril_low_seed" + std::to_string(s)));
      const EvalStats stats = evaluate_hierarchical(
          high, low, cfg_.env, goals, cfg_.exec, cfg_.eval,
          derive_seed(base_seed, static_cast<std::uint64_t>(s)), cfg_.workers);
      write_records(s, stats.episodes);
      write_summary(s, stats);
    }
  } else if (method == "gcbc" || method == "bc") {
    for (int s = 0; s < cfg_.rpl_seeds; ++s) {
      const GaussianPolicy policy =
          read_policy(params_stem(method + "_seed" + std::to_string(s)));
      const EvalStats stats = evaluate_flat(
          policy, cfg_.env, goals, cfg_.exec, cfg_.eval,
          derive_seed(base_seed, static_cast<std::uint64_t>(s)), cfg_.workers);
      write_records(s, stats.episodes);
      write_summary(s, stats);
    }
  } else if (method == "nn") {
    const std::vector<Trajectory> demos = load_demos();
    std::vector<Eigen::MatrixXd> plans;
    plans.reserve(goals.size());
    for (const CompoundGoal& goal : goals) {
      const std::size_t idx = nearest_neighbor_index(demos, goal.target_state);
      plans.push_back(demos[idx].actions);
    }
    const EvalStats stats = evaluate_open_loop(plans, cfg_.env, goals,
                                               cfg_.eval, base_seed,
                                               cfg_.workers);
    write_records(0, stats.episodes);
    write_summary(0, stats);
  } else if (method.rfind("ft-", 0) == 0 || method == "flat-gcbc-ft" ||
             method == "pretrain") {
    const bool flat = method == "flat-gcbc-ft";
    const bool pretrain = method == "pretrain";
    const int seeds =
        (flat || pretrain) ? cfg_.baseline_seeds : cfg_.rpl_seeds;
    for (int s = 0; s < seeds; ++s) {
      std::vector<EpisodeRecord> pooled;
      for (int gi : subset) {
        const std::vector<CompoundGoal> one{goals[static_cast<std::size_t>(gi)]};
        const std::uint64_t seed =
            derive_seed(base_seed, static_cast<std::uint64_t>(s),
                        static_cast<std::uint64_t>(gi));
        EvalStats stats;
        if (flat) {
          const GaussianPolicy policy = read_policy(
              params_stem("ft_flat-gcbc_goal" + std::to_string(gi) + "_seed" +
                          std::to_string(s)));
          stats = evaluate_flat(policy, cfg_.env, one, cfg_.exec, cfg_.eval,
                                seed, cfg_.workers);
        } else if (pretrain) {
          const GaussianPolicy high = read_policy(
              params_stem("pretrain_high_goal" + std::to_string(gi) + "_seed" +
                          std::to_string(s)));
          const GaussianPolicy low =
              read_policy(params_stem("ril_low_seed" + std::to_string(s)));
          stats = evaluate_hierarchical(high, low, cfg_.env, one, cfg_.exec,
                                        cfg_.eval, seed, cfg_.workers);
        } else {
          const std::string variant = method.substr(3);
          const std::string stem = "ft_" + variant + "_goal" +
                                   std::to_string(gi) + "_seed" +
                                   std::to_string(s);
          const GaussianPolicy high = read_policy(params_stem(stem + "_high"));
          const GaussianPolicy low = read_policy(params_stem(stem + "_low"));
          stats = evaluate_hierarchical(high, low, cfg_.env, one, cfg_.exec,
                                        cfg_.eval, seed, cfg_.workers);
        }
        for (EpisodeRecord e : stats.episodes) {
          e.goal_index = gi;
          pooled.push_back(e);
        }
      }
      const EvalStats stats = summarize_episodes(std::move(pooled));
      write_records(s, stats.episodes);
      write_summary(s, stats);
    }
  } else if (method == "distill") {
    const GaussianPolicy high = read_policy(params_stem("distill_high"));
    const GaussianPolicy low = read_policy(params_stem("distill_low"));
    std::vector<EpisodeRecord> pooled;
    for (int gi : subset) {
      const std::vector<CompoundGoal> one{goals[static_cast<std::size_t>(gi)]};
      const EvalStats stats = evaluate_hierarchical(
          high, low, cfg_.env, one, cfg_.exec, cfg_.eval,
          derive_seed(base_seed, 0, static_cast<std::uint64_t>(gi)),
          cfg_.workers);
      for (EpisodeRecord e : stats.episodes) {
        e.goal_index = gi;
        pooled.push_back(e);
      }
    }
    const EvalStats stats = summarize_episodes(std::move(pooled));
    write_records(0, stats.episodes);
    write_summary(0, stats);
  } else {
    throw ConfigError("unknown evaluate method: " + method);
  }
  std::cout << "evaluated " << method << "\n";
}

void Pipeline::ablate(const std::string& kind) {
  if (kind == "all") {
    ablate("window");
    ablate("reward");
    return;
  }
  std::filesystem::create_directories(out_ / "metrics");
  const std::vector<Trajectory> demos = load_demos();
  const std::vector<CompoundGoal> goals = evaluation_goals(cfg_);
  if (kind == "window") {
    const std::vector<WindowAblationRow> rows =
        ablate_window(cfg_, demos, goals);
    MetricsWriter metrics(metrics_path("ablate_window"));
    for (const WindowAblationRow& row : rows) {
      for (std::size_t s = 0; s < row.per_seed_completion.size(); ++s) {
        metrics.record(json{{"record", "ablate_window"},
                            {"window", row.window},
                            {"seed", s},
                            {"mean_completion", row.per_seed_completion[s]},
                            {"success_rate", row.per_seed_success[s]},
                            {"dl_size", row.dl_size}}
                           .dump());
      }
    }
  } else if (kind == "reward") {
    const std::vector<RewardAblationRow> rows =
        ablate_reward(cfg_, demos, goals);
    MetricsWriter metrics(metrics_path("ablate_reward"));
    for (const RewardAblationRow& row : rows) {
      for (std::size_t s = 0; s < row.per_seed_success_final.size(); ++s) {
        metrics.record(json{{"record", "ablate_reward"},
                            {"kind", to_string(row.kind)},
                            {"seed", s},
                            {"success_init", row.per_seed_success_init[s]},
                            {"success_final", row.per_seed_success_final[s]},
                            {"init_hash", row.init_hashes[s]}}
                           .dump());
      }
    }
  } else {
    throw ConfigError("unknown ablation kind: " + kind);
  }
  std::cout << "ablation " << kind << " done\n";
}

void Pipeline::report() {
  std::filesystem::create_directories(out_ / "report");
  bool wrote_any = false;

  auto parse_metrics = [&](const std::string& name,
                           std::vector<json>& out_records) -> bool {
    const std::filesystem::path path = metrics_path(name);
    if (!std::filesystem::exists(path)) return false;
    for (const std::string& line : read_metric_lines(path))
      out_records.push_back(json::parse(line));
    return true;
  };

  // Headline imitation table.
  {
    std::map<std::string, std::vector<json>> by_method;
    for (const std::string m : {"ril", "gcbc", "bc"}) {
      std::vector<json> records;
      if (parse_metrics("eval_" + m, records)) by_method[m] = records;
    }
    if (!by_method.empty()) {
      std::ostringstream table;
      table << "Goal-conditioned imitation, " << cfg_.goal_count
            << " compound goals, " << cfg_.rpl_seeds << " seeds\n\n";
      table << std::left;
      table << "  method   success_rate_pct   step_completion_mean   "
               "step_completion_std\n";
      for (const auto& [m, records] : by_method) {
        std::vector<EpisodeRecord> eps;
        for (const json& r : records) {
          if (r.value("record", "") != "episode") continue;
          EpisodeRecord e;
          e.goal_index = r.at("goal").get<int>();
          e.episode = r.at("episode").get<int>();
          e.completion = r.at("completion").get<int>();
          e.success = r.at("success").get<bool>();
          eps.push_back(e);
        }
        const EvalStats stats = summarize_episodes(std::move(eps));
        table << "  " << m << (m.size() < 4 ? std::string(4 - m.size(), ' ')
                                            : "")
              << "     " << format_double(stats.success_rate * 100.0) << "  "
              << format_double(stats.mean_completion) << "  "
              << format_double(stats.std_completion) << "\n";
      }
      std::ofstream out(report_path("table1.txt"));
      out << table.str();
      wrote_any = true;
    }
  }

  // Fine-tuning series, one CSV per method.
  for (const std::string m :
       {"npg-rpl", "dapg-rpl", "iril-rpl", "flat-gcbc", "pretrain"}) {
    std::vector<json> records;
    if (!parse_metrics("rrf_" + m, records)) continue;
    std::map<int, std::map<int, std::vector<double>>> per_iter_seed;  // iter->seed->successes
    for (const json& r : records) {
      if (r.value("record", "") != "rrf_iter") continue;
      per_iter_seed[r.at("iteration").get<int>()][r.at("seed").get<int>()]
          .push_back(r.at("success_rate").get<double>());
    }
    std::ofstream out(report_path("rrf_" + m + ".csv"));
    out << "iteration,success_mean,success_std\n";
    for (const auto& [iter, by_seed] : per_iter_seed) {
      std::vector<double> seed_means;
      for (const auto& [s, vals] : by_seed) seed_means.push_back(mean_of(vals));
      out << iter << "," << format_double(mean_of(seed_means)) << ","
          << format_double(std_of(seed_means)) << "\n";
    }
    wrote_any = true;
  }

  // Baseline comparison table from evaluation summaries.
  {
    std::ostringstream table;
    table << "  method   success_rate_pct (pooled episodes)\n";
    bool have = false;
    for (const std::string m :
         {"ft-npg-rpl", "ft-dapg-rpl", "ft-iril-rpl", "flat-gcbc-ft", "nn",
          "pretrain", "distill", "ril"}) {
      std::vector<json> records;
      if (!parse_metrics("eval_" + m, records)) continue;
      double success = 0.0;
      std::size_t count = 0;
      for (const json& r : records) {
        if (r.value("record", "") != "episode") continue;
        success += r.at("success").get<bool>() ? 1.0 : 0.0;
        ++count;
      }
      if (count == 0) continue;
      table << "  " << m << "  "
            << format_double(100.0 * success / static_cast<double>(count))
            << "\n";
      have = true;
    }
    if (have) {
      std::ofstream out(report_path("baselines.txt"));
      out << table.str();
      wrote_any = true;
    }
  }

  // Ablation series.
  {
    std::vector<json> records;
    if (parse_metrics("ablate_window", records)) {
      std::map<int, std::vector<double>> by_window;
      std::map<int, std::size_t> sizes;
      for (const json& r : records) {
        if (r.value("record", "") != "ablate_window") continue;
        by_window[r.at("window").get<int>()].push_back(
            r.at("mean_completion").get<double>());
        sizes[r.at("window").get<int>()] = r.at("dl_size").get<std::size_t>();
      }
      std::ofstream out(report_path("ablate_window.csv"));
      out << "window,completion_mean,completion_std,dl_size\n";
      for (const auto& [w, vals] : by_window)
        out << w << "," << format_double(mean_of(vals)) << ","
            << format_double(std_of(vals)) << "," << sizes[w] << "\n";
      wrote_any = true;
    }
  }
  {
    std::vector<json> records;
    if (parse_metrics("ablate_reward", records)) {
      std::map<std::string, std::vector<double>> by_kind;
      for (const json& r : records) {
        if (r.value("record", "") != "ablate_reward") continue;
        by_kind[r.at("kind").get<std::string>()].push_back(
            r.at("success_final").get<double>());
      }
      std::ofstream out(report_path("ablate_reward.csv"));
      out << "kind,success_mean,success_std\n";
      for (const auto& [k, vals] : by_kind)
        out << k << "," << format_double(mean_of(vals)) << ","
            << format_double(std_of(vals)) << "\n";
      wrote_any = true;
    }
  }

  if (!wrote_any)
    throw MissingArtifactError(
        "no metrics found under " + (out_ / "metrics").string() +
        "; run earlier stages first");
  std::cout << "report written to " << (out_ / "report") << "\n";
}

void Pipeline::verify() {
  bool checked_any = false;
  for (const auto& entry :
       std::filesystem::directory_iterator(out_ / "metrics")) {
    const std::string name = entry.path().filename().string();
    if (name.rfind("eval_", 0) != 0) continue;
    checked_any = true;
    std::map<int, std::vector<EpisodeRecord>> by_seed;
    std::map<int, json> summaries;
    for (const std::string& line : read_metric_lines(entry.path())) {
      const json r = json::parse(line);
      if (r.value("record", "") == "episode") {
        EpisodeRecord e;
        e.goal_index = r.at("goal").get<int>();
        e.episode = r.at("episode").get<int>();
        e.completion = r.at("completion").get<int>();
        e.success = r.at("success").get<bool>();
        by_seed[r.at("seed").get<int>()].push_back(e);
      } else if (r.value("record", "") == "eval_summary") {
        summaries[r.at("seed").get<int>()] = r;
      }
    }
    for (const auto& [seed, summary] : summaries) {
      const auto it = by_seed.find(seed);
      if (it == by_seed.end())
        throw RuntimeError3(name + ": summary for seed " +
                            std::to_string(seed) + " has no episodes");
      const EvalStats stats = summarize_episodes(it->second);
      if (stats.success_rate != summary.at("success_rate").get<double>() ||
          stats.mean_completion !=
              summary.at("mean_completion").get<double>() ||
          stats.std_completion != summary.at("std_completion").get<double>() ||
          stats.episodes.size() != summary.at("episodes").get<std::size_t>()) {
        throw RuntimeError3(name + ": aggregate mismatch for seed " +
                            std::to_string(seed));
      }
    }
    std::cout << "verified " << name << " (" << summaries.size()
              << " summaries)\n";
  }
  if (!checked_any)
    throw MissingArtifactError("no evaluation metrics to verify under " +
                               (out_ / "metrics").string());
  std::cout << "verify ok\n";
}

}  // namespace relay
