#include "relay/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace relay {

using json = nlohmann::ordered_json;

namespace {

// Translates a byte offset from a parse error into line.column.
std::string locate(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return std::to_string(line) + ":" + std::to_string(col);
}

template <typename T>
void get_to(const json& j, const char* key, T& out, const std::string& scope) {
  if (!j.contains(key)) return;
  try {
    j.at(key).get_to(out);
  } catch (const json::exception& e) {
    throw ConfigError("config key '" + scope + key + "': " + e.what());
  }
}

json reward_kinds_to_json(const std::vector<RewardKind>& kinds) {
  json arr = json::array();
  for (RewardKind k : kinds) arr.push_back(to_string(k));
  return arr;
}

}  // namespace

RunConfig default_run_config() { return finalize_run_config(RunConfig{}); }

RunConfig finalize_run_config(RunConfig cfg) {
  try {
    cfg.env.element_sites.resize(0, 2);
    cfg.env = make_env_spec(cfg.env);
    validate_relabel_config(cfg.relabel);
    validate_executor_config(cfg.exec);
    validate_il_config(cfg.il);
    if (cfg.exec.episode_length != cfg.env.episode_length)
      throw std::invalid_argument(
          "executor episode_length must match env episode_length");
    if (cfg.demo_count < 1) throw std::invalid_argument("demo_count < 1");
    if (cfg.demo_noise < 0.0) throw std::invalid_argument("demo_noise < 0");
    if (cfg.goal_count < 1) throw std::invalid_argument("goal_count < 1");
    if (cfg.finetune_goal_count < 1 ||
        cfg.finetune_goal_count > cfg.goal_count)
      throw std::invalid_argument(
          "finetune_goal_count must be in [1, goal_count]");
    if (cfg.eval.episodes_per_goal < 1)
      throw std::invalid_argument("episodes_per_goal < 1");
    if (cfg.rpl_seeds < 1 || cfg.baseline_seeds < 1)
      throw std::invalid_argument("seed counts must be positive");
    if (cfg.distill_rollouts < 1)
      throw std::invalid_argument("distill_rollouts < 1");
    if (cfg.ablation_iterations < 1)
      throw std::invalid_argument("ablation_iterations < 1");
    if (cfg.ablation_goal_count < 1 ||
        cfg.ablation_goal_count > cfg.goal_count)
      throw std::invalid_argument(
          "ablation_goal_count must be in [1, goal_count]");
    for (int w : cfg.ablation_windows) {
      if (w < 1 || w > cfg.relabel.high_window)
        throw std::invalid_argument(
            "ablation window outside [1, high_window]");
    }
    if (cfg.reward_epsilon <= 0.0)
      throw std::invalid_argument("reward_epsilon <= 0");

    cfg.finetune.reward_low = default_reward_config(cfg.env, cfg.reward_low_kind);
    cfg.finetune.reward_low.epsilon = cfg.reward_epsilon;
    cfg.finetune.reward_high =
        default_reward_config(cfg.env, cfg.reward_high_kind);
    cfg.finetune.reward_high.epsilon = cfg.reward_epsilon;
    cfg.finetune.start_jitter_effector = cfg.eval.start_jitter_effector;
    cfg.finetune.start_jitter_joints = cfg.eval.start_jitter_joints;
    cfg.finetune.workers = cfg.workers;
    validate_finetune_config(cfg.finetune);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return cfg;
}

std::string run_config_to_json(const RunConfig& cfg) {
  json j;
  j["output_dir"] = cfg.output_dir;
  j["workers"] = cfg.workers;
  j["env"] = {{"num_elements", cfg.env.num_elements},
              {"interaction_radius", cfg.env.interaction_radius},
              {"max_effector_speed", cfg.env.max_effector_speed},
              {"manipulation_gain", cfg.env.manipulation_gain},
              {"episode_length", cfg.env.episode_length},
              {"completion_tolerance", cfg.env.completion_tolerance},
              {"site_seed", cfg.env.site_seed}};
  j["relabel"] = {{"low_window", cfg.relabel.low_window},
                  {"high_window", cfg.relabel.high_window}};
  j["executor"] = {{"high_period", cfg.exec.high_period},
                   {"episode_length", cfg.exec.episode_length}};
  j["demos"] = {{"count", cfg.demo_count},
                {"noise_scale", cfg.demo_noise},
                {"seed", cfg.demo_seed}};
  j["goals"] = {{"count", cfg.goal_count}, {"seed", cfg.goal_seed}};
  j["il"] = {{"batch_size", cfg.il.batch_size},
             {"learning_rate", cfg.il.learning_rate},
             {"epochs", cfg.il.epochs},
             {"adam_beta1", cfg.il.adam_beta1},
             {"adam_beta2", cfg.il.adam_beta2},
             {"adam_eps", cfg.il.adam_eps},
             {"hidden_units", cfg.il.hidden_units},
             {"max_batches_per_epoch", cfg.il.max_batches_per_epoch},
             {"seed", cfg.il.seed}};
  j["finetune"] = {{"trajectories_per_iter", cfg.finetune.trajectories_per_iter},
                   {"discount", cfg.finetune.discount},
                   {"lambda_low", cfg.finetune.lambda_low},
                   {"lambda_high", cfg.finetune.lambda_high},
                   {"kl_step", cfg.finetune.kl_step},
                   {"cg_iters", cfg.finetune.cg_iters},
                   {"cg_damping", cfg.finetune.cg_damping},
                   {"max_backtracks", cfg.finetune.max_backtracks},
                   {"iterations", cfg.finetune.iterations},
                   {"variant", to_string(cfg.finetune.variant)},
                   {"mode", to_string(cfg.finetune.mode)},
                   {"finetune_high", cfg.finetune.finetune_high},
                   {"fisher_batch", cfg.finetune.fisher_batch},
                   {"demo_batch", cfg.finetune.demo_batch},
                   {"seed", cfg.finetune.seed},
                   {"reward_low", to_string(cfg.reward_low_kind)},
                   {"reward_high", to_string(cfg.reward_high_kind)},
                   {"reward_epsilon", cfg.reward_epsilon},
                   {"goal_count", cfg.finetune_goal_count}};
  j["evaluation"] = {{"episodes_per_goal", cfg.eval.episodes_per_goal},
                     {"seed", cfg.eval_seed},
                     {"start_jitter_effector", cfg.eval.start_jitter_effector},
                     {"start_jitter_joints", cfg.eval.start_jitter_joints},
                     {"deterministic_policy", cfg.eval.deterministic_policy}};
  j["seeds"] = {{"rpl", cfg.rpl_seeds}, {"baseline", cfg.baseline_seeds}};
  j["distill"] = {{"rollouts_per_goal", cfg.distill_rollouts},
                  {"seed", cfg.distill_seed}};
  j["ablation"] = {{"windows", cfg.ablation_windows},
                   {"rewards", reward_kinds_to_json(cfg.ablation_rewards)},
                   {"iterations", cfg.ablation_iterations},
                   {"goal_count", cfg.ablation_goal_count}};
  return j.dump(2) + "\n";
}

RunConfig run_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("config parse error at " + locate(text, e.byte) + ": " +
                      e.what());
  }
  RunConfig cfg;
  get_to(j, "output_dir", cfg.output_dir, "");
  get_to(j, "workers", cfg.workers, "");
  if (j.contains("env")) {
    const json& e = j["env"];
    get_to(e, "num_elements", cfg.env.num_elements, "env.");
    get_to(e, "interaction_radius", cfg.env.interaction_radius, "env.");
    get_to(e, "max_effector_speed", cfg.env.max_effector_speed, "env.");
    get_to(e, "manipulation_gain", cfg.env.manipulation_gain, "env.");
    get_to(e, "episode_length", cfg.env.episode_length, "env.");
    get_to(e, "completion_tolerance", cfg.env.completion_tolerance, "env.");
    get_to(e, "site_seed", cfg.env.site_seed, "env.");
  }
  if (j.contains("relabel")) {
    const json& r = j["relabel"];
    get_to(r, "low_window", cfg.relabel.low_window, "relabel.");
    get_to(r, "high_window", cfg.relabel.high_window, "relabel.");
  }
  if (j.contains("executor")) {
    const json& e = j["executor"];
    get_to(e, "high_period", cfg.exec.high_period, "executor.");
    get_to(e, "episode_length", cfg.exec.episode_length, "executor.");
  }
  if (j.contains("demos")) {
    const json& d = j["demos"];
    get_to(d, "count", cfg.demo_count, "demos.");
    get_to(d, "noise_scale", cfg.demo_noise, "demos.");
    get_to(d, "seed", cfg.demo_seed, "demos.");
  }
  if (j.contains("goals")) {
    const json& g = j["goals"];
    get_to(g, "count", cfg.goal_count, "goals.");
    get_to(g, "seed", cfg.goal_seed, "goals.");
  }
  if (j.contains("il")) {
    const json& i = j["il"];
    get_to(i, "batch_size", cfg.il.batch_size, "il.");
    get_to(i, "learning_rate", cfg.il.learning_rate, "il.");
    get_to(i, "epochs", cfg.il.epochs, "il.");
    get_to(i, "adam_beta1", cfg.il.adam_beta1, "il.");
    get_to(i, "adam_beta2", cfg.il.adam_beta2, "il.");
    get_to(i, "adam_eps", cfg.il.adam_eps, "il.");
    get_to(i, "hidden_units", cfg.il.hidden_units, "il.");
    get_to(i, "max_batches_per_epoch", cfg.il.max_batches_per_epoch, "il.");
    get_to(i, "seed", cfg.il.seed, "il.");
  }
  if (j.contains("finetune")) {
    const json& f = j["finetune"];
    get_to(f, "trajectories_per_iter", cfg.finetune.trajectories_per_iter,
           "finetune.");
    get_to(f, "discount", cfg.finetune.discount, "finetune.");
    get_to(f, "lambda_low", cfg.finetune.lambda_low, "finetune.");
    get_to(f, "lambda_high", cfg.finetune.lambda_high, "finetune.");
    get_to(f, "kl_step", cfg.finetune.kl_step, "finetune.");
    get_to(f, "cg_iters", cfg.finetune.cg_iters, "finetune.");
    get_to(f, "cg_damping", cfg.finetune.cg_damping, "finetune.");
    get_to(f, "max_backtracks", cfg.finetune.max_backtracks, "finetune.");
    get_to(f, "iterations", cfg.finetune.iterations, "finetune.");
    get_to(f, "fisher_batch", cfg.finetune.fisher_batch, "finetune.");
    get_to(f, "demo_batch", cfg.finetune.demo_batch, "finetune.");
    get_to(f, "seed", cfg.finetune.seed, "finetune.");
    get_to(f, "goal_count", cfg.finetune_goal_count, "finetune.");
    get_to(f, "reward_epsilon", cfg.reward_epsilon, "finetune.");
    get_to(f, "finetune_high", cfg.finetune.finetune_high, "finetune.");
    try {
      if (f.contains("variant"))
        cfg.finetune.variant =
            finetune_variant_from_string(f["variant"].get<std::string>());
      if (f.contains("mode"))
        cfg.finetune.mode =
            finetune_mode_from_string(f["mode"].get<std::string>());
      if (f.contains("reward_low"))
        cfg.reward_low_kind =
            reward_kind_from_string(f["reward_low"].get<std::string>());
      if (f.contains("reward_high"))
        cfg.reward_high_kind =
            reward_kind_from_string(f["reward_high"].get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("config key 'finetune': ") + e.what());
    }
  }
  if (j.contains("evaluation")) {
    const json& e = j["evaluation"];
    get_to(e, "episodes_per_goal", cfg.eval.episodes_per_goal, "evaluation.");
    get_to(e, "seed", cfg.eval_seed, "evaluation.");
    get_to(e, "start_jitter_effector", cfg.eval.start_jitter_effector,
           "evaluation.");
    get_to(e, "start_jitter_joints", cfg.eval.start_jitter_joints,
           "evaluation.");
    get_to(e, "deterministic_policy", cfg.eval.deterministic_policy,
           "evaluation.");
  }
  if (j.contains("seeds")) {
    const json& s = j["seeds"];
    get_to(s, "rpl", cfg.rpl_seeds, "seeds.");
    get_to(s, "baseline", cfg.baseline_seeds, "seeds.");
  }
  if (j.contains("distill")) {
    const json& d = j["distill"];
    get_to(d, "rollouts_per_goal", cfg.distill_rollouts, "distill.");
    get_to(d, "seed", cfg.distill_seed, "distill.");
  }
  if (j.contains("ablation")) {
    const json& a = j["ablation"];
    get_to(a, "windows", cfg.ablation_windows, "ablation.");
    get_to(a, "iterations", cfg.ablation_iterations, "ablation.");
    get_to(a, "goal_count", cfg.ablation_goal_count, "ablation.");
    if (a.contains("rewards")) {
      cfg.ablation_rewards.clear();
      try {
        for (const auto& k : a["rewards"])
          cfg.ablation_rewards.push_back(
              reward_kind_from_string(k.get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config key 'ablation.rewards': ") +
                          e.what());
      }
    }
  }
  return finalize_run_config(std::move(cfg));
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return run_config_from_json(buffer.str());
}

void save_run_config(const std::filesystem::path& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out)
    throw std::runtime_error("cannot open for writing: " + path.string());
  out << run_config_to_json(cfg);
}

}  // namespace relay
