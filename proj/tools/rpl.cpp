// Command line front end for the relay policy learning pipeline. Every
// subcommand reads one run-config file and reads/writes artifacts under its
// output directory, so stages can be rerun individually.
//
// Exit codes: 0 success, 1 invalid config or usage, 2 missing upstream
// artifact, 3 runtime divergence / integrity failure.

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "relay/config.hpp"
#include "relay/harness.hpp"

namespace {

relay::RunConfig load(const std::string& config_path) {
  return relay::load_run_config(config_path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"relay policy learning pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("-c,--config", config_path, "run-config JSON file")
      ->required();

  auto* gen = app.add_subcommand("gen-demos",
                                 "generate scripted play demonstrations");
  auto* relabel = app.add_subcommand("relabel", "relay-relabel demonstrations");
  std::vector<std::string> sets{"low", "high"};
  relabel->add_option("--sets", sets,
                      "datasets to build: low high gcbc bc");
  auto* train = app.add_subcommand("train-il", "imitation learning");
  std::string method = "all";
  train->add_option("--method", method, "ril | gcbc | bc | all");
  auto* ft = app.add_subcommand("finetune", "reinforcement fine-tuning");
  std::string target = "rpl";
  ft->add_option("--target", target,
                 "npg-rpl | dapg-rpl | iril-rpl | rpl | flat-gcbc | pretrain "
                 "| all");
  auto* dist = app.add_subcommand("distill",
                                  "distill fine-tuned policies into one");
  auto* eval = app.add_subcommand("evaluate", "roll out and score policies");
  std::string eval_method = "all";
  eval->add_option("--method", eval_method,
                   "ril | gcbc | bc | nn | ft-<variant> | flat-gcbc-ft | "
                   "pretrain | distill | all");
  auto* abl = app.add_subcommand("ablate", "window / reward ablations");
  std::string kind = "all";
  abl->add_option("--kind", kind, "window | reward | all");
  auto* rep = app.add_subcommand("report",
                                 "render tables and plot-ready series");
  auto* ver = app.add_subcommand("verify",
                                 "recompute aggregates from episode records");
  auto* show = app.add_subcommand("show-config",
                                  "print the finalized configuration");

  CLI11_PARSE(app, argc, argv);

  try {
    relay::Pipeline pipeline(load(config_path));
    if (gen->parsed()) pipeline.gen_demos();
    if (relabel->parsed()) pipeline.relabel(sets);
    if (train->parsed()) pipeline.train_il(method);
    if (ft->parsed()) pipeline.finetune(target);
    if (dist->parsed()) pipeline.distill_stage();
    if (eval->parsed()) pipeline.evaluate(eval_method);
    if (abl->parsed()) pipeline.ablate(kind);
    if (rep->parsed()) pipeline.report();
    if (ver->parsed()) pipeline.verify();
    if (show->parsed())
      std::cout << relay::run_config_to_json(pipeline.config());
  } catch (const relay::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const relay::MissingArtifactError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const relay::FormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const relay::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const relay::RuntimeError3& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
