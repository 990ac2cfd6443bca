#include <CLI11.hpp>

#include <functional>
#include <iostream>

#include "utopic/cli/commands.hpp"

namespace {

using Command = std::function<int(const utopic::cli::Options&, utopic::cli::Logger&)>;

void common_flags(CLI::App* sub, utopic::cli::Options& o) {
  sub->add_option("--config", o.config, "JSON run config (unknown keys are rejected)");
  sub->add_option("--seed", o.seed, "Override the config seed");
  sub->add_option("--jobs", o.jobs, "Worker threads")->check(CLI::PositiveNumber);
  sub->add_option("--out", o.out, "Output directory")->required();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial point cloud registration: data synthesis, training and evaluation"};
  app.require_subcommand(1);
  utopic::cli::Options o;
  std::vector<std::pair<CLI::App*, Command>> commands;

  auto* gen = app.add_subcommand("generate", "Synthesize a dataset of partial pairs");
  common_flags(gen, o);
  commands.emplace_back(gen, utopic::cli::cmd_generate);

  auto* train = app.add_subcommand("train", "Train a model");
  common_flags(train, o);
  train->add_option("--data", o.data, "Dataset directory (default: synthesize from the config)");
  commands.emplace_back(train, utopic::cli::cmd_train);

  auto* reg = app.add_subcommand("register", "Register one source cloud onto a target cloud");
  common_flags(reg, o);
  reg->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  reg->add_option("--source", o.source, "Source cloud (.ply or .xyz)")->required();
  reg->add_option("--target", o.target, "Target cloud (.ply or .xyz)")->required();
  commands.emplace_back(reg, utopic::cli::cmd_register);

  auto* eval = app.add_subcommand("eval", "Score a dataset");
  common_flags(eval, o);
  eval->add_option("--data", o.data, "Dataset directory")->required();
  auto* ck = eval->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
  auto* pr = eval->add_option("--predictions", o.predictions, "Stored predictions JSON");
  ck->excludes(pr);
  commands.emplace_back(eval, utopic::cli::cmd_eval);

  auto* sweep = app.add_subcommand("sweep", "Evaluate across crop keep fractions");
  common_flags(sweep, o);
  sweep->add_option("--checkpoint", o.checkpoint, "Model checkpoint (omit for overlap ratios only)");
  commands.emplace_back(sweep, utopic::cli::cmd_sweep);

  auto* inspect = app.add_subcommand("inspect", "Dump per-point overlap and uncertainty");
  common_flags(inspect, o);
  inspect->add_option("--checkpoint", o.checkpoint, "Model checkpoint")->required();
  inspect->add_option("--source", o.source, "Source cloud")->required();
  inspect->add_option("--target", o.target, "Target cloud")->required();
  commands.emplace_back(inspect, utopic::cli::cmd_inspect);

  CLI11_PARSE(app, argc, argv);

  utopic::cli::Logger log;
  for (auto& [sub, run] : commands) {
    if (!sub->parsed()) continue;
    try {
      return run(o, log);
    } catch (const std::exception& e) {
      log.error(sub->get_name() + ": " + e.what());
      return 1;
    }
  }
  return 1;
}
