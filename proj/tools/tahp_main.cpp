#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "tahp/commands.hpp"

namespace {

struct CliOverrides {
  std::string config_path;
  std::string out_dir;
  std::string variant;
  std::string integrator;
  std::uint64_t seed = 0;
  bool seed_given = false;
  int threads = 0;
};

tahp::RunConfig make_config(const CliOverrides& o) {
  tahp::RunConfig cfg = o.config_path.empty()
                            ? tahp::parse_run_config(nlohmann::json::object())
                            : tahp::load_run_config(o.config_path);
  if (o.seed_given) {
    cfg.seed = o.seed;
    cfg.train.seed = o.seed;
  }
  if (o.threads > 0) {
    cfg.threads = o.threads;
    cfg.train.threads = o.threads;
  }
  if (!o.out_dir.empty()) cfg.out_dir = o.out_dir;
  if (!o.variant.empty()) cfg.model["variant"] = o.variant;
  if (!o.integrator.empty()) {
    const tahp::Integrator integ = tahp::Integrator::parse(o.integrator);
    cfg.train.integrator = integ;
    cfg.eval_integrator = integ;
  }
  return cfg;
}

void add_common_flags(CLI::App* cmd, CliOverrides& o) {
  cmd->add_option("--config", o.config_path, "run config file (JSON)");
  cmd->add_option("--seed", o.seed, "master seed")->each([&o](const std::string&) {
    o.seed_given = true;
  });
  cmd->add_option("--out", o.out_dir, "output directory");
  cmd->add_option("--threads", o.threads, "worker threads (default 1)");
  cmd->add_option("--variant", o.variant, "attention variant: taa|biased")
      ->check(CLI::IsMember({"taa", "biased"}));
  cmd->add_option("--integrator", o.integrator, "compensator estimator: mc:M|trapezoid");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"transformer Hawkes process with temporal-augmented attention"};
  app.require_subcommand(1);
  CliOverrides o;

  CLI::App* simulate = app.add_subcommand(
      "simulate", "generate a synthetic Hawkes dataset by Ogata thinning");
  CLI::App* train_cmd =
      app.add_subcommand("train", "train a model and write a checkpoint");
  CLI::App* eval_cmd =
      app.add_subcommand("eval", "evaluate a checkpoint (Loglike, accuracy, RMSE)");
  CLI::App* ablate_cmd = app.add_subcommand(
      "ablate", "train both attention variants and compare their metrics");
  CLI::App* print_cmd =
      app.add_subcommand("print-config", "print the full default config");
  for (CLI::App* cmd : {simulate, train_cmd, eval_cmd, ablate_cmd}) {
    add_common_flags(cmd, o);
  }

  CLI11_PARSE(app, argc, argv);

  try {
    if (print_cmd->parsed()) {
      tahp::cmd_print_config(std::cout);
      return 0;
    }
    const tahp::RunConfig cfg = make_config(o);
    if (simulate->parsed()) {
      tahp::cmd_simulate(cfg);
    } else if (train_cmd->parsed()) {
      tahp::cmd_train(cfg);
    } else if (eval_cmd->parsed()) {
      tahp::cmd_eval(cfg);
    } else if (ablate_cmd->parsed()) {
      tahp::cmd_ablate(cfg);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
