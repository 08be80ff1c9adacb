#include "tahp/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "tahp/metrics.hpp"

namespace tahp {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  out << text;
  if (!out) throw ValidationError("write failed for " + path);
}

void write_json(const std::string& path, const json& j) {
  write_text(path, j.dump(2) + "\n");
}

std::string out_path(const RunConfig& cfg, const std::string& file) {
  fs::create_directories(cfg.out_dir);
  return (fs::path(cfg.out_dir) / file).string();
}

std::string dataset_display_name(const RunConfig& cfg, const Dataset& ds) {
  if (!ds.name.empty()) return ds.name;
  const std::string& src =
      !cfg.data_single.empty() ? cfg.data_single : cfg.data_test;
  return src.empty() ? "dataset" : fs::path(src).stem().string();
}

TrainConfig resolved_train_config(const RunConfig& cfg) {
  TrainConfig train = cfg.train;
  if (!cfg.train_batch_given && cfg.preset_batch_size > 0) {
    train.batch_size = cfg.preset_batch_size;
  }
  return train;
}

}  // namespace

void write_curves_csv(const TrainHistory& history, const std::string& path) {
  std::string csv = "epoch,train_nll_per_event,dev_nll_per_event,dev_accuracy,dev_rmse\n";
  char line[256];
  for (std::size_t i = 0; i < history.epochs.size(); ++i) {
    const auto& e = history.epochs[i];
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g\n", i,
                  e.train_nll_per_event, e.dev_nll_per_event, e.dev_accuracy,
                  e.dev_rmse);
    csv += line;
  }
  write_text(path, csv);
}

void cmd_simulate(const RunConfig& cfg) {
  cfg.simulate.gt.validate();
  if (!(cfg.simulate.horizon > 0.0)) {
    throw ConfigError("simulate: horizon must be positive");
  }
  Dataset ds = simulate_dataset(cfg.simulate.gt, cfg.simulate.num_sequences,
                                cfg.simulate.horizon, cfg.seed, "synthetic-hawkes");
  save_jsonl(ds, out_path(cfg, "dataset.jsonl"));

  json sidecar = cfg.simulate.to_json();
  sidecar["seed"] = cfg.seed;
  write_json(out_path(cfg, "dataset.gt.json"), sidecar);
  std::cout << "wrote " << ds.size() << " sequences (" << ds.total_events()
            << " events) to " << out_path(cfg, "dataset.jsonl") << "\n";
}

void cmd_train(const RunConfig& cfg) {
  const DatasetSplits splits = load_splits(cfg);
  RunConfig resolved = cfg;
  if (cfg.model.contains("preset")) {
    resolved.preset_batch_size =
        preset_by_name(cfg.model.at("preset").get<std::string>(),
                       splits.train.num_types)
            .batch_size;
  }
  const ModelConfig model_cfg = resolve_model_config(cfg, splits.train.num_types);
  const TrainConfig train_cfg = resolved_train_config(resolved);

  const TrainResult result = train(splits.train, splits.dev, model_cfg, train_cfg);

  json meta;
  meta["best_epoch"] = result.history.best_epoch;
  meta["train_seed"] = cfg.seed;
  meta["integrator"] = train_cfg.integrator.str();
  save_checkpoint(out_path(cfg, "model.ckpt"), model_cfg, result.params, meta);
  write_json(out_path(cfg, "history.json"), result.history.to_json());
  write_curves_csv(result.history, out_path(cfg, "curves.csv"));
  std::cout << "best epoch " << result.history.best_epoch << ", dev nll/event "
            << result.history.epochs[result.history.best_epoch].dev_nll_per_event
            << "; wrote " << out_path(cfg, "model.ckpt") << "\n";
}

void cmd_eval(const RunConfig& cfg) {
  if (cfg.eval_checkpoint.empty()) {
    throw ConfigError("eval: no checkpoint configured (eval.checkpoint)");
  }
  const Checkpoint ckpt = load_checkpoint(cfg.eval_checkpoint);
  const DatasetSplits splits = load_splits(cfg);
  const Dataset& data = cfg.eval_split == "train"
                            ? splits.train
                            : (cfg.eval_split == "dev" ? splits.dev : splits.test);
  const Integrator integrator =
      cfg.eval_integrator.value_or(Integrator::monte_carlo(100));

  MetricsReport report =
      evaluate(data, ckpt.config, ckpt.params, integrator, cfg.seed, cfg.threads);
  report.dataset = dataset_display_name(cfg, data);
  write_json(out_path(cfg, "metrics.json"), report.to_json());

  const fs::path sibling_history =
      fs::path(cfg.eval_checkpoint).parent_path() / "history.json";
  if (fs::exists(sibling_history)) {
    std::ifstream in(sibling_history);
    json h = json::parse(in);
    write_curves_csv(TrainHistory::from_json(h), out_path(cfg, "curves.csv"));
  }
  std::cout << "loglike/event " << report.loglike_per_event << ", accuracy "
            << report.accuracy << ", rmse " << report.rmse << "; wrote "
            << out_path(cfg, "metrics.json") << "\n";
}

void cmd_ablate(const RunConfig& cfg) {
  const DatasetSplits splits = load_splits(cfg);
  RunConfig resolved = cfg;
  if (cfg.model.contains("preset")) {
    resolved.preset_batch_size =
        preset_by_name(cfg.model.at("preset").get<std::string>(),
                       splits.train.num_types)
            .batch_size;
  }
  const ModelConfig model_cfg = resolve_model_config(cfg, splits.train.num_types);
  const TrainConfig train_cfg = resolved_train_config(resolved);

  AblationResult result = ablate(splits, model_cfg, train_cfg);
  const std::string name = dataset_display_name(cfg, splits.test);
  result.taa_report.dataset = name;
  result.biased_report.dataset = name;

  write_json(out_path(cfg, "ablation.json"), result.report_json());
  json meta_taa{{"best_epoch", result.taa.history.best_epoch}};
  ModelConfig cfg_taa = model_cfg;
  cfg_taa.variant = AttentionVariant::TemporalAugmented;
  save_checkpoint(out_path(cfg, "model_taa.ckpt"), cfg_taa, result.taa.params,
                  meta_taa);
  json meta_biased{{"best_epoch", result.biased.history.best_epoch}};
  ModelConfig cfg_biased = model_cfg;
  cfg_biased.variant = AttentionVariant::Biased;
  save_checkpoint(out_path(cfg, "model_biased.ckpt"), cfg_biased,
                  result.biased.params, meta_biased);
  write_json(out_path(cfg, "history_taa.json"), result.taa.history.to_json());
  write_json(out_path(cfg, "history_biased.json"),
             result.biased.history.to_json());
  std::cout << "taa loglike/event " << result.taa_report.loglike_per_event
            << " vs biased " << result.biased_report.loglike_per_event
            << "; wrote " << out_path(cfg, "ablation.json") << "\n";
}

void cmd_print_config(std::ostream& out) {
  out << default_run_config_json().dump(2) << "\n";
}

}  // namespace tahp
