#pragma once

#include "tahp/run_config.hpp"

namespace tahp {

// Subcommand bodies. Each writes its artifacts under cfg.out_dir and throws
// on any failure, so the CLI exits 0 exactly when every output was written
// and validated.

// dataset.jsonl plus a dataset.gt.json sidecar with the generating
// parameters (the oracle tests need them).
void cmd_simulate(const RunConfig& cfg);

// model.ckpt, history.json, curves.csv.
void cmd_train(const RunConfig& cfg);

// metrics.json; also refreshes curves.csv when a history.json sits next to
// the checkpoint.
void cmd_eval(const RunConfig& cfg);

// ablation.json plus per-variant checkpoints and histories.
void cmd_ablate(const RunConfig& cfg);

// All defaults, including the preset table.
void cmd_print_config(std::ostream& out);

void write_curves_csv(const TrainHistory& history, const std::string& path);

}  // namespace tahp
