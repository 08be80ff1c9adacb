#pragma once

#include <optional>

#include "tahp/hawkes.hpp"
#include "tahp/trainer.hpp"

namespace tahp {

struct SimulateConfig {
  std::size_t num_sequences = 200;
  double horizon = 60.0;
  HawkesGroundTruth gt;

  static SimulateConfig defaults();
  nlohmann::json to_json() const;
};

// One structured config file drives every subcommand; unknown or ill-typed
// fields are all reported together. See print-config for the full schema
// with defaults.
struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out_dir = "out";

  nlohmann::json model = nlohmann::json{{"preset", "desk"}};
  TrainConfig train;
  int preset_batch_size = -1;   // batch from a preset unless train overrides
  bool train_batch_given = false;

  std::string data_single;      // one file plus a split ...
  SplitRatios ratios;
  std::uint64_t split_seed = 1;
  std::string data_train, data_dev, data_test;  // ... or three explicit files

  SimulateConfig simulate = SimulateConfig::defaults();

  std::string eval_checkpoint;
  std::string eval_split = "test";
  std::optional<Integrator> eval_integrator;
};

RunConfig parse_run_config(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Resolves the model section against the dataset's declared type count;
// presets may be overridden field by field.
ModelConfig resolve_model_config(const RunConfig& cfg, int num_types_from_data);

// Loads either the single-dataset-plus-split or the three-file layout.
DatasetSplits load_splits(const RunConfig& cfg);

// Complete defaults (plus the preset table), printed by `print-config`.
nlohmann::json default_run_config_json();

}  // namespace tahp
