#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "tahp/autodiff.hpp"

namespace tahp {

// Biased attention is temporal-augmented attention with the temporal score
// term structurally removed, not merely zeroed at initialization.
enum class AttentionVariant { TemporalAugmented, Biased };

enum class RnnCell { Lstm, Gru };

std::string to_string(AttentionVariant v);
AttentionVariant variant_from_string(const std::string& s);
std::string to_string(RnnCell c);
RnnCell rnn_cell_from_string(const std::string& s);

// Architecture and intensity hyperparameters. Training hyperparameters live
// in TrainConfig.
struct ModelConfig {
  int num_types = 2;
  int d_model = 16;   // D, even (the temporal encoding interleaves cos/sin)
  int d_inner = 32;   // D_H, feed-forward inner width
  int d_qk = 16;      // D_K, query/key width
  int d_value = 16;   // D_V; constrained equal to d_qk
  int num_heads = 2;
  int num_layers = 2;
  int d_rnn = 0;      // 0 disables the post-processing RNN
  double dropout = 0.1;
  AttentionVariant variant = AttentionVariant::TemporalAugmented;
  RnnCell rnn_cell = RnnCell::Lstm;
  double softplus_beta = 1.0;
  // The first event has no predecessor; its log-intensity term conditions on
  // the event's own representation and can be dropped entirely.
  bool include_first_event_term = true;
  // Pins every temporal-attention matrix at zero and excludes it from
  // optimizer updates; with this set a temporal-augmented model reproduces
  // the biased variant exactly.
  bool freeze_w_tem = false;

  // Width after the per-position conv/pool stage:
  // 4 * floor((floor((d_inner - 3) / 2) + 1) / 2).
  int conv_flat_dim() const;
  void validate() const;

  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

struct Preset {
  ModelConfig model;
  int batch_size = 16;
};

// Named architecture presets; `desk` is sized for laptop-scale runs.
Preset preset_by_name(const std::string& name, int num_types);
std::vector<std::string> preset_names();

// Every learnable array, as an ordered store of named matrices. Order is
// fixed by construction and shared with optimizer state and checkpoints.
struct ModelParams {
  struct Entry {
    std::string name;
    ad::Matrix value;
    ad::Matrix grad;  // accumulated by the trainer, reset each step
  };
  std::vector<Entry> entries;
  std::unordered_map<std::string, std::size_t> index;

  ad::Matrix& at(const std::string& name);
  const ad::Matrix& at(const std::string& name) const;
  bool has(const std::string& name) const { return index.count(name) > 0; }
  void add(std::string name, ad::Matrix value);

  void zero_grads();
  double grad_sq_norm() const;
  std::size_t scalar_count() const;

  // Xavier-uniform weights, zero biases, unit layer-norm gains. Parameter
  // creation order and RNG consumption are independent of the attention
  // variant and of freeze_w_tem, so differently configured models share all
  // other initial values given the same seed.
  static ModelParams init(const ModelConfig& cfg, std::uint64_t seed);
};

// Per-graph leaves mirroring a ModelParams store; each forward pass binds a
// fresh set so that parallel sequence graphs never share gradient buffers.
struct HeadLeaves {
  ad::Var w_q, w_k, w_v, w_tem, b_q, b_t;
};
struct LayerLeaves {
  std::vector<HeadLeaves> heads;
  ad::Var w_multi;
  ad::Var ffn_w1, ffn_b1, conv_kernels, ffn_w2, ffn_b2;
  ad::Var ln1_gain, ln1_bias, ln2_gain, ln2_bias;
};
struct PostLeaves {
  ad::Var w3, b3, rnn_w_x, rnn_w_h, rnn_b, rnn_b_h, w4, b4;
};
struct ModelLeaves {
  ad::Var embedding;
  std::vector<LayerLeaves> layers;
  PostLeaves post;
  ad::Var intensity_base, intensity_w_alpha, intensity_w_hist;
  ad::Var w_time, w_type;
  std::vector<std::pair<std::string, ad::Var>> flat;  // store order

  static ModelLeaves bind(const ModelParams& params, const ModelConfig& cfg);
  void accumulate_grads(ModelParams& params) const;
};

// Versioned self-describing checkpoint: magic "TAHPCKP1", a little-endian
// u64 header length, a JSON header {version, config, meta, params:[{name,
// rows, cols}]}, then each parameter's entries as row-major little-endian
// IEEE-754 doubles in header order.
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelParams& params, const nlohmann::json& meta);
struct Checkpoint {
  ModelConfig config;
  ModelParams params;
  nlohmann::json meta;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace tahp
