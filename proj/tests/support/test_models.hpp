#pragma once

// Shared builders for small test fixtures.

#include <initializer_list>
#include <utility>

#include "tahp/encoder.hpp"
#include "tahp/rng.hpp"

namespace tahp::test {

// Gradient-check scale: D=8, D_H=16, D_K=D_V=8, 2 heads, 1 layer.
inline ModelConfig tiny_config(int num_types = 2) {
  ModelConfig cfg;
  cfg.num_types = num_types;
  cfg.d_model = 8;
  cfg.d_inner = 16;
  cfg.d_qk = 8;
  cfg.d_value = 8;
  cfg.num_heads = 2;
  cfg.num_layers = 1;
  cfg.d_rnn = 0;
  cfg.dropout = 0.1;
  return cfg;
}

inline ModelConfig desk_config(int num_types = 2) {
  ModelConfig cfg = preset_by_name("desk", num_types).model;
  return cfg;
}

inline EventSequence make_seq(std::initializer_list<std::pair<double, int>> events) {
  EventSequence seq;
  for (const auto& [t, c] : events) seq.events.push_back({t, c});
  return seq;
}

inline EventSequence random_seq(RngStream& rng, int length, int num_types,
                                double mean_gap = 0.8) {
  EventSequence seq;
  double t = 0.0;
  for (int i = 0; i < length; ++i) {
    t += rng.exponential(1.0 / mean_gap);
    seq.events.push_back(
        {t, static_cast<int>(rng.next_u64() % static_cast<std::uint64_t>(num_types))});
  }
  return seq;
}

inline ad::Matrix encode_values(const EventSequence& seq, const ModelParams& params,
                                const ModelConfig& cfg) {
  const ModelLeaves leaves = ModelLeaves::bind(params, cfg);
  return encode(seq, leaves, cfg, /*train_mode=*/false).value();
}

}  // namespace tahp::test
