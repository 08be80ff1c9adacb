#pragma once

#include <vector>

#include "tahp/event_data.hpp"
#include "tahp/model.hpp"
#include "tahp/rng.hpp"

namespace tahp {

// Sinusoidal encoding of a raw timestamp. 1-based component j is
// cos(t / 10000^((j-1)/D)) for odd j and sin(t / 10000^(j/D)) for even j.
Eigen::VectorXd temporal_encoding(double t, int d_model);

// Row i holds the encoding of times[i]; shape [I x D].
ad::Matrix temporal_encoding_rows(const std::vector<double>& times, int d_model);

// Row i is column types[i] of the embedding (the one-hot product realized
// as a gather); shape [I x D].
ad::Var embed_events(const ad::Var& embedding, const std::vector<int>& types);

// One attention head. S and X are [I x D]; the result is [I x D_V].
// Scores are ((Q + b_q) K^T + (Q + b_t)(X W_tem)^T) / sqrt(D_K) for the
// temporal-augmented variant and ((Q + b_q) K^T) / sqrt(D_K) for the biased
// one, causally masked (diagonal permitted) and row-softmaxed before
// multiplying by V. When probs_out is non-null it receives the row-stochastic
// attention matrix.
ad::Var attention_head(const ad::Var& s, const ad::Var& x, const HeadLeaves& head,
                       AttentionVariant variant, ad::Var* probs_out = nullptr);

// Horizontal concatenation of the per-head outputs followed by the
// aggregation projection w_multi [L*D_V x D].
ad::Var multi_head(const std::vector<ad::Var>& heads, const ad::Var& w_multi);

// Captured per-layer attention matrices, for diagnostics and tests.
struct EncodeTrace {
  std::vector<std::vector<ad::Matrix>> attention;  // [layer][head], each [I x I]
};

// One encoding layer: multi-head attention and a position-wise feed-forward
// block (dense -> ReLU -> conv/ReLU/max-pool over each position's d_inner
// vector -> flatten -> dense), each sublayer followed by dropout, a residual
// add, and layer norm. Dropout is active only in train mode and requires rng.
ad::Var encoder_layer(const ad::Var& s, const ad::Var& x, const LayerLeaves& layer,
                      const ModelConfig& cfg, bool train_mode, RngStream* rng,
                      std::vector<ad::Matrix>* attn_trace = nullptr);

// Full encoder: event embeddings as the initial state, temporal encodings
// re-added before every layer, then the optional RNN post-processing stage
// (dense -> ReLU -> recurrent cell -> dense, dimension preserved).
// Row i of the result is the hidden representation of event i.
ad::Var encode(const EventSequence& seq, const ModelLeaves& leaves,
               const ModelConfig& cfg, bool train_mode, RngStream* rng = nullptr,
               EncodeTrace* trace = nullptr);

}  // namespace tahp
