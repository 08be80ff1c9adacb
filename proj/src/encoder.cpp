#include "tahp/encoder.hpp"

#include <cmath>

namespace tahp {

using ad::Matrix;
using ad::Var;

Eigen::VectorXd temporal_encoding(double t, int d_model) {
  if (d_model < 2 || d_model % 2 != 0) {
    throw ConfigError("temporal_encoding: dimension must be even and >= 2, got " +
                      std::to_string(d_model));
  }
  Eigen::VectorXd x(d_model);
  for (int j = 1; j <= d_model; ++j) {
    const double expo = (j % 2 == 1) ? static_cast<double>(j - 1) / d_model
                                     : static_cast<double>(j) / d_model;
    const double arg = t / std::pow(10000.0, expo);
    x(j - 1) = (j % 2 == 1) ? std::cos(arg) : std::sin(arg);
  }
  return x;
}

Matrix temporal_encoding_rows(const std::vector<double>& times, int d_model) {
  Matrix x(static_cast<Eigen::Index>(times.size()), d_model);
  for (std::size_t i = 0; i < times.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = temporal_encoding(times[i], d_model);
  }
  return x;
}

Var embed_events(const Var& embedding, const std::vector<int>& types) {
  return ad::embed_cols(embedding, types);
}

Var attention_head(const Var& s, const Var& x, const HeadLeaves& head,
                   AttentionVariant variant, Var* probs_out) {
  if (s.rows() != x.rows()) {
    throw ShapeError("attention_head: state " + ad::shape_str(s.value()) +
                     " and temporal encoding " + ad::shape_str(x.value()) +
                     " disagree on length");
  }
  const Var q = ad::matmul(s, head.w_q);
  const Var k = ad::matmul(s, head.w_k);
  const Var v = ad::matmul(s, head.w_v);
  const Var q_biased = ad::add_rowvec(q, head.b_q);
  Var scores = ad::matmul(q_biased, ad::transpose(k));
  if (variant == AttentionVariant::TemporalAugmented) {
    const Var x_tem = ad::matmul(x, head.w_tem);
    const Var temporal =
        ad::matmul(ad::add_rowvec(q, head.b_t), ad::transpose(x_tem));
    scores = ad::add(scores, temporal);
  }
  scores = ad::scalar_mul(scores, 1.0 / std::sqrt(static_cast<double>(q.cols())));
  const Var probs = ad::masked_softmax_rows(scores);
  if (probs_out != nullptr) *probs_out = probs;
  return ad::matmul(probs, v);
}

Var multi_head(const std::vector<Var>& heads, const Var& w_multi) {
  if (heads.empty()) throw ShapeError("multi_head: no heads");
  const Var cat = ad::concat_cols(heads);
  if (cat.cols() != w_multi.rows()) {
    throw ShapeError("multi_head: concatenated heads " + ad::shape_str(cat.value()) +
                     " do not match w_multi " + ad::shape_str(w_multi.value()));
  }
  return ad::matmul(cat, w_multi);
}

namespace {

Var position_wise_ffn(const Var& a, const LayerLeaves& layer) {
  const Var inner = ad::relu(ad::add_rowvec(ad::matmul(a, layer.ffn_w1), layer.ffn_b1));
  std::vector<Var> rows;
  rows.reserve(static_cast<std::size_t>(inner.rows()));
  for (Eigen::Index p = 0; p < inner.rows(); ++p) {
    const Var pos = ad::slice_rows(inner, p, 1);
    const Var pooled = ad::conv1d_relu_maxpool(pos, layer.conv_kernels);
    rows.push_back(ad::flatten_to_row(pooled));
  }
  const Var flat = ad::concat_rows(rows);
  return ad::add_rowvec(ad::matmul(flat, layer.ffn_w2), layer.ffn_b2);
}

Var sublayer_dropout(const Var& v, const ModelConfig& cfg, bool train_mode,
                     RngStream* rng) {
  if (!train_mode || cfg.dropout == 0.0) return v;
  if (rng == nullptr) throw ConfigError("encoder: train mode requires an RNG stream");
  return ad::dropout(v, cfg.dropout, *rng);
}

Var rnn_lstm(const Var& input, const PostLeaves& post, int d_rnn) {
  const Var h0 = Var::constant(Matrix::Zero(1, d_rnn));
  Var h = h0;
  Var c = h0;
  std::vector<Var> outputs;
  outputs.reserve(static_cast<std::size_t>(input.rows()));
  for (Eigen::Index t = 0; t < input.rows(); ++t) {
    const Var xt = ad::slice_rows(input, t, 1);
    const Var z = ad::add_rowvec(
        ad::add(ad::matmul(xt, post.rnn_w_x), ad::matmul(h, post.rnn_w_h)),
        post.rnn_b);
    const Var gi = ad::sigmoid(ad::slice_cols(z, 0, d_rnn));
    const Var gf = ad::sigmoid(ad::slice_cols(z, d_rnn, d_rnn));
    const Var gg = ad::tanh_of(ad::slice_cols(z, 2 * d_rnn, d_rnn));
    const Var go = ad::sigmoid(ad::slice_cols(z, 3 * d_rnn, d_rnn));
    c = ad::add(ad::hadamard(gf, c), ad::hadamard(gi, gg));
    h = ad::hadamard(go, ad::tanh_of(c));
    outputs.push_back(h);
  }
  return ad::concat_rows(outputs);
}

Var rnn_gru(const Var& input, const PostLeaves& post, int d_rnn) {
  Var h = Var::constant(Matrix::Zero(1, d_rnn));
  const Matrix ones = Matrix::Ones(1, d_rnn);
  std::vector<Var> outputs;
  outputs.reserve(static_cast<std::size_t>(input.rows()));
  for (Eigen::Index t = 0; t < input.rows(); ++t) {
    const Var xt = ad::slice_rows(input, t, 1);
    const Var zx = ad::add_rowvec(ad::matmul(xt, post.rnn_w_x), post.rnn_b);
    const Var zh = ad::add_rowvec(ad::matmul(h, post.rnn_w_h), post.rnn_b_h);
    const Var r = ad::sigmoid(
        ad::add(ad::slice_cols(zx, 0, d_rnn), ad::slice_cols(zh, 0, d_rnn)));
    const Var u = ad::sigmoid(
        ad::add(ad::slice_cols(zx, d_rnn, d_rnn), ad::slice_cols(zh, d_rnn, d_rnn)));
    const Var n = ad::tanh_of(
        ad::add(ad::slice_cols(zx, 2 * d_rnn, d_rnn),
                ad::hadamard(r, ad::slice_cols(zh, 2 * d_rnn, d_rnn))));
    const Var keep = ad::sub(Var::constant(ones), u);
    h = ad::add(ad::hadamard(keep, n), ad::hadamard(u, h));
    outputs.push_back(h);
  }
  return ad::concat_rows(outputs);
}

}  // namespace

Var encoder_layer(const Var& s, const Var& x, const LayerLeaves& layer,
                  const ModelConfig& cfg, bool train_mode, RngStream* rng,
                  std::vector<Matrix>* attn_trace) {
  std::vector<Var> heads;
  heads.reserve(layer.heads.size());
  for (const auto& head : layer.heads) {
    Var probs;
    heads.push_back(attention_head(s, x, head, cfg.variant,
                                   attn_trace != nullptr ? &probs : nullptr));
    if (attn_trace != nullptr) attn_trace->push_back(probs.value());
  }
  const Var attended = multi_head(heads, layer.w_multi);
  const Var s1 = ad::layer_norm(
      ad::add(s, sublayer_dropout(attended, cfg, train_mode, rng)), layer.ln1_gain,
      layer.ln1_bias);
  const Var ffn = position_wise_ffn(s1, layer);
  return ad::layer_norm(ad::add(s1, sublayer_dropout(ffn, cfg, train_mode, rng)),
                        layer.ln2_gain, layer.ln2_bias);
}

Var encode(const EventSequence& seq, const ModelLeaves& leaves,
           const ModelConfig& cfg, bool train_mode, RngStream* rng,
           EncodeTrace* trace) {
  if (seq.empty()) throw ValidationError("encode: empty sequence");
  const Var x = Var::constant(temporal_encoding_rows(seq.times(), cfg.d_model));
  Var s = embed_events(leaves.embedding, seq.types());
  for (int layer = 0; layer < cfg.num_layers; ++layer) {
    std::vector<Matrix>* layer_trace = nullptr;
    if (trace != nullptr) {
      trace->attention.emplace_back();
      layer_trace = &trace->attention.back();
    }
    s = ad::add(s, x);
    s = encoder_layer(s, x, leaves.layers[layer], cfg, train_mode, rng, layer_trace);
  }
  if (cfg.d_rnn > 0) {
    const Var projected =
        ad::relu(ad::add_rowvec(ad::matmul(s, leaves.post.w3), leaves.post.b3));
    const Var recur = cfg.rnn_cell == RnnCell::Lstm
                          ? rnn_lstm(projected, leaves.post, cfg.d_rnn)
                          : rnn_gru(projected, leaves.post, cfg.d_rnn);
    s = ad::add_rowvec(ad::matmul(recur, leaves.post.w4), leaves.post.b4);
  }
  return s;
}

}  // namespace tahp
