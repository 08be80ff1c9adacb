#include "tahp/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "tahp/rng.hpp"

namespace tahp {

using ad::Matrix;
using nlohmann::json;

std::string to_string(AttentionVariant v) {
  return v == AttentionVariant::TemporalAugmented ? "taa" : "biased";
}

AttentionVariant variant_from_string(const std::string& s) {
  if (s == "taa") return AttentionVariant::TemporalAugmented;
  if (s == "biased") return AttentionVariant::Biased;
  throw ConfigError("unknown attention variant '" + s + "', expected taa|biased");
}

std::string to_string(RnnCell c) { return c == RnnCell::Lstm ? "lstm" : "gru"; }

RnnCell rnn_cell_from_string(const std::string& s) {
  if (s == "lstm") return RnnCell::Lstm;
  if (s == "gru") return RnnCell::Gru;
  throw ConfigError("unknown rnn cell '" + s + "', expected lstm|gru");
}

int ModelConfig::conv_flat_dim() const {
  return 4 * ad::pool_out_len(ad::conv_out_len(d_inner));
}

void ModelConfig::validate() const {
  std::vector<std::string> errs;
  if (num_types < 1) errs.push_back("num_types must be >= 1");
  if (d_model < 2 || d_model % 2 != 0) errs.push_back("d_model must be even and >= 2");
  if (d_qk < 1) errs.push_back("d_qk must be >= 1");
  if (d_value != d_qk) errs.push_back("d_value must equal d_qk");
  if (d_inner < 5) errs.push_back("d_inner must be >= 5 (conv/pool needs it)");
  if (num_heads < 1) errs.push_back("num_heads must be >= 1");
  if (num_layers < 0) errs.push_back("num_layers must be >= 0");
  if (d_rnn < 0) errs.push_back("d_rnn must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0) errs.push_back("dropout must be in [0, 1)");
  if (!(softplus_beta > 0.0)) errs.push_back("softplus_beta must be positive");
  if (!errs.empty()) {
    std::string msg = "invalid model config:";
    for (const auto& e : errs) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
}

json ModelConfig::to_json() const {
  return json{{"num_types", num_types},
              {"d_model", d_model},
              {"d_inner", d_inner},
              {"d_qk", d_qk},
              {"d_value", d_value},
              {"num_heads", num_heads},
              {"num_layers", num_layers},
              {"d_rnn", d_rnn},
              {"dropout", dropout},
              {"variant", to_string(variant)},
              {"rnn_cell", to_string(rnn_cell)},
              {"softplus_beta", softplus_beta},
              {"include_first_event_term", include_first_event_term},
              {"freeze_w_tem", freeze_w_tem}};
}

ModelConfig ModelConfig::from_json(const json& j) {
  ModelConfig cfg;
  cfg.num_types = j.at("num_types").get<int>();
  cfg.d_model = j.at("d_model").get<int>();
  cfg.d_inner = j.at("d_inner").get<int>();
  cfg.d_qk = j.at("d_qk").get<int>();
  cfg.d_value = j.at("d_value").get<int>();
  cfg.num_heads = j.at("num_heads").get<int>();
  cfg.num_layers = j.at("num_layers").get<int>();
  cfg.d_rnn = j.at("d_rnn").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.variant = variant_from_string(j.at("variant").get<std::string>());
  cfg.rnn_cell = rnn_cell_from_string(j.at("rnn_cell").get<std::string>());
  cfg.softplus_beta = j.at("softplus_beta").get<double>();
  cfg.include_first_event_term = j.at("include_first_event_term").get<bool>();
  cfg.freeze_w_tem = j.at("freeze_w_tem").get<bool>();
  cfg.validate();
  return cfg;
}

Preset preset_by_name(const std::string& name, int num_types) {
  auto make = [num_types](int batch, int d, int dh, int dkv, int heads, int layers,
                          int drnn) {
    Preset p;
    p.batch_size = batch;
    p.model.num_types = num_types;
    p.model.d_model = d;
    p.model.d_inner = dh;
    p.model.d_qk = dkv;
    p.model.d_value = dkv;
    p.model.num_heads = heads;
    p.model.num_layers = layers;
    p.model.d_rnn = drnn;
    p.model.dropout = 0.1;
    return p;
  };
  if (name == "synthetic") return make(16, 64, 256, 64, 3, 3, 64);
  if (name == "neuralhawkes") return make(16, 64, 256, 64, 3, 3, 64);
  if (name == "retweets") return make(16, 64, 256, 64, 3, 3, 64);
  if (name == "mimic-ii") return make(1, 128, 256, 256, 5, 5, 0);
  if (name == "stackoverflow") return make(4, 128, 512, 256, 4, 4, 64);
  if (name == "financial") return make(1, 128, 512, 512, 4, 4, 64);
  if (name == "desk") return make(16, 16, 32, 16, 2, 2, 0);
  std::string msg = "unknown preset '" + name + "'; valid presets:";
  for (const auto& p : preset_names()) msg += " " + p;
  throw ConfigError(msg);
}

std::vector<std::string> preset_names() {
  return {"synthetic", "neuralhawkes", "retweets", "mimic-ii",
          "stackoverflow", "financial", "desk"};
}

Matrix& ModelParams::at(const std::string& name) {
  auto it = index.find(name);
  if (it == index.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries[it->second].value;
}

const Matrix& ModelParams::at(const std::string& name) const {
  auto it = index.find(name);
  if (it == index.end()) throw ConfigError("unknown parameter '" + name + "'");
  return entries[it->second].value;
}

void ModelParams::add(std::string name, Matrix value) {
  if (index.count(name) > 0) throw ConfigError("duplicate parameter '" + name + "'");
  index.emplace(name, entries.size());
  Matrix grad = Matrix::Zero(value.rows(), value.cols());
  entries.push_back({std::move(name), std::move(value), std::move(grad)});
}

void ModelParams::zero_grads() {
  for (auto& e : entries) e.grad.setZero();
}

double ModelParams::grad_sq_norm() const {
  double s = 0.0;
  for (const auto& e : entries) s += e.grad.squaredNorm();
  return s;
}

std::size_t ModelParams::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += static_cast<std::size_t>(e.value.size());
  return n;
}

namespace {

Matrix xavier(RngStream& rng, int rows, int cols) {
  const double a = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-a, a);
  }
  return m;
}

std::string layer_prefix(int layer) { return "layer" + std::to_string(layer); }
std::string head_prefix(int layer, int head) {
  return layer_prefix(layer) + ".head" + std::to_string(head);
}

}  // namespace

ModelParams ModelParams::init(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  RngStream rng = derive_stream(seed, {streams::kParamInit});
  ModelParams p;
  const int d = cfg.d_model;
  const int dh = cfg.d_inner;
  const int dk = cfg.d_qk;
  const int dv = cfg.d_value;
  const int flat = cfg.conv_flat_dim();

  p.add("embed", xavier(rng, d, cfg.num_types));
  for (int layer = 0; layer < cfg.num_layers; ++layer) {
    for (int head = 0; head < cfg.num_heads; ++head) {
      const std::string hp = head_prefix(layer, head);
      p.add(hp + ".w_q", xavier(rng, d, dk));
      p.add(hp + ".w_k", xavier(rng, d, dk));
      p.add(hp + ".w_v", xavier(rng, d, dv));
      p.add(hp + ".w_tem", xavier(rng, d, dk));
      p.add(hp + ".b_q", Matrix::Zero(1, dk));
      p.add(hp + ".b_t", Matrix::Zero(1, dk));
    }
    const std::string lp = layer_prefix(layer);
    p.add(lp + ".w_multi", xavier(rng, cfg.num_heads * dv, d));
    p.add(lp + ".ffn.w1", xavier(rng, d, dh));
    p.add(lp + ".ffn.b1", Matrix::Zero(1, dh));
    p.add(lp + ".ffn.conv", xavier(rng, 4, 3));
    p.add(lp + ".ffn.w2", xavier(rng, flat, d));
    p.add(lp + ".ffn.b2", Matrix::Zero(1, d));
    p.add(lp + ".ln1.gain", Matrix::Ones(1, d));
    p.add(lp + ".ln1.bias", Matrix::Zero(1, d));
    p.add(lp + ".ln2.gain", Matrix::Ones(1, d));
    p.add(lp + ".ln2.bias", Matrix::Zero(1, d));
  }
  if (cfg.d_rnn > 0) {
    const int r = cfg.d_rnn;
    const int gates = cfg.rnn_cell == RnnCell::Lstm ? 4 : 3;
    p.add("post.w3", xavier(rng, d, r));
    p.add("post.b3", Matrix::Zero(1, r));
    p.add("post.rnn.w_x", xavier(rng, r, gates * r));
    p.add("post.rnn.w_h", xavier(rng, r, gates * r));
    p.add("post.rnn.b", Matrix::Zero(1, gates * r));
    if (cfg.rnn_cell == RnnCell::Gru) p.add("post.rnn.b_h", Matrix::Zero(1, gates * r));
    p.add("post.w4", xavier(rng, r, d));
    p.add("post.b4", Matrix::Zero(1, d));
  }
  p.add("intensity.base", Matrix::Zero(1, cfg.num_types));
  p.add("intensity.w_alpha", xavier(rng, cfg.num_types, d));
  p.add("intensity.w_hist", xavier(rng, cfg.num_types, d));
  p.add("predict.w_time", xavier(rng, 1, d));
  p.add("predict.w_type", xavier(rng, cfg.num_types, d));

  if (cfg.freeze_w_tem) {
    for (auto& e : p.entries) {
      if (e.name.ends_with(".w_tem")) e.value.setZero();
    }
  }
  return p;
}

ModelLeaves ModelLeaves::bind(const ModelParams& params, const ModelConfig& cfg) {
  ModelLeaves l;
  l.flat.reserve(params.entries.size());
  std::unordered_map<std::string, ad::Var> by_name;
  for (const auto& e : params.entries) {
    ad::Var v = ad::Var::leaf(e.value);
    l.flat.emplace_back(e.name, v);
    by_name.emplace(e.name, v);
  }
  auto get = [&](const std::string& name) {
    auto it = by_name.find(name);
    if (it == by_name.end()) {
      throw ConfigError("parameter store lacks '" + name +
                        "' required by the model config");
    }
    return it->second;
  };
  l.embedding = get("embed");
  for (int layer = 0; layer < cfg.num_layers; ++layer) {
    LayerLeaves ll;
    for (int head = 0; head < cfg.num_heads; ++head) {
      const std::string hp = head_prefix(layer, head);
      ll.heads.push_back({get(hp + ".w_q"), get(hp + ".w_k"), get(hp + ".w_v"),
                          get(hp + ".w_tem"), get(hp + ".b_q"), get(hp + ".b_t")});
    }
    const std::string lp = layer_prefix(layer);
    ll.w_multi = get(lp + ".w_multi");
    ll.ffn_w1 = get(lp + ".ffn.w1");
    ll.ffn_b1 = get(lp + ".ffn.b1");
    ll.conv_kernels = get(lp + ".ffn.conv");
    ll.ffn_w2 = get(lp + ".ffn.w2");
    ll.ffn_b2 = get(lp + ".ffn.b2");
    ll.ln1_gain = get(lp + ".ln1.gain");
    ll.ln1_bias = get(lp + ".ln1.bias");
    ll.ln2_gain = get(lp + ".ln2.gain");
    ll.ln2_bias = get(lp + ".ln2.bias");
    l.layers.push_back(std::move(ll));
  }
  if (cfg.d_rnn > 0) {
    l.post.w3 = get("post.w3");
    l.post.b3 = get("post.b3");
    l.post.rnn_w_x = get("post.rnn.w_x");
    l.post.rnn_w_h = get("post.rnn.w_h");
    l.post.rnn_b = get("post.rnn.b");
    if (cfg.rnn_cell == RnnCell::Gru) l.post.rnn_b_h = get("post.rnn.b_h");
    l.post.w4 = get("post.w4");
    l.post.b4 = get("post.b4");
  }
  l.intensity_base = get("intensity.base");
  l.intensity_w_alpha = get("intensity.w_alpha");
  l.intensity_w_hist = get("intensity.w_hist");
  l.w_time = get("predict.w_time");
  l.w_type = get("predict.w_type");
  return l;
}

void ModelLeaves::accumulate_grads(ModelParams& params) const {
  if (flat.size() != params.entries.size()) {
    throw ConfigError("leaf/store mismatch: " + std::to_string(flat.size()) +
                      " leaves vs " + std::to_string(params.entries.size()) +
                      " parameters");
  }
  for (std::size_t i = 0; i < flat.size(); ++i) {
    params.entries[i].grad += flat[i].second.grad();
  }
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

constexpr char kMagic[8] = {'T', 'A', 'H', 'P', 'C', 'K', 'P', '1'};

}  // namespace

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const ModelParams& params, const json& meta) {
  json header;
  header["version"] = 1;
  header["config"] = cfg.to_json();
  header["meta"] = meta;
  header["params"] = json::array();
  for (const auto& e : params.entries) {
    header["params"].push_back(json{
        {"name", e.name}, {"rows", e.value.rows()}, {"cols", e.value.cols()}});
  }
  const std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t head_len = head.size();
  out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto& e : params.entries) {
    for (Eigen::Index i = 0; i < e.value.rows(); ++i) {
      for (Eigen::Index j = 0; j < e.value.cols(); ++j) {
        const double v = e.value(i, j);
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
      }
    }
  }
  if (!out) throw ValidationError("write failed for checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError(path + " is not a checkpoint (bad magic)");
  }
  std::uint64_t head_len = 0;
  in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
  if (!in || head_len == 0 || head_len > (1ull << 30)) {
    throw ValidationError(path + ": corrupt checkpoint header length");
  }
  std::string head(head_len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head_len));
  if (!in) throw ValidationError(path + ": truncated checkpoint header");
  json header;
  try {
    header = json::parse(head);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": checkpoint header does not parse: " + e.what());
  }
  if (header.at("version").get<int>() != 1) {
    throw ValidationError(path + ": unsupported checkpoint version");
  }
  Checkpoint ckpt;
  ckpt.config = ModelConfig::from_json(header.at("config"));
  ckpt.meta = header.value("meta", json::object());
  for (const auto& pj : header.at("params")) {
    const auto name = pj.at("name").get<std::string>();
    const auto rows = pj.at("rows").get<Eigen::Index>();
    const auto cols = pj.at("cols").get<Eigen::Index>();
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) {
        double v = 0.0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!in) throw ValidationError(path + ": truncated tensor data");
        m(i, j) = v;
      }
    }
    ckpt.params.add(name, std::move(m));
  }
  return ckpt;
}

}  // namespace tahp
