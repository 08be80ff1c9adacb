#include "tahp/run_config.hpp"

#include <fstream>

namespace tahp {

using nlohmann::json;

SimulateConfig SimulateConfig::defaults() {
  SimulateConfig sim;
  sim.num_sequences = 200;
  sim.horizon = 60.0;
  sim.gt.mu = Eigen::Vector2d(0.25, 0.25);
  sim.gt.alpha = Eigen::MatrixXd{{0.4, 0.1}, {0.1, 0.4}};
  sim.gt.delta = Eigen::MatrixXd::Ones(2, 2);
  return sim;
}

json SimulateConfig::to_json() const {
  auto mat = [](const Eigen::MatrixXd& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      json row = json::array();
      for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
      rows.push_back(row);
    }
    return rows;
  };
  json mu = json::array();
  for (Eigen::Index i = 0; i < gt.mu.size(); ++i) mu.push_back(gt.mu(i));
  return json{{"num_sequences", num_sequences},
              {"horizon", horizon},
              {"mu", mu},
              {"alpha", mat(gt.alpha)},
              {"delta", mat(gt.delta)}};
}

namespace {

class FieldErrors {
 public:
  void add(const std::string& field, const std::string& what) {
    errors_.push_back(field + ": " + what);
  }
  void raise_if_any() const {
    if (errors_.empty()) return;
    std::string msg = "invalid config:";
    for (const auto& e : errors_) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  bool empty() const { return errors_.empty(); }

 private:
  std::vector<std::string> errors_;
};

void check_known_keys(const json& section, const std::string& name,
                      const std::vector<std::string>& known, FieldErrors& errs) {
  for (const auto& [key, value] : section.items()) {
    (void)value;
    bool ok = false;
    for (const auto& k : known) ok = ok || k == key;
    if (!ok) errs.add(name + "." + key, "unknown field");
  }
}

template <typename T>
void read_field(const json& section, const std::string& name, const char* key,
                T& out, FieldErrors& errs) {
  if (!section.contains(key)) return;
  try {
    out = section.at(key).get<T>();
  } catch (const json::exception&) {
    errs.add(name + "." + key, "wrong type");
  }
}

Eigen::MatrixXd read_matrix(const json& rows) {
  const auto r = rows.size();
  if (r == 0) throw json::type_error::create(302, "empty matrix", nullptr);
  const auto c = rows.at(0).size();
  Eigen::MatrixXd m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    if (rows.at(i).size() != c) {
      throw json::type_error::create(302, "ragged matrix", nullptr);
    }
    for (std::size_t j = 0; j < c; ++j) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          rows.at(i).at(j).get<double>();
    }
  }
  return m;
}

void parse_train_section(const json& section, RunConfig& cfg, FieldErrors& errs) {
  check_known_keys(section, "train",
                   {"alpha_time", "alpha_type", "integrator", "epochs",
                    "batch_size", "lr", "beta1", "beta2", "eps", "weight_decay",
                    "clip_norm"},
                   errs);
  TrainConfig& t = cfg.train;
  read_field(section, "train", "alpha_time", t.alpha_time, errs);
  read_field(section, "train", "alpha_type", t.alpha_type, errs);
  if (section.contains("integrator")) {
    try {
      t.integrator = Integrator::parse(section.at("integrator").get<std::string>());
    } catch (const std::exception& e) {
      errs.add("train.integrator", e.what());
    }
  }
  read_field(section, "train", "epochs", t.epochs, errs);
  if (section.contains("batch_size")) {
    cfg.train_batch_given = true;
    read_field(section, "train", "batch_size", t.batch_size, errs);
  }
  read_field(section, "train", "lr", t.lr, errs);
  read_field(section, "train", "beta1", t.beta1, errs);
  read_field(section, "train", "beta2", t.beta2, errs);
  read_field(section, "train", "eps", t.eps, errs);
  read_field(section, "train", "weight_decay", t.weight_decay, errs);
  read_field(section, "train", "clip_norm", t.clip_norm, errs);
}

void parse_data_section(const json& section, RunConfig& cfg, FieldErrors& errs) {
  check_known_keys(section, "data",
                   {"dataset", "ratios", "split_seed", "train", "dev", "test"},
                   errs);
  read_field(section, "data", "dataset", cfg.data_single, errs);
  read_field(section, "data", "train", cfg.data_train, errs);
  read_field(section, "data", "dev", cfg.data_dev, errs);
  read_field(section, "data", "test", cfg.data_test, errs);
  read_field(section, "data", "split_seed", cfg.split_seed, errs);
  if (section.contains("ratios")) {
    try {
      const auto r = section.at("ratios").get<std::vector<double>>();
      if (r.size() != 3) throw ConfigError("expected 3 ratios");
      cfg.ratios = {r[0], r[1], r[2]};
    } catch (const std::exception& e) {
      errs.add("data.ratios", e.what());
    }
  }
  const bool single = !cfg.data_single.empty();
  const bool explicit_three =
      !cfg.data_train.empty() || !cfg.data_dev.empty() || !cfg.data_test.empty();
  if (single && explicit_three) {
    errs.add("data", "give either dataset+ratios or train/dev/test, not both");
  }
  if (explicit_three &&
      (cfg.data_train.empty() || cfg.data_dev.empty() || cfg.data_test.empty())) {
    errs.add("data", "explicit layout needs train, dev and test paths");
  }
}

void parse_simulate_section(const json& section, RunConfig& cfg, FieldErrors& errs) {
  check_known_keys(section, "simulate",
                   {"num_sequences", "horizon", "mu", "alpha", "delta"}, errs);
  read_field(section, "simulate", "num_sequences", cfg.simulate.num_sequences, errs);
  read_field(section, "simulate", "horizon", cfg.simulate.horizon, errs);
  try {
    if (section.contains("mu")) {
      const auto mu = section.at("mu").get<std::vector<double>>();
      cfg.simulate.gt.mu =
          Eigen::Map<const Eigen::VectorXd>(mu.data(), static_cast<long>(mu.size()));
    }
    if (section.contains("alpha")) {
      cfg.simulate.gt.alpha = read_matrix(section.at("alpha"));
    }
    if (section.contains("delta")) {
      cfg.simulate.gt.delta = read_matrix(section.at("delta"));
    }
  } catch (const json::exception& e) {
    errs.add("simulate", std::string("bad mu/alpha/delta: ") + e.what());
  }
}

void parse_eval_section(const json& section, RunConfig& cfg, FieldErrors& errs) {
  check_known_keys(section, "eval", {"checkpoint", "split", "integrator"}, errs);
  read_field(section, "eval", "checkpoint", cfg.eval_checkpoint, errs);
  read_field(section, "eval", "split", cfg.eval_split, errs);
  if (cfg.eval_split != "train" && cfg.eval_split != "dev" &&
      cfg.eval_split != "test") {
    errs.add("eval.split", "expected train|dev|test, got '" + cfg.eval_split + "'");
  }
  if (section.contains("integrator")) {
    try {
      cfg.eval_integrator =
          Integrator::parse(section.at("integrator").get<std::string>());
    } catch (const std::exception& e) {
      errs.add("eval.integrator", e.what());
    }
  }
}

const std::vector<std::string>& model_keys() {
  static const std::vector<std::string> keys = {
      "preset",     "num_types",  "d_model",
      "d_inner",    "d_qk",       "d_value",
      "num_heads",  "num_layers", "d_rnn",
      "dropout",    "variant",    "rnn_cell",
      "softplus_beta", "include_first_event_term", "freeze_w_tem"};
  return keys;
}

}  // namespace

RunConfig parse_run_config(const json& j) {
  FieldErrors errs;
  RunConfig cfg;
  check_known_keys(
      j, "(top level)",
      {"seed", "threads", "out_dir", "model", "train", "data", "simulate", "eval"},
      errs);
  read_field(j, "(top level)", "seed", cfg.seed, errs);
  read_field(j, "(top level)", "threads", cfg.threads, errs);
  read_field(j, "(top level)", "out_dir", cfg.out_dir, errs);
  if (j.contains("model")) {
    cfg.model = j.at("model");
    check_known_keys(cfg.model, "model", model_keys(), errs);
  }
  if (j.contains("train")) parse_train_section(j.at("train"), cfg, errs);
  if (j.contains("data")) parse_data_section(j.at("data"), cfg, errs);
  if (j.contains("simulate")) parse_simulate_section(j.at("simulate"), cfg, errs);
  if (j.contains("eval")) parse_eval_section(j.at("eval"), cfg, errs);
  errs.raise_if_any();
  cfg.train.seed = cfg.seed;
  cfg.train.threads = cfg.threads;
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + " does not parse: " + e.what());
  }
  return parse_run_config(j);
}

ModelConfig resolve_model_config(const RunConfig& cfg, int num_types_from_data) {
  const json& section = cfg.model;
  ModelConfig model;
  if (section.contains("preset")) {
    model =
        preset_by_name(section.at("preset").get<std::string>(), num_types_from_data)
            .model;
  } else {
    model.num_types = num_types_from_data;
  }
  FieldErrors errs;
  read_field(section, "model", "num_types", model.num_types, errs);
  read_field(section, "model", "d_model", model.d_model, errs);
  read_field(section, "model", "d_inner", model.d_inner, errs);
  read_field(section, "model", "d_qk", model.d_qk, errs);
  read_field(section, "model", "d_value", model.d_value, errs);
  read_field(section, "model", "num_heads", model.num_heads, errs);
  read_field(section, "model", "num_layers", model.num_layers, errs);
  read_field(section, "model", "d_rnn", model.d_rnn, errs);
  read_field(section, "model", "dropout", model.dropout, errs);
  if (section.contains("variant")) {
    try {
      model.variant = variant_from_string(section.at("variant").get<std::string>());
    } catch (const std::exception& e) {
      errs.add("model.variant", e.what());
    }
  }
  if (section.contains("rnn_cell")) {
    try {
      model.rnn_cell = rnn_cell_from_string(section.at("rnn_cell").get<std::string>());
    } catch (const std::exception& e) {
      errs.add("model.rnn_cell", e.what());
    }
  }
  read_field(section, "model", "softplus_beta", model.softplus_beta, errs);
  read_field(section, "model", "include_first_event_term",
             model.include_first_event_term, errs);
  read_field(section, "model", "freeze_w_tem", model.freeze_w_tem, errs);
  if (model.num_types < num_types_from_data) {
    errs.add("model.num_types",
             "declares " + std::to_string(model.num_types) +
                 " types but the data has " + std::to_string(num_types_from_data));
  }
  errs.raise_if_any();
  model.validate();
  return model;
}

DatasetSplits load_splits(const RunConfig& cfg) {
  if (!cfg.data_train.empty()) {
    DatasetSplits splits;
    splits.train = load_jsonl(cfg.data_train);
    splits.dev = load_jsonl(cfg.data_dev);
    splits.test = load_jsonl(cfg.data_test);
    const int c = std::max({splits.train.num_types, splits.dev.num_types,
                            splits.test.num_types});
    splits.train.num_types = splits.dev.num_types = splits.test.num_types = c;
    return splits;
  }
  if (cfg.data_single.empty()) {
    throw ConfigError("data: no dataset configured (set data.dataset or "
                      "data.train/dev/test)");
  }
  const Dataset ds = load_jsonl(cfg.data_single);
  return split(ds, cfg.ratios, cfg.split_seed);
}

json default_run_config_json() {
  const RunConfig cfg;
  json out;
  out["seed"] = cfg.seed;
  out["threads"] = cfg.threads;
  out["out_dir"] = cfg.out_dir;
  out["model"] = json{{"preset", "desk"}};
  out["train"] = json{{"alpha_time", cfg.train.alpha_time},
                      {"alpha_type", cfg.train.alpha_type},
                      {"integrator", cfg.train.integrator.str()},
                      {"epochs", cfg.train.epochs},
                      {"batch_size", cfg.train.batch_size},
                      {"lr", cfg.train.lr},
                      {"beta1", cfg.train.beta1},
                      {"beta2", cfg.train.beta2},
                      {"eps", cfg.train.eps},
                      {"weight_decay", cfg.train.weight_decay},
                      {"clip_norm", cfg.train.clip_norm}};
  out["data"] = json{{"dataset", ""},
                     {"ratios", json::array({0.6, 0.2, 0.2})},
                     {"split_seed", cfg.split_seed}};
  out["simulate"] = cfg.simulate.to_json();
  out["eval"] = json{{"checkpoint", ""}, {"split", "test"}, {"integrator", "mc:100"}};
  json presets;
  for (const auto& name : preset_names()) {
    const Preset p = preset_by_name(name, 2);
    json pj = p.model.to_json();
    pj.erase("num_types");  // always taken from the data
    pj["batch_size"] = p.batch_size;
    presets[name] = pj;
  }
  out["presets"] = presets;
  return out;
}

}  // namespace tahp
