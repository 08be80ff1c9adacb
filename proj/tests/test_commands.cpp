#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tahp/commands.hpp"

using namespace tahp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fresh_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

RunConfig pipeline_config(const std::string& dir) {
  json j;
  j["seed"] = 21;
  j["out_dir"] = dir;
  j["model"] = json{{"preset", "desk"}, {"num_layers", 1}, {"d_rnn", 0}};
  j["train"] = json{{"epochs", 2},  {"batch_size", 8},
                    {"integrator", "mc:8"}, {"lr", 1e-4}};
  j["data"] = json{{"dataset", dir + "/dataset.jsonl"}, {"split_seed", 4}};
  j["simulate"] = json{{"num_sequences", 24}, {"horizon", 12.0}};
  return parse_run_config(j);
}

}  // namespace

TEST_SUITE("commands") {

TEST_CASE("config validation reports every offending field at once") {
  json j;
  j["bogus_top"] = 1;
  j["train"] = json{{"epochs", 2}, {"mystery", true}, {"integrator", "simpson"}};
  j["model"] = json{{"preset", "desk"}, {"nonsense", 3}};
  try {
    parse_run_config(j);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bogus_top") != std::string::npos);
    CHECK(msg.find("train.mystery") != std::string::npos);
    CHECK(msg.find("train.integrator") != std::string::npos);
    CHECK(msg.find("model.nonsense") != std::string::npos);
  }
}

TEST_CASE("unknown presets list the valid names") {
  try {
    preset_by_name("gigantic", 2);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("desk") != std::string::npos);
    CHECK(msg.find("stackoverflow") != std::string::npos);
    CHECK(msg.find("financial") != std::string::npos);
  }
}

TEST_CASE("print-config emits the full schema with presets") {
  const json defaults = default_run_config_json();
  for (const char* key :
       {"seed", "threads", "out_dir", "model", "train", "data", "simulate",
        "eval", "presets"}) {
    CHECK(defaults.contains(key));
  }
  CHECK(defaults["presets"].contains("desk"));
  CHECK(defaults["presets"]["stackoverflow"]["d_model"] == 128);
  CHECK(defaults["presets"]["mimic-ii"]["batch_size"] == 1);
  CHECK(defaults["train"]["lr"] == 1e-4);
  CHECK(defaults["train"]["beta1"] == 0.9);
  CHECK(defaults["train"]["beta2"] == 0.999);
  CHECK(defaults["train"]["eps"] == 1e-8);
  CHECK(defaults["train"]["weight_decay"] == 0.0);
  CHECK(defaults["train"]["alpha_time"] == 0.01);
  CHECK(defaults["train"]["alpha_type"] == 1.0);
}

TEST_CASE("simulate writes a loadable dataset and is byte-deterministic") {
  const std::string dir = fresh_dir("tahp_cmd_sim");
  RunConfig cfg = pipeline_config(dir);
  cfg.simulate.num_sequences = 10;
  cmd_simulate(cfg);
  const Dataset ds = load_jsonl(dir + "/dataset.jsonl");
  CHECK(ds.size() == 10);
  CHECK(ds.num_types == 2);
  const std::string bytes1 = slurp(dir + "/dataset.jsonl");
  const std::string gt1 = slurp(dir + "/dataset.gt.json");
  cmd_simulate(cfg);
  CHECK(slurp(dir + "/dataset.jsonl") == bytes1);
  CHECK(slurp(dir + "/dataset.gt.json") == gt1);

  RunConfig bad = cfg;
  bad.simulate.horizon = 0.0;
  CHECK_THROWS_AS(cmd_simulate(bad), ConfigError);
}

TEST_CASE("train then eval reproduces the stored dev metrics") {
  const std::string dir = fresh_dir("tahp_cmd_pipe");
  RunConfig cfg = pipeline_config(dir);
  cmd_simulate(cfg);
  cmd_train(cfg);
  CHECK(fs::exists(dir + "/model.ckpt"));
  CHECK(fs::exists(dir + "/history.json"));
  CHECK(fs::exists(dir + "/curves.csv"));

  const json history = json::parse(slurp(dir + "/history.json"));
  const int best = history.at("best_epoch").get<int>();
  const double stored_dev_nll =
      history.at("epochs")[best].at("dev_nll_per_event").get<double>();

  RunConfig eval_cfg = cfg;
  eval_cfg.eval_checkpoint = dir + "/model.ckpt";
  eval_cfg.eval_split = "dev";
  eval_cfg.eval_integrator = Integrator::trapezoid();
  eval_cfg.out_dir = dir + "/eval";
  cmd_eval(eval_cfg);
  const json metrics = json::parse(slurp(dir + "/eval/metrics.json"));
  CHECK(metrics.at("loglike_per_event").get<double>() ==
        doctest::Approx(-stored_dev_nll).epsilon(1e-9));
  CHECK(fs::exists(dir + "/eval/curves.csv"));  // regenerated from history

  RunConfig missing = eval_cfg;
  missing.eval_checkpoint = dir + "/nonexistent.ckpt";
  CHECK_THROWS_AS(cmd_eval(missing), ValidationError);
}

TEST_CASE("train artifacts are deterministic modulo wall time") {
  const std::string dir1 = fresh_dir("tahp_cmd_det1");
  const std::string dir2 = fresh_dir("tahp_cmd_det2");
  RunConfig cfg1 = pipeline_config(dir1);
  cfg1.simulate.num_sequences = 12;
  cmd_simulate(cfg1);
  cmd_train(cfg1);
  RunConfig cfg2 = pipeline_config(dir2);
  cfg2.simulate.num_sequences = 12;
  cfg2.data_single = dir1 + "/dataset.jsonl";  // same inputs
  cmd_train(cfg2);
  CHECK(slurp(dir1 + "/model.ckpt") == slurp(dir2 + "/model.ckpt"));
  CHECK(slurp(dir1 + "/curves.csv") == slurp(dir2 + "/curves.csv"));

  json h1 = json::parse(slurp(dir1 + "/history.json"));
  json h2 = json::parse(slurp(dir2 + "/history.json"));
  for (auto& e : h1["epochs"]) e.erase("wall_seconds");
  for (auto& e : h2["epochs"]) e.erase("wall_seconds");
  CHECK(h1 == h2);
}

TEST_CASE("ablate writes the paired report") {
  const std::string dir = fresh_dir("tahp_cmd_abl");
  RunConfig cfg = pipeline_config(dir);
  cfg.simulate.num_sequences = 12;
  cfg.train.epochs = 1;
  cmd_simulate(cfg);
  cmd_ablate(cfg);
  const json report = json::parse(slurp(dir + "/ablation.json"));
  REQUIRE(report.at("variants").size() == 2);
  CHECK(report.at("variants")[0].at("variant") == "taa");
  CHECK(report.at("variants")[1].at("variant") == "biased");
  CHECK(report.contains("delta"));
  CHECK(fs::exists(dir + "/model_taa.ckpt"));
  CHECK(fs::exists(dir + "/model_biased.ckpt"));
}

TEST_CASE("model resolution honors presets with field overrides") {
  json j;
  j["model"] = json{{"preset", "stackoverflow"}, {"num_layers", 2}};
  const RunConfig cfg = parse_run_config(j);
  const ModelConfig model = resolve_model_config(cfg, 5);
  CHECK(model.d_model == 128);
  CHECK(model.d_inner == 512);
  CHECK(model.d_qk == 256);
  CHECK(model.num_layers == 2);  // overridden
  CHECK(model.num_types == 5);

  json bad;
  bad["model"] = json{{"num_types", 2}};
  CHECK_THROWS_AS(resolve_model_config(parse_run_config(bad), 5), ConfigError);
}

}  // TEST_SUITE
