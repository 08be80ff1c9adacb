#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "support/test_models.hpp"
#include "tahp/event_data.hpp"

using namespace tahp;

namespace {

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

Dataset sample_dataset() {
  Dataset ds;
  ds.num_types = 3;
  ds.name = "sample";
  ds.sequences.push_back(test::make_seq({{0.31, 2}, {0.9, 0}, {1.55, 1}}));
  ds.sequences.push_back(test::make_seq({{0.12, 0}, {0.4, 1}}));
  return ds;
}

}  // namespace

TEST_SUITE("event_data") {

TEST_CASE("jsonl round trip is the identity, byte for byte on the second pass") {
  const std::string p1 = temp_path("tahp_rt1.jsonl");
  const std::string p2 = temp_path("tahp_rt2.jsonl");
  const Dataset ds = sample_dataset();
  save_jsonl(ds, p1);
  const Dataset loaded = load_jsonl(p1);
  CHECK(loaded.size() == 2);
  CHECK(loaded.num_types == 3);
  CHECK(loaded.name == "sample");
  CHECK(loaded.sequences[0].size() == 3);
  CHECK(loaded.sequences[0].time(0) == ds.sequences[0].time(0));
  CHECK(loaded.sequences[0].type(0) == 2);
  save_jsonl(loaded, p2);
  CHECK(slurp(p1) == slurp(p2));
}

TEST_CASE("loader errors cite the offending line") {
  const std::string path = temp_path("tahp_bad.jsonl");
  {
    std::ofstream out(path);
    out << "{\"num_types\":2}\n";
    out << "{\"events\":[{\"t\":1.0,\"c\":0},{\"t\":0.5,\"c\":1}]}\n";
  }
  try {
    load_jsonl(path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  {
    std::ofstream out(path);
    out << "{\"num_types\":2}\n";
    out << "{\"events\":[{\"t\":1.0,\"c\":0},{\"t\":1.5,\"c\":2}]}\n";
  }
  try {
    load_jsonl(path);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("type 2") != std::string::npos);
  }

  {
    std::ofstream out(path);
  }
  CHECK_THROWS_AS(load_jsonl(path), ValidationError);
}

TEST_CASE("sequence validation enforces the data contract") {
  CHECK_THROWS_AS(validate_sequence(test::make_seq({{1.0, 0}}), 2),
                  ValidationError);
  CHECK_THROWS_AS(validate_sequence(test::make_seq({{0.0, 0}, {1.0, 1}}), 2),
                  ValidationError);
  CHECK_THROWS_AS(validate_sequence(test::make_seq({{1.0, 0}, {1.0, 1}}), 2),
                  ValidationError);
  CHECK_THROWS_AS(validate_sequence(test::make_seq({{1.0, 0}, {2.0, 5}}), 2),
                  ValidationError);
  CHECK_NOTHROW(validate_sequence(test::make_seq({{1.0, 0}, {2.0, 1}}), 2));
}

TEST_CASE("split produces 6/2/2 on ten sequences, deterministically") {
  Dataset ds;
  ds.num_types = 1;
  for (int i = 0; i < 10; ++i) {
    ds.sequences.push_back(
        test::make_seq({{0.5 + i, 0}, {1.5 + i, 0}, {2.5 + i, 0}}));
  }
  const DatasetSplits s1 = split(ds, {0.6, 0.2, 0.2}, 7);
  CHECK(s1.train.size() == 6);
  CHECK(s1.dev.size() == 2);
  CHECK(s1.test.size() == 2);

  const DatasetSplits s2 = split(ds, {0.6, 0.2, 0.2}, 7);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK(s1.train.sequences[i].time(0) == s2.train.sequences[i].time(0));
  }

  // the union of the splits is the original multiset of sequences
  std::vector<double> firsts;
  for (const auto* part : {&s1.train, &s1.dev, &s1.test}) {
    for (const auto& seq : part->sequences) firsts.push_back(seq.time(0));
  }
  std::sort(firsts.begin(), firsts.end());
  for (int i = 0; i < 10; ++i) CHECK(firsts[i] == doctest::Approx(0.5 + i));
}

TEST_CASE("split rejects bad ratios and tiny datasets") {
  Dataset ds;
  ds.num_types = 1;
  for (int i = 0; i < 5; ++i) {
    ds.sequences.push_back(test::make_seq({{0.5 + i, 0}, {1.5 + i, 0}}));
  }
  CHECK_THROWS_AS(split(ds, {0.5, 0.2, 0.2}, 1), ConfigError);
  Dataset small;
  small.num_types = 1;
  small.sequences.push_back(test::make_seq({{0.5, 0}, {1.5, 0}}));
  CHECK_THROWS_AS(split(small, {0.6, 0.2, 0.2}, 1), ConfigError);
}

}  // TEST_SUITE
