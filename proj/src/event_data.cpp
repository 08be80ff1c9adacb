#include "tahp/event_data.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "tahp/rng.hpp"

namespace tahp {

using nlohmann::json;

std::vector<double> EventSequence::times() const {
  std::vector<double> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(e.t);
  return out;
}

std::vector<int> EventSequence::types() const {
  std::vector<int> out;
  out.reserve(events.size());
  for (const auto& e : events) out.push_back(e.type);
  return out;
}

namespace {
std::string at_line(long line_no) {
  return line_no > 0 ? " (line " + std::to_string(line_no) + ")" : "";
}
}  // namespace

void validate_sequence(const EventSequence& seq, int num_types, long line_no) {
  if (seq.size() < 2) {
    throw ValidationError("sequence has " + std::to_string(seq.size()) +
                          " events, need at least 2" + at_line(line_no));
  }
  if (!(seq.events.front().t > 0.0)) {
    throw ValidationError("first timestamp must be positive, got " +
                          std::to_string(seq.events.front().t) + at_line(line_no));
  }
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const Event& e = seq.events[i];
    if (!std::isfinite(e.t)) {
      throw ValidationError("non-finite timestamp at event " + std::to_string(i) +
                            at_line(line_no));
    }
    if (i > 0 && !(e.t > seq.events[i - 1].t)) {
      throw ValidationError("timestamps not strictly increasing at event " +
                            std::to_string(i) + ": " +
                            std::to_string(seq.events[i - 1].t) + " -> " +
                            std::to_string(e.t) + at_line(line_no));
    }
    if (e.type < 0 || e.type >= num_types) {
      throw ValidationError("event type " + std::to_string(e.type) +
                            " outside [0, " + std::to_string(num_types) + ")" +
                            at_line(line_no));
    }
  }
}

std::size_t Dataset::total_events() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.size();
  return n;
}

void Dataset::validate() const {
  if (num_types < 1) {
    throw ValidationError("dataset declares num_types=" + std::to_string(num_types));
  }
  for (const auto& s : sequences) validate_sequence(s, num_types);
}

Dataset load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::string line;
  long line_no = 0;

  if (!std::getline(in, line)) throw ValidationError(path + " is empty");
  ++line_no;
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw ValidationError(path + ": header does not parse" + at_line(line_no) +
                          ": " + e.what());
  }
  if (!header.contains("num_types") || !header["num_types"].is_number_integer()) {
    throw ValidationError(path + ": header must declare integer num_types" +
                          at_line(line_no));
  }
  Dataset ds;
  ds.num_types = header["num_types"].get<int>();
  if (header.contains("name")) ds.name = header["name"].get<std::string>();
  if (ds.num_types < 1) {
    throw ValidationError(path + ": num_types must be at least 1" + at_line(line_no));
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json rec;
    try {
      rec = json::parse(line);
    } catch (const json::exception& e) {
      throw ValidationError(path + ": record does not parse" + at_line(line_no) +
                            ": " + e.what());
    }
    if (!rec.contains("events") || !rec["events"].is_array()) {
      throw ValidationError(path + ": record lacks an events array" +
                            at_line(line_no));
    }
    EventSequence seq;
    seq.events.reserve(rec["events"].size());
    for (const auto& je : rec["events"]) {
      if (!je.contains("t") || !je.contains("c")) {
        throw ValidationError(path + ": event lacks t/c fields" + at_line(line_no));
      }
      seq.events.push_back({je["t"].get<double>(), je["c"].get<int>()});
    }
    validate_sequence(seq, ds.num_types, line_no);
    ds.sequences.push_back(std::move(seq));
  }
  if (ds.sequences.empty()) {
    throw ValidationError(path + " contains a header but no sequences");
  }
  return ds;
}

void save_jsonl(const Dataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path);
  json header;
  header["num_types"] = ds.num_types;
  if (!ds.name.empty()) header["name"] = ds.name;
  out << header.dump() << '\n';
  for (const auto& seq : ds.sequences) {
    json rec;
    rec["events"] = json::array();
    for (const auto& e : seq.events) {
      rec["events"].push_back(json{{"t", e.t}, {"c", e.type}});
    }
    out << rec.dump() << '\n';
  }
  if (!out) throw ValidationError("write failed for " + path);
}

DatasetSplits split(const Dataset& ds, SplitRatios ratios, std::uint64_t seed) {
  const double sum = ratios.train + ratios.dev + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ConfigError("split: ratios must sum to 1, got " + std::to_string(sum));
  }
  const std::size_t n = ds.size();
  if (n < 3) {
    throw ConfigError("split: need at least 3 sequences, got " + std::to_string(n));
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  RngStream rng = derive_stream(seed, {streams::kSplit});
  for (std::size_t i = n - 1; i > 0; --i) {
    const std::size_t j = rng.next_u64() % (i + 1);
    std::swap(order[i], order[j]);
  }
  const std::size_t n_train =
      static_cast<std::size_t>(std::floor(ratios.train * static_cast<double>(n)));
  const std::size_t n_dev =
      static_cast<std::size_t>(std::floor(ratios.dev * static_cast<double>(n)));

  DatasetSplits out;
  auto take = [&](std::size_t from, std::size_t count, const char* tag) {
    Dataset part;
    part.num_types = ds.num_types;
    part.name = ds.name.empty() ? tag : ds.name + "/" + tag;
    for (std::size_t k = from; k < from + count; ++k) {
      part.sequences.push_back(ds.sequences[order[k]]);
    }
    return part;
  };
  out.train = take(0, n_train, "train");
  out.dev = take(n_train, n_dev, "dev");
  out.test = take(n_train + n_dev, n - n_train - n_dev, "test");
  return out;
}

}  // namespace tahp
