#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tahp/errors.hpp"

namespace tahp {

struct Event {
  double t = 0.0;  // strictly positive timestamp
  int type = 0;    // event-type index in [0, num_types)
};

// Ordered (timestamp, type) pairs. A sequence used for training/evaluation
// must satisfy: strictly increasing timestamps, t1 > 0, every type below the
// declared type count, and length >= 2 (so at least one prediction target
// exists). Raw simulator output may be shorter; dataset assembly filters it.
struct EventSequence {
  std::vector<Event> events;

  std::size_t size() const { return events.size(); }
  bool empty() const { return events.empty(); }
  double time(std::size_t i) const { return events[i].t; }
  int type(std::size_t i) const { return events[i].type; }
  std::vector<double> times() const;
  std::vector<int> types() const;
};

// Throws ValidationError naming the problem (and the 1-based line when
// line_no > 0, for loader diagnostics).
void validate_sequence(const EventSequence& seq, int num_types, long line_no = 0);

struct Dataset {
  std::vector<EventSequence> sequences;
  int num_types = 0;
  std::string name;

  std::size_t size() const { return sequences.size(); }
  std::size_t total_events() const;
  void validate() const;
};

// JSON Lines format: a header line {"num_types":C[,"name":...]} followed by
// one {"events":[{"t":...,"c":...},...]} object per sequence. UTF-8, '\n'
// separators, extension .jsonl.
Dataset load_jsonl(const std::string& path);
void save_jsonl(const Dataset& ds, const std::string& path);

struct SplitRatios {
  double train = 0.6;
  double dev = 0.2;
  double test = 0.2;
};

struct DatasetSplits {
  Dataset train, dev, test;
};

// Seeded Fisher-Yates shuffle followed by a contiguous partition. Train and
// dev sizes are floor(ratio * N); the remainder goes to test.
DatasetSplits split(const Dataset& ds, SplitRatios ratios, std::uint64_t seed);

}  // namespace tahp
