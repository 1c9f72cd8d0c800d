#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "opal/common.hpp"

namespace opal::harness {

struct FuzzConfig {
  std::size_t bucket_trials = 10000;
  std::size_t record_trials = 10000;
  std::size_t checkpoint_trials = 10000;
  std::size_t rollback_trials = 50;
  int L = 6;
  std::size_t items = 120;
  std::size_t checkpoint_pad = 128u << 10;
  std::uint64_t seed = 1;
};

struct FuzzCount {
  std::size_t trials = 0;
  std::size_t detected = 0;
  std::map<Errc, std::size_t> codes;
  double rate() const { return trials ? static_cast<double>(detected) / static_cast<double>(trials) : 0.0; }
};

struct FuzzReport {
  FuzzCount bucket;      // single-bit flips in stored buckets
  FuzzCount record;      // single-bit flips in the encoded rollback record
  FuzzCount checkpoint;  // single-bit flips in the sealed checkpoint
  FuzzCount stale;       // restores from an older checkpoint, record or storage image
  FuzzCount replay;      // requests with a non-increasing counter
};

FuzzCount fuzz_buckets(const FuzzConfig& cfg);
FuzzCount fuzz_records(const FuzzConfig& cfg);
FuzzCount fuzz_checkpoints(const FuzzConfig& cfg);
// Fills stale and replay.
void fuzz_rollback(const FuzzConfig& cfg, FuzzCount& stale, FuzzCount& replay);

FuzzReport run_fuzz(const FuzzConfig& cfg);
std::string fuzz_summary(const FuzzReport& r);

}  // namespace opal::harness
