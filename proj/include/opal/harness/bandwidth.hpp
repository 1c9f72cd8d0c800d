#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "opal/controller.hpp"
#include "opal/harness/common.hpp"

namespace opal::harness {

struct BandwidthConfig {
  int min_log = 8;
  int max_log = 14;
  std::size_t queries = 20;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct BandwidthRow {
  std::size_t N = 0;
  int L = 0;
  StoreKind store = StoreKind::Oram;
  double per_query_bytes = 0;   // mean over queries, all storage traffic
  double per_ingest_bytes = 0;  // mean over the fill phase
};

struct BandwidthReport {
  std::vector<BandwidthRow> rows;
  LinearFit opal_log;       // bytes ~ a log2 N + b
  LinearFit inmemory_lin;   // bytes ~ a N + b
  LinearFit plaintext_lin;
  double ratio_at_max = 0;  // InMemory / Opal at the largest N
};

const char* store_name(StoreKind s);

// Fills a store with N chunks, then averages storage bytes per query.
BandwidthRow measure_bandwidth(StoreKind store, int log_n, std::size_t queries, std::uint64_t seed);
BandwidthReport run_bandwidth(const BandwidthConfig& cfg);
void write_bandwidth_csv(const BandwidthReport& r, std::ostream& out);

}  // namespace opal::harness
