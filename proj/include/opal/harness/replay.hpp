#pragma once

#include <cstdint>
#include <ostream>
#include <vector>

#include "opal/controller.hpp"
#include "opal/workload/corpus.hpp"

namespace opal::harness {

struct ReplayConfig {
  double days = 28;
  std::uint64_t seed = 7;
  std::size_t n_target = 8192;
  int L = 0;  // 0: smallest depth with 4 * 2^L >= n_target
  double c = 1.0;
  bool dreaming = true;
  bool eager_shadow = true;         // run the eager baseline alongside
  std::size_t sample_every = 500;   // ticks between timeline samples
  std::size_t probe_every = 1000;   // raw ingests between recall probes
  std::size_t probe_queries = 20;
  std::size_t recall_k = 10;
};

struct TimelineSample {
  LogicalTime tick = 0;
  std::size_t live = 0;
  std::size_t summaries = 0;
  std::size_t stash = 0;
  std::size_t pending = 0;
};

struct RecallProbe {
  LogicalTime tick = 0;
  double sleepy = 0;
  double eager = 0;
};

struct ReplayReport {
  double w = 0;
  std::uint64_t ttl = 0;
  double lifetime_target = 0;  // n_target / (w c)
  LogicalTime ticks = 0;
  std::size_t chunks = 0;
  std::size_t queries = 0;

  std::vector<TimelineSample> timeline;
  double steady_live = 0;  // mean live after the warm-up cut
  LogicalTime steady_from = 0;
  std::size_t stash_max = 0;

  std::size_t expired = 0;
  double lifetime_mean = 0;
  double lifetime_std = 0;

  std::vector<RecallProbe> probes;
  double recall_sleepy = 0;
  double recall_eager = 0;
  std::uint64_t resolved = 0;
  std::uint64_t resolved_changed = 0;
  double change_fraction = 0;

  double summary_store_share = 0;  // summaries / live at the end
  double summary_topk_share = 0;   // summaries among returned top-K
};

int replay_depth(const ReplayConfig& cfg);
ControllerConfig replay_controller_config(const ReplayConfig& cfg, double w);
ReplayReport run_replay(const ReplayConfig& cfg, const workload::Corpus& corpus);
ReplayReport run_replay(const ReplayConfig& cfg);

void write_timeline_csv(const ReplayReport& r, std::ostream& out);
void write_recall_csv(const ReplayReport& r, std::ostream& out);

}  // namespace opal::harness
