#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

#include "opal/controller.hpp"
#include "opal/workload/corpus.hpp"

namespace opal::harness {

std::unique_ptr<TestEnclaves> make_enclaves(const workload::Corpus& c, int dim = 64);
IngestRequest make_ingest(const workload::Corpus& c, const workload::ChunkRecord& chunk);

struct LinearFit {
  double slope = 0;
  double intercept = 0;
  double r2 = 0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware).
void parallel_for(std::size_t n, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace opal::harness
