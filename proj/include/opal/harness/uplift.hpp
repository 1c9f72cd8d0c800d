#pragma once

#include <array>
#include <cstdint>
#include <ostream>

#include "opal/workload/corpus.hpp"

namespace opal::harness {

struct UpliftConfig {
  double days = 20;
  std::uint64_t seed = 11;
  std::size_t questions = 500;
  unsigned threads = 1;
};

struct CategoryRates {
  std::size_t asked = 0;
  std::size_t kg_hits = 0;
  std::size_t ann_hits = 0;
};

struct UpliftReport {
  std::size_t questions = 0;
  double kg_rate = 0;   // some ground-truth chunk in the KG-filtered top-K
  double ann_rate = 0;  // same, ANN-only
  double uplift_pp = 0;
  double soundness = 0;         // admissible set contains every ground-truth chunk
  double extractor_exact = 0;   // extracted predicates equal the templated ones
  std::array<CategoryRates, workload::kNumCategories> by_category{};
};

UpliftReport run_uplift(const UpliftConfig& cfg, const workload::Corpus& corpus);
UpliftReport run_uplift(const UpliftConfig& cfg);
void write_uplift_csv(const UpliftReport& r, std::ostream& out);

}  // namespace opal::harness
