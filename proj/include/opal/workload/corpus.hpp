#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "opal/workload/hawkes.hpp"
#include "opal/workload/questions.hpp"
#include "opal/workload/realize.hpp"

namespace opal::workload {

struct CorpusConfig {
  double days = 30;
  std::uint64_t seed = 7;
  int close = 5;
  int regular = 15;
  int projects = 6;
  RealizeConfig realize;
  HawkesConfig hawkes = HawkesConfig::defaults();
};

struct ChunkRecord {
  ItemId id = 0;
  std::size_t artifact = 0;  // index into Corpus::artifacts
  std::string text;
};

struct QueryRecord {
  std::uint64_t event_id = 0;
  Hours t = 0;
  std::int64_t timestamp = 0;
  std::string text;
  std::optional<Question> qa;
};

// One logical request in replay order: a chunk ingest or a query.
struct Op {
  enum class Kind : std::uint8_t { Ingest, Query } kind = Kind::Ingest;
  std::size_t index = 0;  // into chunks or queries
};

struct Corpus {
  Persona persona;
  std::vector<Scenario> scenarios;
  std::vector<Artifact> artifacts;
  std::vector<ChunkRecord> chunks;
  std::vector<QueryRecord> queries;
  std::vector<Op> ops;

  ChunkMeta meta_of(const ChunkRecord& c) const;
  // Fraction of logical ticks that are ingests when every T-th raw ingest
  // adds one summary ingest.
  double write_ratio(std::size_t T) const;
};

Corpus generate_corpus(const CorpusConfig& cfg);

// corpus.jsonl: one object per line. "persona", then "scenario" lines, then
// events in time order: "artifact" (with its chunks) or "query".
// qa.jsonl: one object per query that carries a question.
void write_corpus(const Corpus& c, const std::filesystem::path& dir);
Corpus read_corpus(const std::filesystem::path& dir);

std::string filters_to_json(const FilterSet& f);

}  // namespace opal::workload
