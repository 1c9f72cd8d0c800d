#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "opal/common.hpp"

namespace opal {

enum class Modality : std::uint8_t { Email = 0, Meeting, Document, Query, Message, Ambient };
inline constexpr int kNumModalities = 6;
const char* modality_name(Modality m);
std::optional<Modality> parse_modality(std::string_view s);

enum class Confidence : std::uint8_t { High = 0, Low = 1 };

struct TimeRange {
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  bool contains(std::int64_t t) const { return lo <= t && t <= hi; }
  bool operator==(const TimeRange&) const = default;
};

struct FilterSet {
  std::optional<TimeRange> temporal;
  std::set<std::string> persons;  // canonical ids
  std::optional<Modality> modality;
  std::optional<std::string> project;
  Confidence temporal_conf = Confidence::High;
  Confidence person_conf = Confidence::High;
  Confidence modality_conf = Confidence::High;
  Confidence project_conf = Confidence::High;

  bool empty() const { return !temporal && persons.empty() && !modality && !project; }
  bool operator==(const FilterSet&) const = default;
};

std::string canonical_person(std::string_view name);

// Metadata for one ingested chunk. No content text.
struct ChunkMeta {
  ItemId chunk_id = 0;
  std::string artifact_id;
  Modality modality = Modality::Email;
  std::int64_t timestamp = 0;
  std::vector<std::string> participants;
  std::optional<std::string> project;
  std::vector<std::string> source_links;  // artifact ids
  bool summary = false;
  std::vector<ItemId> summarized;  // for summaries: covered chunk ids
};

struct TraverseResult {
  std::unordered_set<ItemId> admissible;
  int relaxation_level = 0;       // cascade steps applied
  std::size_t before_percolation = 0;
};

class KnowledgeGraph {
 public:
  void update(const ChunkMeta& meta);
  // Removes a chunk or summary; prunes artifacts left without chunks.
  void remove(ItemId chunk_id);

  TraverseResult traverse(const FilterSet& filters, std::size_t min_candidates) const;
  // Candidate set at each cascade level before percolation (for monotonicity checks).
  std::vector<std::size_t> cascade_sizes(const FilterSet& filters) const;
  std::unordered_set<ItemId> percolate(const std::unordered_set<ItemId>& set) const;
  std::vector<ItemId> recent(std::size_t window) const;

  bool contains(ItemId chunk_id) const { return chunk_artifact_.contains(chunk_id) || summaries_.contains(chunk_id); }
  bool is_summary(ItemId chunk_id) const { return summaries_.contains(chunk_id); }
  std::size_t artifact_count() const { return artifacts_.size(); }
  std::size_t chunk_count() const { return chunk_artifact_.size(); }
  std::size_t summary_count() const { return summaries_.size(); }
  std::size_t person_count() const { return persons_.size(); }
  std::size_t project_count() const { return projects_.size(); }
  std::size_t person_edges(const std::string& artifact_id) const;
  std::vector<ItemId> chunks_of(const std::string& artifact_id) const;
  std::optional<std::string> artifact_of(ItemId chunk_id) const;

  Bytes serialize() const;
  void deserialize(std::span<const std::uint8_t> bytes);
  std::string debug_json() const;

 private:
  struct Artifact {
    Modality modality = Modality::Email;
    std::int64_t timestamp = 0;
    std::set<std::string> persons;
    std::optional<std::string> project;
    std::set<ItemId> chunks;
    std::set<std::string> links;
  };
  struct State {
    std::optional<TimeRange> temporal;
    bool use_persons = false;
    bool use_modality = false;
    bool use_project = false;
  };
  bool matches(const Artifact& a, const FilterSet& f, const State& s) const;
  std::unordered_set<ItemId> evaluate(const FilterSet& f, const State& s, std::set<std::string>* admitted) const;
  std::vector<State> cascade(const FilterSet& f) const;
  void add_summary_and_chunks(const std::set<std::string>& artifacts, std::unordered_set<ItemId>& out) const;

  std::map<std::string, Artifact> artifacts_;
  std::unordered_map<ItemId, std::string> chunk_artifact_;
  std::unordered_map<ItemId, std::set<std::string>> summaries_;
  std::map<std::string, std::string> persons_;  // canonical -> display
  std::set<std::string> projects_;
  std::map<std::string, std::set<std::string>> links_;  // undirected, may reference absent artifacts
  std::deque<ItemId> recent_;  // raw chunks in ingest order
};

}  // namespace opal
