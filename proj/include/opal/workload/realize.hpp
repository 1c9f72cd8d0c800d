#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "opal/kg.hpp"
#include "opal/workload/hawkes.hpp"

namespace opal::workload {

// Anchor person plus a layered contact graph: a close circle and a
// regular-contact layer. Contact first names are unique.
struct Persona {
  std::string owner;
  std::vector<std::string> close;
  std::vector<std::string> regular;
  std::vector<std::string> projects;

  std::vector<std::string> roster() const;  // contacts, owner excluded
};

Persona make_persona(std::uint64_t seed, int close = 5, int regular = 15, int projects = 6);

// A templated storyline: one project, a few people and a distinctive token set
// shared by every event realized inside it.
struct Scenario {
  int id = 0;
  std::string tag;
  std::string project;
  std::vector<std::string> people;
  std::vector<std::string> tokens;
  Hours start = 0;
  Hours end = 0;
  bool active(Hours t) const { return start <= t && t < end; }
};

std::vector<Scenario> make_scenarios(const Persona& p, Hours horizon, std::uint64_t seed);

struct RealizeConfig {
  double email_noise = 0.6;
  double document_noise = 0.7;
  double message_noise = 0.5;
  double ambient_noise = 1.0;
  std::size_t chunk_words = 50;
  std::size_t chunk_stride = 40;  // 10-word overlap
  int words_per_minute = 100;
  int meeting_min_minutes = 5;
  int meeting_max_minutes = 20;
};

struct Artifact {
  std::uint64_t event_id = 0;
  std::string artifact_id;
  Modality modality = Modality::Email;
  Hours t = 0;
  std::int64_t timestamp = 0;
  std::optional<std::uint64_t> parent_event;
  std::optional<std::string> parent_artifact;
  std::vector<std::string> participants;
  std::optional<std::string> project;
  std::optional<int> scenario;
  bool noise = false;
  std::vector<std::string> unique_tokens;
  std::vector<std::string> topic_tokens;  // the scenario's shared tokens
  std::string text;
  std::vector<ItemId> chunk_ids;
};

std::vector<std::string> split_words(std::string_view text);
// Sliding window of `window` words advancing by `stride`; a short text is one chunk.
std::vector<std::string> chunk_text(std::string_view text, std::size_t window = 50, std::size_t stride = 40);
std::size_t chunk_count(std::size_t words, std::size_t window = 50, std::size_t stride = 40);

// Pronounceable pseudo-words; never collide with the filler vocabularies.
std::string pseudo_word(std::mt19937_64& rng);

class Realizer {
 public:
  Realizer(const Persona& persona, const std::vector<Scenario>& scenarios, RealizeConfig cfg, std::uint64_t seed);

  // parent: the realized artifact of the event's parent, if any.
  Artifact realize(const HawkesEvent& e, const Artifact* parent);
  const RealizeConfig& config() const { return cfg_; }

 private:
  std::size_t target_words(Modality m);
  double noise_fraction(Modality m) const;

  const Persona& persona_;
  const std::vector<Scenario>& scenarios_;
  RealizeConfig cfg_;
  std::mt19937_64 rng_;
};

}  // namespace opal::workload
