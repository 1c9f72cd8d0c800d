#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "opal/kg.hpp"
#include "opal/workload/realize.hpp"

namespace opal::workload {

// w(t) = C1 e^(-nu t) + C2 (t + 1)^(-delta), t in days.
struct RecencyWeights {
  double C1 = 1.45;
  double nu = 0.20;
  double C2 = 1.0;
  double delta = 0.68;
  double operator()(double age_days) const;
};

enum class QuestionCategory : std::uint8_t { SingleFact, KnowledgeUpdate, MultiHop, Temporal, Modality, Person, Project };
inline constexpr int kNumCategories = 7;
const char* category_name(QuestionCategory c);
QuestionCategory parse_category(std::string_view s);

struct Question {
  std::string text;
  QuestionCategory category = QuestionCategory::SingleFact;
  FilterSet filters;  // what an exact extractor returns for text
  std::string target_artifact;
  std::vector<ItemId> gt_chunks;
  std::int64_t asked_at = 0;
};

// Index into ages drawn with probability proportional to w(age). Throws
// EmptyCorpus when ages is empty.
std::size_t sample_by_recency(const std::vector<double>& ages_days, const RecencyWeights& w, std::mt19937_64& rng);

// Draws a target among artifacts strictly before t_now (storyline artifacts
// preferred, noise only when there are none) and templates a question whose
// predicates hold for the target. Throws EmptyCorpus.
Question sample_question(const std::vector<Artifact>& artifacts, Hours t_now, QuestionCategory category,
                         std::mt19937_64& rng, const RecencyWeights& w = {});

}  // namespace opal::workload
