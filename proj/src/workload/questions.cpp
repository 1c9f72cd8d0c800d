#include "opal/workload/questions.hpp"

#include <cmath>

#include "opal/enclaves.hpp"

namespace opal::workload {

double RecencyWeights::operator()(double t) const { return C1 * std::exp(-nu * t) + C2 * std::pow(t + 1.0, -delta); }

const char* category_name(QuestionCategory c) {
  switch (c) {
    case QuestionCategory::SingleFact: return "single-fact";
    case QuestionCategory::KnowledgeUpdate: return "knowledge-update";
    case QuestionCategory::MultiHop: return "multi-hop";
    case QuestionCategory::Temporal: return "temporal";
    case QuestionCategory::Modality: return "modality";
    case QuestionCategory::Person: return "person";
    case QuestionCategory::Project: return "project";
  }
  return "?";
}

QuestionCategory parse_category(std::string_view s) {
  for (int i = 0; i < kNumCategories; ++i) {
    auto c = static_cast<QuestionCategory>(i);
    if (s == category_name(c)) return c;
  }
  throw Error(Errc::MalformedMetadata, "unknown question category '" + std::string(s) + "'");
}

std::size_t sample_by_recency(const std::vector<double>& ages, const RecencyWeights& w, std::mt19937_64& rng) {
  if (ages.empty()) throw Error(Errc::EmptyCorpus, "nothing to sample from");
  std::vector<double> weights;
  weights.reserve(ages.size());
  for (double a : ages) weights.push_back(w(std::max(0.0, a)));
  std::discrete_distribution<std::size_t> d(weights.begin(), weights.end());
  return d(rng);
}

namespace {

const char* modality_word(Modality m) {
  switch (m) {
    case Modality::Email: return "email";
    case Modality::Meeting: return "meeting";
    case Modality::Document: return "document";
    case Modality::Message: return "message";
    case Modality::Ambient: return "ambient";
    case Modality::Query: return "query";
  }
  return "";
}

}  // namespace

Question sample_question(const std::vector<Artifact>& artifacts, Hours t_now, QuestionCategory category,
                         std::mt19937_64& rng, const RecencyWeights& w) {
  std::vector<const Artifact*> pool;
  std::vector<const Artifact*> noise;
  for (const auto& a : artifacts) {
    if (a.t >= t_now || a.modality == Modality::Query || a.chunk_ids.empty()) continue;
    (a.noise ? noise : pool).push_back(&a);
  }
  if (pool.empty()) pool = std::move(noise);
  if (pool.empty()) throw Error(Errc::EmptyCorpus, "no artifact before the question time");
  std::vector<double> ages;
  ages.reserve(pool.size());
  for (const auto* a : pool) ages.push_back((t_now - a->t) / 24.0);
  const Artifact& a = *pool[sample_by_recency(ages, w, rng)];

  Question q;
  q.category = category;
  q.target_artifact = a.artifact_id;
  q.gt_chunks = a.chunk_ids;
  q.asked_at = to_epoch(t_now);
  std::string about;
  for (const auto& t : a.unique_tokens) about += (about.empty() ? "" : " ") + t;
  const std::string person = a.participants.empty() ? std::string() : a.participants.front();

  switch (category) {
    case QuestionCategory::SingleFact:
      q.text = "what was decided about " + about;
      break;
    case QuestionCategory::KnowledgeUpdate:
      q.text = "what is the latest status of " + about;
      break;
    case QuestionCategory::MultiHop:
      if (a.project && !person.empty()) {
        q.text = "what came out of project " + *a.project + " with " + person + " around " + about;
        q.filters.project = a.project;
        q.filters.persons.insert(canonical_person(person));
      } else {
        q.text = "what followed from " + about;
      }
      break;
    case QuestionCategory::Temporal: {
      const std::string day = format_iso_date(a.timestamp);
      const std::int64_t d0 = parse_iso_date(day);
      q.text = "what happened on " + day + " about " + about;
      q.filters.temporal = TimeRange{d0, d0 + 86400 - 1};
      break;
    }
    case QuestionCategory::Modality:
      q.text = std::string("find the ") + modality_word(a.modality) + " about " + about;
      q.filters.modality = a.modality;
      break;
    case QuestionCategory::Person:
      if (!person.empty()) {
        q.text = "what did " + person + " say about " + about;
        q.filters.persons.insert(canonical_person(person));
      } else {
        q.text = "what was said about " + about;
      }
      break;
    case QuestionCategory::Project:
      if (a.project) {
        q.text = "where does project " + *a.project + " stand on " + about;
        q.filters.project = a.project;
      } else {
        q.text = "where do things stand on " + about;
      }
      break;
  }
  return q;
}

}  // namespace opal::workload
