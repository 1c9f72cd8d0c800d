#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "opal/ann/ivf.hpp"
#include "opal/kg.hpp"

namespace opal {

// The three enclave roles behind one interface. Production backends (a real
// embedding model, an LLM) plug in here; calls are padded by the controller.
class EnclaveInterface {
 public:
  virtual ~EnclaveInterface() = default;
  virtual int dim() const = 0;
  virtual ann::Vec embed(std::string_view text) = 0;
  virtual FilterSet traverse(std::string_view query, std::int64_t now) = 0;
  virtual std::string synthesize(std::string_view query, const std::vector<std::pair<ItemId, std::string>>& chunks) = 0;
  virtual std::string summarize(const std::vector<std::string>& chunks) = 0;
};

std::vector<std::string> tokenize(std::string_view text);

// Signed feature hashing of word tokens, L2-normalized.
class HashingEmbedder {
 public:
  explicit HashingEmbedder(int dim = 64, std::uint64_t seed = 0x9e3779b97f4a7c15ULL) : dim_(dim), seed_(seed) {}
  ann::Vec embed(std::string_view text) const;
  int dim() const { return dim_; }

 private:
  int dim_;
  std::uint64_t seed_;
};

// Deterministic predicate extraction from query text:
//   full roster names            -> person (High); first name only -> person (Low)
//   "project <name>"             -> project (High)
//   email/meeting/document/message/chat/ambient keywords -> modality (High)
//   "on YYYY-MM-DD"              -> that day (High)
//   "week of YYYY-MM-DD"         -> 7 days from that date (High)
//   "today"/"yesterday"/"last week"/"last month" -> window ending at now (Low)
class RuleExtractor {
 public:
  RuleExtractor() = default;
  RuleExtractor(std::vector<std::string> roster, std::vector<std::string> projects)
      : roster_(std::move(roster)), projects_(std::move(projects)) {}
  FilterSet extract(std::string_view query, std::int64_t now) const;

 private:
  std::vector<std::string> roster_;
  std::vector<std::string> projects_;
};

class TestEnclaves final : public EnclaveInterface {
 public:
  TestEnclaves(int dim = 64, RuleExtractor extractor = {}, std::size_t summary_words = 50,
               std::uint64_t seed = 0x9e3779b97f4a7c15ULL)
      : embedder_(dim, seed), extractor_(std::move(extractor)), summary_words_(summary_words) {}

  int dim() const override { return embedder_.dim(); }
  ann::Vec embed(std::string_view text) override { return embedder_.embed(text); }
  FilterSet traverse(std::string_view query, std::int64_t now) override { return extractor_.extract(query, now); }
  std::string synthesize(std::string_view query, const std::vector<std::pair<ItemId, std::string>>& chunks) override;
  std::string summarize(const std::vector<std::string>& chunks) override;

  static constexpr std::string_view kNoMemory = "no memory";

 private:
  HashingEmbedder embedder_;
  RuleExtractor extractor_;
  std::size_t summary_words_;
};

std::int64_t parse_iso_date(std::string_view s);  // YYYY-MM-DD -> epoch seconds at 00:00 UTC, or -1
std::string format_iso_date(std::int64_t epoch_seconds);

}  // namespace opal
