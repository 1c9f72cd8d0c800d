#include "opal/enclaves.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <unordered_set>

namespace opal {

namespace {

constexpr std::int64_t kDay = 86400;

std::uint64_t fnv1a(std::string_view s, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // Final avalanche so low bits are usable as an index.
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdULL;
  h ^= h >> 33;
  return h;
}

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> s = {
      "a",    "an",   "the",  "and",  "or",   "of",   "to",    "in",    "on",   "for",  "with", "at",  "by",
      "is",   "was",  "are",  "were", "be",   "it",   "this",  "that",  "what", "did",  "do",   "does", "we",
      "i",    "you",  "he",   "she",  "they", "about", "from", "as",    "our",  "my",   "your", "me",  "us",
      "which", "who", "when", "where", "how", "any",  "there", "their", "has",  "have", "had",
      // question scaffolding
      "say",  "said", "find", "came", "out",  "around", "happened", "followed", "decided", "latest", "status",
      "stand", "things", "project", "anything", "new"};
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool has_word(const std::vector<std::string>& words, std::string_view w) {
  return std::find(words.begin(), words.end(), w) != words.end();
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    unsigned char c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '-') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

ann::Vec HashingEmbedder::embed(std::string_view text) const {
  ann::Vec v = ann::Vec::Zero(dim_);
  for (const auto& tok : tokenize(text)) {
    if (stopwords().contains(tok)) continue;
    std::uint64_t h = fnv1a(tok, seed_);
    v(static_cast<Eigen::Index>(h % static_cast<std::uint64_t>(dim_))) += (h >> 63) ? 1.0f : -1.0f;
  }
  float n = v.norm();
  if (n > 0) v /= n;
  return v;
}

std::int64_t parse_iso_date(std::string_view s) {
  int y = 0;
  unsigned m = 0, d = 0;
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return -1;
  std::string buf(s);
  if (std::sscanf(buf.c_str(), "%4d-%2u-%2u", &y, &m, &d) != 3) return -1;
  std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
  if (!ymd.ok()) return -1;
  return std::chrono::sys_days(ymd).time_since_epoch().count() * kDay;
}

std::string format_iso_date(std::int64_t epoch_seconds) {
  std::int64_t days = epoch_seconds >= 0 ? epoch_seconds / kDay : -((-epoch_seconds + kDay - 1) / kDay);
  std::chrono::year_month_day ymd{std::chrono::sys_days{std::chrono::days{days}}};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

FilterSet RuleExtractor::extract(std::string_view query, std::int64_t now) const {
  FilterSet f;
  const std::string q = lower(query);
  const auto words = tokenize(query);

  bool low_person = false;
  for (const auto& name : roster_) {
    const std::string full = lower(name);
    if (q.find(full) != std::string::npos) {
      f.persons.insert(canonical_person(name));
      continue;
    }
    auto sp = full.find(' ');
    if (sp != std::string::npos && has_word(words, full.substr(0, sp))) {
      f.persons.insert(canonical_person(name));
      low_person = true;
    }
  }
  if (low_person) f.person_conf = Confidence::Low;

  for (std::size_t i = 0; i + 1 < words.size(); ++i) {
    if (words[i] != "project") continue;
    for (const auto& p : projects_) {
      if (lower(p) == words[i + 1]) f.project = p;
    }
    if (f.project) break;
  }

  static const std::vector<std::pair<std::string_view, Modality>> kw = {
      {"email", Modality::Email},       {"emails", Modality::Email},       {"meeting", Modality::Meeting},
      {"meetings", Modality::Meeting},  {"document", Modality::Document},  {"documents", Modality::Document},
      {"doc", Modality::Document},      {"message", Modality::Message},    {"messages", Modality::Message},
      {"chat", Modality::Message},      {"ambient", Modality::Ambient}};
  for (const auto& w : words) {
    for (const auto& [k, m] : kw) {
      if (w == k && !f.modality) f.modality = m;
    }
  }

  for (std::size_t i = 0; i < words.size(); ++i) {
    std::int64_t d = parse_iso_date(words[i]);
    if (d < 0) continue;
    bool week = i >= 2 && words[i - 1] == "of" && words[i - 2] == "week";
    f.temporal = TimeRange{d, d + (week ? 7 : 1) * kDay - 1};
    break;
  }
  if (!f.temporal) {
    const std::int64_t day0 = now - ((now % kDay) + kDay) % kDay;
    if (q.find("yesterday") != std::string::npos) {
      f.temporal = TimeRange{day0 - kDay, day0 - 1};
    } else if (q.find("today") != std::string::npos) {
      f.temporal = TimeRange{day0, now};
    } else if (q.find("last week") != std::string::npos) {
      f.temporal = TimeRange{now - 7 * kDay, now};
    } else if (q.find("last month") != std::string::npos) {
      f.temporal = TimeRange{now - 30 * kDay, now};
    }
    if (f.temporal) f.temporal_conf = Confidence::Low;
  }
  return f;
}

std::string TestEnclaves::synthesize(std::string_view, const std::vector<std::pair<ItemId, std::string>>& chunks) {
  if (chunks.empty()) return std::string(kNoMemory);
  std::string out;
  for (const auto& [id, text] : chunks) {
    out += '[' + std::to_string(id) + "] " + text + '\n';
  }
  return out;
}

std::string TestEnclaves::summarize(const std::vector<std::string>& chunks) {
  std::string out = "summary:";
  std::size_t n = 0;
  // Round-robin over inputs so every chunk contributes its leading words.
  std::vector<std::vector<std::string>> toks;
  for (const auto& c : chunks) {
    std::vector<std::string> t;
    std::string cur;
    for (char ch : c) {
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!cur.empty()) t.push_back(std::move(cur));
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
    if (!cur.empty()) t.push_back(std::move(cur));
    toks.push_back(std::move(t));
  }
  const std::size_t per = chunks.empty() ? 0 : std::max<std::size_t>(1, summary_words_ / chunks.size());
  for (const auto& t : toks) {
    for (std::size_t i = 0; i < t.size() && i < per && n < summary_words_; ++i, ++n) out += ' ' + t[i];
  }
  return out;
}

}  // namespace opal
