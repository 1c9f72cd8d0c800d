#include "opal/workload/realize.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace opal::workload {

namespace {

const std::vector<std::string> kFirst = {"dana", "miguel", "priya", "tomas", "ingrid", "kwame", "yuki",  "farah",
                                         "oskar", "leila", "bruno", "mei",   "nadia", "rafael", "sven", "amara",
                                         "hugo", "zara",  "felix", "noor",  "iris",  "jonas",  "tara", "emil"};
const std::vector<std::string> kLast = {"lee",    "okafor", "novak",  "brandt", "silva", "haas",  "iyer",  "moreau",
                                        "ferris", "duarte", "lindqvist", "abe", "kowal", "reyes", "varga", "holt"};
const std::vector<std::string> kProjects = {"atlas", "borealis", "cobalt", "dunmore", "ember",  "fjord",
                                            "granite", "helix", "juniper", "keystone", "lantern", "meridian"};

// Work filler. No modality keywords, no "project", no relative dates.
const std::vector<std::string> kFiller = {
    "update",    "review",   "plan",      "budget",  "timeline", "draft",    "notes",    "team",     "client",
    "schedule",  "risk",     "owner",     "next",    "steps",    "agreed",   "pending",  "numbers",  "forecast",
    "feedback",  "launch",   "scope",     "deadline", "estimate", "vendor", "contract", "priority", "blocker",
    "design",    "metrics",  "rollout",   "summary", "decision", "approval", "follow",   "sync",     "question",
    "proposal",  "option",   "tradeoff",  "cost",    "quarter",  "target",   "baseline", "progress", "issue",
    "fix",       "release",  "milestone", "handoff", "support",  "customer", "demo",     "slides",   "outline",
    "checklist", "audit",    "hiring",    "offsite", "travel",   "invoice",  "report",   "analysis", "result",
    "compare",   "confirm",  "share",     "send",    "prepare",  "discuss",  "finalize", "align",    "revisit"};

const std::vector<std::string> kNoise = {
    "newsletter", "promo",   "sale",     "digest",   "weekly",   "offer",   "unsubscribe", "receipt", "shipping",
    "delivery",   "coupon",  "reminder", "account",  "password", "login",   "alert",       "webinar", "survey",
    "lunch",      "weather", "traffic",  "playlist", "recipe",   "gym",     "parking",     "coffee",  "podcast",
    "discount",   "renewal", "statement", "points",  "rewards",  "tickets", "booking",     "order",   "tracking"};

const std::vector<std::string> kGlue = {"the", "and", "with", "for", "on", "to", "of", "we", "about", "that"};

const std::vector<std::string> kOnset = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z"};
const std::vector<std::string> kVowel = {"a", "e", "i", "o", "u"};

template <class T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

}  // namespace

std::vector<std::string> Persona::roster() const {
  std::vector<std::string> r = close;
  r.insert(r.end(), regular.begin(), regular.end());
  return r;
}

Persona make_persona(std::uint64_t seed, int close, int regular, int projects) {
  if (close + regular > static_cast<int>(kFirst.size()) - 1) throw Error(Errc::ConfigInvalid, "too many contacts");
  if (projects > static_cast<int>(kProjects.size())) throw Error(Errc::ConfigInvalid, "too many projects");
  std::mt19937_64 rng(seed);
  std::vector<std::string> first = kFirst;
  std::shuffle(first.begin(), first.end(), rng);
  Persona p;
  std::size_t i = 0;
  auto name = [&] { return first[i++] + " " + pick(kLast, rng); };
  p.owner = name();
  for (int k = 0; k < close; ++k) p.close.push_back(name());
  for (int k = 0; k < regular; ++k) p.regular.push_back(name());
  std::vector<std::string> proj = kProjects;
  std::shuffle(proj.begin(), proj.end(), rng);
  p.projects.assign(proj.begin(), proj.begin() + projects);
  return p;
}

std::string pseudo_word(std::mt19937_64& rng) {
  std::string w;
  const int syl = std::uniform_int_distribution<int>(3, 4)(rng);
  for (int s = 0; s < syl; ++s) w += pick(kOnset, rng) + pick(kVowel, rng);
  return w;
}

std::vector<Scenario> make_scenarios(const Persona& p, Hours horizon, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5ce7a210ULL);
  std::set<std::string> used;
  auto fresh = [&] {
    for (;;) {
      std::string w = pseudo_word(rng);
      if (used.insert(w).second) return w;
    }
  };
  std::vector<Scenario> out;
  // Three storylines at the origin, then one every ~2 days, each 3-14 days long.
  Hours t = 0;
  int id = 0;
  while (t < horizon) {
    const int burst = id == 0 ? 3 : 1;
    for (int b = 0; b < burst; ++b) {
      Scenario s;
      s.id = id++;
      s.tag = "scenario-" + std::to_string(s.id);
      s.project = pick(p.projects, rng);
      const int n = std::uniform_int_distribution<int>(2, 4)(rng);
      std::set<std::string> people;
      while (static_cast<int>(people.size()) < n) {
        // 60% of draws come from the close circle.
        bool close = std::uniform_real_distribution<double>(0, 1)(rng) < 0.6;
        people.insert(close ? pick(p.close, rng) : pick(p.regular, rng));
      }
      s.people.assign(people.begin(), people.end());
      for (int k = 0; k < 4; ++k) s.tokens.push_back(fresh());
      s.start = t;
      s.end = t + 24.0 * std::uniform_real_distribution<double>(3.0, 14.0)(rng);
      out.push_back(std::move(s));
    }
    t += 24.0 * std::uniform_real_distribution<double>(1.0, 3.0)(rng);
  }
  return out;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

std::size_t chunk_count(std::size_t words, std::size_t window, std::size_t stride) {
  if (words <= window) return 1;
  return 1 + (words - window + stride - 1) / stride;
}

std::vector<std::string> chunk_text(std::string_view text, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) throw Error(Errc::ConfigInvalid, "chunk window and stride must be positive");
  const auto words = split_words(text);
  std::vector<std::string> out;
  const std::size_t n = chunk_count(words.size(), window, stride);
  for (std::size_t c = 0; c < n; ++c) {
    std::string s;
    const std::size_t lo = c * stride;
    const std::size_t hi = std::min(words.size(), lo + window);
    for (std::size_t i = lo; i < hi; ++i) {
      if (!s.empty()) s += ' ';
      s += words[i];
    }
    out.push_back(std::move(s));
  }
  return out;
}

Realizer::Realizer(const Persona& persona, const std::vector<Scenario>& scenarios, RealizeConfig cfg,
                   std::uint64_t seed)
    : persona_(persona), scenarios_(scenarios), cfg_(cfg), rng_(seed ^ 0x7ea112e5ULL) {}

double Realizer::noise_fraction(Modality m) const {
  switch (m) {
    case Modality::Email: return cfg_.email_noise;
    case Modality::Document: return cfg_.document_noise;
    case Modality::Message: return cfg_.message_noise;
    case Modality::Ambient: return cfg_.ambient_noise;
    default: return 0.0;
  }
}

std::size_t Realizer::target_words(Modality m) {
  auto u = [&](int lo, int hi) { return static_cast<std::size_t>(std::uniform_int_distribution<int>(lo, hi)(rng_)); };
  switch (m) {
    case Modality::Email: return u(60, 220);
    case Modality::Meeting: return static_cast<std::size_t>(cfg_.words_per_minute) *
                                   u(cfg_.meeting_min_minutes, cfg_.meeting_max_minutes);
    case Modality::Document: return u(250, 700);
    case Modality::Message: return u(8, 40);
    case Modality::Ambient: return u(15, 60);
    case Modality::Query: return 0;
  }
  return 0;
}

Artifact Realizer::realize(const HawkesEvent& e, const Artifact* parent) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Artifact a;
  a.event_id = e.id;
  a.artifact_id = "a" + std::to_string(e.id);
  a.modality = e.modality;
  a.t = e.t;
  a.timestamp = to_epoch(e.t);
  a.parent_event = e.parent;
  if (parent) a.parent_artifact = parent->artifact_id;

  // Scenario: inherited from a scenario parent, else drawn among active ones.
  const Scenario* sc = nullptr;
  if (unif(rng_) >= noise_fraction(e.modality)) {
    if (parent && parent->scenario) {
      sc = &scenarios_.at(*parent->scenario);
    } else {
      std::vector<const Scenario*> live;
      for (const auto& s : scenarios_) {
        if (s.active(e.t)) live.push_back(&s);
      }
      if (!live.empty()) sc = pick(live, rng_);
    }
  }
  a.noise = sc == nullptr;
  std::set<std::string> people;
  if (sc) {
    a.scenario = sc->id;
    a.project = sc->project;
    a.topic_tokens = sc->tokens;
    const int n = std::uniform_int_distribution<int>(1, static_cast<int>(sc->people.size()))(rng_);
    std::vector<std::string> ppl = sc->people;
    std::shuffle(ppl.begin(), ppl.end(), rng_);
    people.insert(ppl.begin(), ppl.begin() + n);
  } else {
    const auto roster = persona_.roster();
    people.insert(pick(roster, rng_));
  }
  a.participants.assign(people.begin(), people.end());
  for (int k = 0; k < 2; ++k) a.unique_tokens.push_back(pseudo_word(rng_) + std::to_string(e.id % 97));

  const std::size_t W = std::max<std::size_t>(target_words(e.modality), 8);
  std::vector<std::string> words;
  words.reserve(W + 16);
  const auto& vocab = sc ? kFiller : kNoise;
  // Ten-word template: function words as glue, then the artifact's own
  // tokens, a storyline token, a participant and two filler words.
  std::size_t stretch = 0;
  while (words.size() < W) {
    const std::size_t at = words.size() % 10;
    switch (at) {
      case 1:
      case 8: words.push_back(pick(vocab, rng_)); break;
      case 3:
      case 5: words.push_back(a.unique_tokens[(at / 5 + stretch) % a.unique_tokens.size()]); break;
      case 7:
        if (!a.participants.empty()) {
          const auto& who = a.participants[stretch % a.participants.size()];
          words.push_back(who.substr(0, who.find(' ')));
        } else {
          words.push_back(pick(vocab, rng_));
        }
        break;
      case 9:
        if (sc) words.push_back(sc->tokens[stretch % sc->tokens.size()]);
        else words.push_back(pick(vocab, rng_));
        ++stretch;
        break;
      default: words.push_back(pick(kGlue, rng_)); break;
    }
  }
  std::string text;
  for (const auto& w : words) {
    if (!text.empty()) text += ' ';
    text += w;
  }
  a.text = std::move(text);
  return a;
}

}  // namespace opal::workload
