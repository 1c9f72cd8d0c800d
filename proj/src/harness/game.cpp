#include "opal/harness/game.hpp"

#include <random>

#include "opal/harness/common.hpp"

namespace opal::harness {

namespace {

const std::vector<std::string> kWords = {
    "budget", "roadmap", "hiring",  "launch", "invoice", "travel",  "design", "review",   "vendor", "offsite",
    "demo",   "metrics", "release", "audit",  "contract", "pricing", "draft", "forecast", "client", "support",
    "lunch",  "gym",     "flight",  "hotel",  "dentist", "recipe",  "garden", "concert",  "soccer", "piano"};

std::string random_text(std::mt19937_64& rng, int lo, int hi) {
  const int n = std::uniform_int_distribution<int>(lo, hi)(rng);
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (!s.empty()) s += ' ';
    s += kWords[rng() % kWords.size()];
  }
  return s;
}

constexpr std::int64_t kStart = 1736121600;

}  // namespace

std::vector<std::string> game_roster() {
  return {"ana ruiz", "ben cho", "carla diaz", "dev patel", "eli stone", "fay lin"};
}
std::vector<std::string> game_projects() { return {"atlas", "borealis", "cobalt"}; }

ControllerConfig game_controller_config(const GameConfig& cfg) {
  ControllerConfig c;
  c.pub = PublicParams{cfg.n, cfg.K, cfg.T, cfg.L, 4};
  c.retention = RetentionConfig{cfg.n_target, 0.6, 1.0, static_cast<int>(cfg.K)};
  c.ivf.n_target = cfg.n_target;
  c.dreaming = cfg.dreaming;
  return c;
}

std::pair<GameWorld, GameWorld> adversary_worlds(const GameConfig& cfg, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto roster = game_roster();
  const auto projects = game_projects();
  GameWorld w[2];
  std::int64_t now[2] = {kStart, kStart};
  ItemId next[2] = {1, 1};

  auto ingest = [&](int b) {
    IngestRequest r;
    r.text = random_text(rng, 5, 60);
    r.meta.chunk_id = next[b]++;
    r.meta.artifact_id = "w" + std::to_string(b) + "-" + std::to_string(r.meta.chunk_id);
    const Modality mods[] = {Modality::Email, Modality::Meeting, Modality::Document, Modality::Message,
                             Modality::Ambient};
    r.meta.modality = mods[rng() % 5];
    now[b] += static_cast<std::int64_t>(rng() % 7200);
    r.meta.timestamp = now[b];
    r.meta.participants = {roster[rng() % roster.size()]};
    if (rng() % 2) r.meta.project = projects[rng() % projects.size()];
    return r;
  };
  auto query = [&](int b) {
    QueryRequest q;
    q.text = random_text(rng, 2, 8);
    switch (rng() % 4) {
      case 0: q.text += " with " + roster[rng() % roster.size()]; break;
      case 1: q.text += " in project " + projects[rng() % projects.size()]; break;
      case 2: q.text += " email"; break;
      default: break;
    }
    q.timestamp = now[b];
    return q;
  };

  for (int b = 0; b < 2; ++b) {
    for (std::size_t i = 0; i < cfg.dataset_size; ++i) w[b].dataset.push_back(ingest(b));
  }
  std::bernoulli_distribution is_query(cfg.query_fraction);
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    const OpType t = is_query(rng) ? OpType::Query : OpType::Ingest;
    for (int b = 0; b < 2; ++b) {
      GameOp op;
      op.type = t;
      if (t == OpType::Query) op.query = query(b);
      else op.ingest = ingest(b);
      w[b].script.push_back(std::move(op));
    }
  }
  return {std::move(w[0]), std::move(w[1])};
}

std::vector<TraceEvent> run_world(const GameConfig& cfg, const GameWorld& w, std::uint64_t seed) {
  TraceRecorder trace;
  ControllerConfig cc = game_controller_config(cfg);
  cc.seed = seed;
  auto enclaves = std::make_unique<TestEnclaves>(cc.ivf.dim, RuleExtractor(game_roster(), game_projects()));
  Controller ctl(cc, std::move(enclaves), &trace, crypto::ClientSecret::from_seed(seed));
  std::uint64_t ctr = 0;
  for (const auto& d : w.dataset) ctl.ingest(d, ++ctr);
  for (const auto& op : w.script) {
    if (op.type == OpType::Query) ctl.query(op.query, ++ctr);
    else ctl.ingest(op.ingest, ++ctr);
  }
  return trace.events();
}

GameVerdict play(const GameConfig& cfg, const GameWorld& w0, const GameWorld& w1, std::uint64_t seed) {
  GameVerdict v;
  try {
    if (w0.dataset.size() != w1.dataset.size()) throw Error(Errc::ScriptRejected, "datasets differ in size");
    if (w0.script.size() != w1.script.size()) throw Error(Errc::ScriptRejected, "scripts differ in length");
    for (std::size_t i = 0; i < w0.script.size(); ++i) {
      if (w0.script[i].type != w1.script[i].type) {
        throw Error(Errc::ScriptRejected, "op types differ at step " + std::to_string(i));
      }
    }
  } catch (const Error& e) {
    v.rejected = true;
    v.detail = e.what();
    return v;
  }
  // Public randomness differs between the worlds as well.
  const auto t0 = run_world(cfg, w0, seed * 2 + 1);
  const auto t1 = run_world(cfg, w1, seed * 2 + 2);
  v.events = t0.size();
  v.divergence = first_divergence(t0, t1);
  v.equivalent = !v.divergence;
  if (v.divergence) v.detail = "first divergent event at index " + std::to_string(*v.divergence);
  return v;
}

GameVerdict run_security_game(const GameConfig& cfg, std::uint64_t seed) {
  auto [w0, w1] = adversary_worlds(cfg, seed);
  return play(cfg, w0, w1, seed);
}

GameSuite run_game_suite(const GameConfig& cfg, std::size_t pairs, std::uint64_t seed, unsigned threads) {
  GameSuite s;
  s.pairs = pairs;
  s.verdicts.resize(pairs);
  parallel_for(pairs, threads, [&](std::size_t i) { s.verdicts[i] = run_security_game(cfg, seed + i); });
  for (const auto& v : s.verdicts) {
    if (v.rejected) ++s.rejected;
    else if (v.equivalent) ++s.passed;
  }
  return s;
}

std::optional<std::size_t> dream_divergence(const GameConfig& cfg, std::uint64_t seed) {
  auto worlds = adversary_worlds(cfg, seed);
  GameConfig on = cfg, off = cfg;
  on.dreaming = true;
  off.dreaming = false;
  const auto a = run_world(on, worlds.first, seed);
  const auto b = run_world(off, worlds.first, seed);
  return first_divergence(a, b);
}

}  // namespace opal::harness
