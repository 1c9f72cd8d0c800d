#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>

#include "opal/harness/bandwidth.hpp"
#include "opal/harness/common.hpp"
#include "opal/harness/fuzz.hpp"
#include "opal/harness/game.hpp"
#include "opal/harness/replay.hpp"
#include "opal/harness/uplift.hpp"

using namespace opal;
using namespace opal::harness;

namespace {

GameConfig small_game() {
  GameConfig g;
  g.steps = 40;
  g.L = 7;
  g.n = 40;
  g.K = 5;
  g.T = 3;
  g.dataset_size = 16;
  g.n_target = 24;
  return g;
}

}  // namespace

TEST(Fit, ExactLine) {
  auto f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  EXPECT_NEAR(f.slope, 2, 1e-12);
  EXPECT_NEAR(f.intercept, 1, 1e-12);
  EXPECT_NEAR(f.r2, 1, 1e-12);
  EXPECT_NEAR(fit_line({1, 2, 3, 4}, {1, 4, 1, 4}).r2, 0.2, 1e-12);
}

TEST(ParallelFor, VisitsEachIndexOnce) {
  std::vector<std::atomic<int>> hit(100);
  parallel_for(100, 4, [&](std::size_t i) { hit[i]++; });
  for (auto& h : hit) EXPECT_EQ(h.load(), 1);
  EXPECT_THROW(parallel_for(10, 2, [](std::size_t i) {
                 if (i == 7) throw Error(Errc::Io, "x");
               }),
               Error);
}

TEST(Game, WorldsShareShapeButNotContent) {
  auto cfg = small_game();
  auto [w0, w1] = adversary_worlds(cfg, 3);
  ASSERT_EQ(w0.dataset.size(), cfg.dataset_size);
  ASSERT_EQ(w1.dataset.size(), cfg.dataset_size);
  ASSERT_EQ(w0.script.size(), cfg.steps);
  std::size_t same_text = 0;
  for (std::size_t i = 0; i < cfg.steps; ++i) {
    EXPECT_EQ(w0.script[i].type, w1.script[i].type);
    if (w0.script[i].type == OpType::Query) same_text += w0.script[i].query.text == w1.script[i].query.text;
  }
  EXPECT_EQ(same_text, 0u);
}

TEST(Game, EquivalentTracesAcrossWorlds) {
  auto cfg = small_game();
  for (std::uint64_t seed : {1, 2}) {
    auto v = run_security_game(cfg, seed);
    EXPECT_FALSE(v.rejected);
    EXPECT_TRUE(v.equivalent) << v.detail;
    EXPECT_GT(v.events, cfg.steps);
  }
}

TEST(Game, ChallengerRejectsUnequalShapes) {
  auto cfg = small_game();
  auto [w0, w1] = adversary_worlds(cfg, 4);
  auto shorter = w1;
  shorter.dataset.pop_back();
  EXPECT_TRUE(play(cfg, w0, shorter, 4).rejected);
  auto flipped = w1;
  flipped.script[0].type = flipped.script[0].type == OpType::Query ? OpType::Ingest : OpType::Query;
  EXPECT_TRUE(play(cfg, w0, flipped, 4).rejected);
}

TEST(Game, DreamingLeavesTraceUnchanged) {
  auto cfg = small_game();
  EXPECT_FALSE(dream_divergence(cfg, 5).has_value());
}

TEST(Fuzz, SmallRunDetectsEverything) {
  FuzzConfig cfg;
  cfg.bucket_trials = 150;
  cfg.record_trials = 300;
  cfg.checkpoint_trials = 150;
  cfg.rollback_trials = 5;
  cfg.L = 5;
  cfg.items = 40;
  cfg.checkpoint_pad = 128u << 10;
  auto r = run_fuzz(cfg);
  for (const FuzzCount* c : {&r.bucket, &r.record, &r.checkpoint, &r.stale, &r.replay}) {
    EXPECT_GT(c->trials, 0u);
    EXPECT_EQ(c->rate(), 1.0);
  }
  EXPECT_FALSE(fuzz_summary(r).empty());
}

TEST(Bandwidth, InMemoryLinearOpalSublinear) {
  BandwidthConfig cfg;
  cfg.min_log = 6;
  cfg.max_log = 9;
  cfg.queries = 4;
  auto r = run_bandwidth(cfg);
  EXPECT_EQ(r.rows.size(), 4u * 3u);
  EXPECT_GT(r.inmemory_lin.r2, 0.99);
  auto at = [&](StoreKind k, std::size_t n) {
    for (const auto& row : r.rows)
      if (row.store == k && row.N == n) return row.per_query_bytes;
    return 0.0;
  };
  const double opal_small = at(StoreKind::Oram, 64), opal_big = at(StoreKind::Oram, 512);
  const double mem_small = at(StoreKind::InMemory, 64), mem_big = at(StoreKind::InMemory, 512);
  EXPECT_NEAR(mem_big / mem_small, 8.0, 1.0);
  EXPECT_LT(opal_big / opal_small, 3.0);
  std::ostringstream csv;
  write_bandwidth_csv(r, csv);
  const std::string text = csv.str();
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 13);
}

TEST(Replay, DepthRule) {
  ReplayConfig c;
  c.n_target = 8192;
  EXPECT_EQ(replay_depth(c), 11);
  c.n_target = 8193;
  EXPECT_EQ(replay_depth(c), 12);
  c.n_target = 100;
  EXPECT_EQ(replay_depth(c), 5);
  c.L = 9;
  EXPECT_EQ(replay_depth(c), 9);
}

TEST(Replay, SmallRunIsConsistent) {
  ReplayConfig cfg;
  cfg.days = 4;
  cfg.n_target = 512;
  cfg.sample_every = 100;
  cfg.probe_every = 300;
  cfg.probe_queries = 5;
  auto r = run_replay(cfg);
  EXPECT_GT(r.w, 0.9);
  EXPECT_LE(r.w, 1.0);
  EXPECT_EQ(r.ttl, compute_ttl({512, r.w, 1.0, 10}));
  EXPECT_NEAR(r.lifetime_target, 512 / r.w, 1e-9);
  EXPECT_FALSE(r.timeline.empty());
  EXPECT_LE(r.stash_max, 128u);
  EXPECT_GT(r.expired, 0u);
  EXPECT_GE(r.recall_sleepy, 0.0);
  EXPECT_LE(r.recall_sleepy, 1.0);
  EXPECT_LE(r.resolved_changed, r.resolved);
  std::ostringstream t, p;
  write_timeline_csv(r, t);
  write_recall_csv(r, p);
  const std::string text = t.str();
  EXPECT_EQ(static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n')), r.timeline.size() + 1);
}

TEST(Uplift, SmallRunSoundAndExact) {
  UpliftConfig cfg;
  cfg.days = 6;
  cfg.questions = 70;
  auto r = run_uplift(cfg);
  EXPECT_EQ(r.questions, 70u);
  EXPECT_DOUBLE_EQ(r.soundness, 1.0);
  EXPECT_DOUBLE_EQ(r.extractor_exact, 1.0);
  EXPECT_NEAR(r.uplift_pp, 100 * (r.kg_rate - r.ann_rate), 1e-9);
  std::size_t asked = 0;
  for (const auto& c : r.by_category) asked += c.asked;
  EXPECT_EQ(asked, 70u);
}
