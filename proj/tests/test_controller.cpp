#include <gtest/gtest.h>

#include <functional>

#include "opal/controller.hpp"

using namespace opal;

namespace {

constexpr std::int64_t kT0 = 1736121600;

ControllerConfig small_config(StoreKind store = StoreKind::Oram, bool dreaming = true) {
  ControllerConfig c;
  c.pub = PublicParams{20, 5, 3, 6, 4};
  c.retention = RetentionConfig{64, 1.0, 1.0, 5};
  c.ivf.n_target = 64;
  c.ivf.warmup = 16;
  c.ivf.kmeans_iters = 5;
  c.store = store;
  c.dreaming = dreaming;
  c.checkpoint_pad = 1u << 20;
  return c;
}

std::unique_ptr<TestEnclaves> enclaves() {
  return std::make_unique<TestEnclaves>(64, RuleExtractor({"Ana Lee", "Ben Ode"}, {"atlas"}));
}

IngestRequest doc(ItemId id, std::string text, Modality m = Modality::Email) {
  IngestRequest r;
  r.text = std::move(text);
  r.meta.chunk_id = id;
  r.meta.artifact_id = "a" + std::to_string(id);
  r.meta.modality = m;
  r.meta.timestamp = kT0 + static_cast<std::int64_t>(id) * 600;
  r.meta.participants = {id % 2 ? "Ana Lee" : "Ben Ode"};
  if (id % 3 == 0) r.meta.project = "atlas";
  return r;
}

std::string words(ItemId id) { return "note " + std::to_string(id) + " tok" + std::to_string(id * 7919 % 1000); }

struct Rig {
  TraceRecorder trace;
  Controller ctl;
  std::uint64_t ctr = 0;
  explicit Rig(ControllerConfig cfg = small_config()) : ctl(cfg, enclaves(), &trace, crypto::ClientSecret::from_seed(1)) {}
  void ingest(ItemId id) { ctl.ingest(doc(id, words(id)), ++ctr); }
  QueryResult query(const std::string& q) { return ctl.query({q, kT0 + 86400}, ++ctr); }
};

void expect_call(const TraceEvent& e, std::size_t pad) {
  EXPECT_EQ(e.kind, EventKind::InterEnclaveCall);
  EXPECT_EQ(e.byte_count, pad);
  EXPECT_FALSE(e.store.has_value());
}

void expect_access(const TraceEvent& e, Tree t, std::uint64_t batch) {
  EXPECT_EQ(e.kind, EventKind::OramAccess);
  EXPECT_EQ(e.store, t);
  EXPECT_EQ(e.batch_size, batch);
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return Errc::Io;
}

}  // namespace

TEST(Controller, QueryTraceShape) {
  Rig r;
  for (ItemId i = 1; i <= 4; ++i) r.ingest(i);
  const std::size_t from = r.trace.size();
  r.query("note tok");
  auto ev = r.trace.events_since(from);
  ASSERT_EQ(ev.size(), 5u);
  const PadSizes pads;
  expect_call(ev[0], pads.traverse);
  expect_call(ev[1], pads.embed);
  expect_access(ev[2], Tree::ANN, 20);
  expect_access(ev[3], Tree::Data, 5);
  expect_call(ev[4], pads.synthesize);
}

TEST(Controller, IngestTraceShapeAndSummaryCadence) {
  Rig r;
  const PadSizes pads;
  for (ItemId i = 1; i <= 9; ++i) {
    const std::size_t from = r.trace.size();
    r.ingest(i);
    auto ev = r.trace.events_since(from);
    if (i % 3 != 0) {
      ASSERT_EQ(ev.size(), 3u) << i;
    } else {
      ASSERT_EQ(ev.size(), 7u) << i;
      expect_call(ev[3], pads.summarize);
      expect_call(ev[4], pads.embed);
      expect_access(ev[5], Tree::ANN, 1);
      expect_access(ev[6], Tree::Data, 1);
    }
    expect_call(ev[0], pads.embed);
    expect_access(ev[1], Tree::ANN, 1);
    expect_access(ev[2], Tree::Data, 1);
  }
  EXPECT_EQ(r.ctl.metrics().summaries, 3u);
  EXPECT_EQ(r.ctl.live_summaries(), 3u);
  EXPECT_EQ(r.ctl.live_items(), 12u);
  EXPECT_TRUE(r.ctl.is_summary(Controller::kSummaryBase));
  EXPECT_EQ(r.ctl.clock(), 12u);
}

TEST(Controller, RetrievesIngestedText) {
  Rig r;
  r.ctl.ingest(doc(1, "the zorvex plimtar launch review"), ++r.ctr);
  for (ItemId i = 2; i <= 30; ++i) r.ingest(i);
  auto res = r.query("zorvex plimtar");
  ASSERT_FALSE(res.top_k.empty());
  EXPECT_EQ(res.top_k.front(), 1u);
  EXPECT_NE(res.answer.find("zorvex plimtar launch"), std::string::npos);
  EXPECT_LE(res.top_k.size(), 5u);
}

TEST(Controller, EmptyStoreAnswersNoMemory) {
  Rig r;
  auto res = r.query("anything");
  EXPECT_TRUE(res.top_k.empty());
  EXPECT_EQ(res.answer, TestEnclaves::kNoMemory);
}

TEST(Controller, KgFiltersByPerson) {
  auto cfg = small_config();
  cfg.min_candidates = 1;
  Rig f(cfg);
  for (ItemId i = 1; i <= 40; ++i) f.ingest(i);
  auto res = f.query("what did Ana Lee say about note");
  EXPECT_EQ(res.relaxation_level, 0);
  for (ItemId id : res.top_k) {
    if (!f.ctl.is_summary(id)) EXPECT_EQ(id % 2, 1u) << id;
  }
}

TEST(Controller, RejectsReplayedCounter) {
  Rig r;
  r.ingest(1);
  EXPECT_EQ(code_of([&] { r.ctl.ingest(doc(2, "x"), r.ctr); }), Errc::ReplayDetected);
  EXPECT_EQ(code_of([&] { r.ctl.query({"x", 0}, r.ctr - 1); }), Errc::ReplayDetected);
  EXPECT_NO_THROW(r.ctl.query({"x", 0}, r.ctr + 5));
  EXPECT_EQ(r.ctl.last_ctr(), r.ctr + 5);
}

TEST(Controller, RejectsDuplicateAndReservedIds) {
  Rig r;
  r.ingest(1);
  EXPECT_EQ(code_of([&] { r.ctl.ingest(doc(1, "again"), ++r.ctr); }), Errc::DuplicateId);
  EXPECT_EQ(code_of([&] { r.ctl.ingest(doc(Controller::kSummaryBase + 3, "s"), ++r.ctr); }), Errc::DuplicateId);
}

TEST(Controller, PadOverflowIsAnError) {
  Rig r;
  std::string big(5000, 'a');
  EXPECT_EQ(code_of([&] { r.ctl.query({big, 0}, ++r.ctr); }), Errc::PadOverflow);
}

TEST(Controller, ConfigChecks) {
  auto cfg = small_config();
  cfg.pub.K = 30;
  EXPECT_THROW(Controller(cfg, enclaves(), nullptr, {}), Error);
  cfg = small_config();
  cfg.ivf.dim = 32;
  EXPECT_THROW(Controller(cfg, enclaves(), nullptr, {}), Error);
}

TEST(Controller, RecordBindsCounterAndRoots) {
  Rig r;
  r.ingest(1);
  const auto& rec = r.ctl.record();
  EXPECT_EQ(rec.ctr, 1u);
  EXPECT_TRUE(crypto::rollback_tag_valid(r.ctl.keys(), rec));
  EXPECT_EQ(rec.root_ann, r.ctl.backend().root(Tree::ANN));
  EXPECT_EQ(rec.root_data, r.ctl.backend().root(Tree::Data));
}

TEST(Controller, CheckpointRestoreRoundTrip) {
  Rig r, twin;
  for (ItemId i = 1; i <= 25; ++i) {
    r.ingest(i);
    twin.ingest(i);
  }
  ASSERT_EQ(r.query("note tok5").top_k, twin.query("note tok5").top_k);
  auto rec = r.ctl.record();
  auto cp = r.ctl.seal_and_evict();
  EXPECT_TRUE(r.ctl.evicted());
  EXPECT_EQ(code_of([&] { r.ctl.query({"x", 0}, r.ctr + 1); }), Errc::StaleState);
  EXPECT_EQ(cp.bytes.size(), crypto::Checkpoint::kHeaderSize + small_config().checkpoint_pad + crypto::kTagLen);

  r.ctl.restore(cp, rec, r.ctr);
  EXPECT_FALSE(r.ctl.evicted());
  EXPECT_EQ(r.ctl.live_items(), 33u);
  EXPECT_EQ(r.query("note tok7").top_k, twin.query("note tok7").top_k);
  r.ingest(26);
  twin.ingest(26);
  EXPECT_EQ(r.query("note tok5").top_k, twin.query("note tok5").top_k);
}

TEST(Controller, RestoreRejectsStaleInputs) {
  Rig r;
  for (ItemId i = 1; i <= 6; ++i) r.ingest(i);
  auto old_rec = r.ctl.record();
  auto old_cp = r.ctl.seal_and_evict();
  auto old_ctr = r.ctr;
  auto ann_snap = r.ctl.backend().storage(Tree::ANN)->snapshot();
  r.ctl.restore(old_cp, old_rec, old_ctr);
  r.ingest(7);
  auto new_rec = r.ctl.record();
  auto new_cp = r.ctl.seal_and_evict();

  // Old checkpoint and record replayed against the newer counter.
  EXPECT_EQ(code_of([&] { r.ctl.restore(old_cp, old_rec, r.ctr); }), Errc::CounterMismatch);
  // Old checkpoint with the fresh record.
  EXPECT_EQ(code_of([&] { r.ctl.restore(old_cp, new_rec, r.ctr); }), Errc::CounterMismatch);
  // Forged record.
  auto forged = new_rec;
  forged.root_ann[0] ^= 1;
  EXPECT_EQ(code_of([&] { r.ctl.restore(new_cp, forged, r.ctr); }), Errc::BadTag);
  // Rolled-back storage under the latest state.
  auto now_snap = r.ctl.backend().storage(Tree::ANN)->snapshot();
  r.ctl.backend().storage(Tree::ANN)->restore_snapshot(ann_snap);
  EXPECT_EQ(code_of([&] { r.ctl.restore(new_cp, new_rec, r.ctr); }), Errc::StaleState);
  r.ctl.backend().storage(Tree::ANN)->restore_snapshot(now_snap);
  EXPECT_NO_THROW(r.ctl.restore(new_cp, new_rec, r.ctr));
}

TEST(Controller, DreamingExpiresAtCapacity) {
  auto cfg = small_config();
  cfg.retention = RetentionConfig{40, 1.0, 1.0, 5};
  cfg.pub.T = 1000;
  Rig r(cfg);
  std::size_t expired = 0;
  r.ctl.set_expiry_observer([&](ItemId, LogicalTime) { ++expired; });
  for (ItemId i = 1; i <= 400; ++i) r.ingest(i);
  EXPECT_EQ(r.ctl.ttl(), 40u);
  EXPECT_GT(expired, 0u);
  EXPECT_EQ(expired, r.ctl.metrics().dream.expired);
  EXPECT_GE(r.ctl.live_items(), 40u);
  EXPECT_LT(r.ctl.live_items(), 400u);
  EXPECT_EQ(r.ctl.graph().chunk_count(), r.ctl.live_items());
}

TEST(Controller, DreamingDoesNotChangeTrace) {
  Rig on(small_config(StoreKind::Oram, true)), off(small_config(StoreKind::Oram, false));
  for (ItemId i = 1; i <= 60; ++i) {
    on.ingest(i);
    off.ingest(i);
    if (i % 4 == 0) {
      on.query("note " + std::to_string(i));
      off.query("note " + std::to_string(i));
    }
  }
  EXPECT_FALSE(first_divergence(on.trace.events(), off.trace.events()).has_value());
}

TEST(Controller, BackendsShareTraceStructure) {
  Rig o(small_config(StoreKind::Oram)), p(small_config(StoreKind::Plaintext)), m(small_config(StoreKind::InMemory));
  for (ItemId i = 1; i <= 20; ++i) {
    for (Rig* r : {&o, &p, &m}) r->ingest(i);
  }
  std::vector<ItemId> tops[3];
  int k = 0;
  for (Rig* r : {&o, &p, &m}) tops[k++] = r->query("note 7 tok").top_k;
  EXPECT_FALSE(first_divergence(o.trace.events(), p.trace.events()).has_value());
  EXPECT_FALSE(first_divergence(o.trace.events(), m.trace.events()).has_value());
  EXPECT_EQ(tops[0], tops[1]);
  EXPECT_EQ(tops[0], tops[2]);
}

TEST(Controller, InMemoryCostGrowsWithStore) {
  Rig m(small_config(StoreKind::InMemory));
  for (ItemId i = 1; i <= 10; ++i) m.ingest(i);
  m.query("x");
  auto small = m.ctl.backend().last_io(Tree::ANN).total_bytes;
  for (ItemId i = 11; i <= 40; ++i) m.ingest(i);
  m.query("x");
  auto big = m.ctl.backend().last_io(Tree::ANN).total_bytes;
  EXPECT_GT(big, 3 * small);
}

TEST(Controller, AnnOnlyIgnoresPredicates) {
  auto cfg = small_config(StoreKind::Plaintext);
  cfg.mode = RetrievalMode::AnnOnly;
  Rig r(cfg);
  for (ItemId i = 1; i <= 10; ++i) r.ingest(i);
  auto res = r.query("what did Ana Lee say");
  EXPECT_EQ(res.admissible, r.ctl.live_items());
}

TEST(Controller, InsertObserverSeesEveryStoredItem) {
  Rig r;
  std::vector<ItemId> seen;
  r.ctl.set_insert_observer([&](ItemId id, LogicalTime, const ann::Vec& v) {
    seen.push_back(id);
    EXPECT_NEAR(v.norm(), 1.0f, 1e-4);
  });
  for (ItemId i = 1; i <= 3; ++i) r.ingest(i);
  EXPECT_EQ(seen, (std::vector<ItemId>{1, 2, 3, Controller::kSummaryBase}));
}
