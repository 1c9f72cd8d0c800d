#include <gtest/gtest.h>

#include <functional>
#include <map>
#include <random>
#include <set>

#include "opal/oram.hpp"

using namespace opal;

namespace {

struct Fixture {
  OramConfig cfg;
  MemoryStorage store;
  crypto::DerivedKeys keys;
  TraceRecorder trace;
  OramClient client;

  explicit Fixture(int L = 6, std::size_t block = 32, std::uint64_t seed = 1)
      : cfg(make_cfg(L, block, seed)),
        store(cfg.tree, cfg.geometry()),
        keys(crypto::derive_keys(crypto::ClientSecret::from_seed(seed))),
        client(cfg, store, keys, &trace) {}

  static OramConfig make_cfg(int L, std::size_t block, std::uint64_t seed) {
    OramConfig c;
    c.L = L;
    c.block_size = block;
    c.seed = seed;
    return c;
  }
};

Bytes payload_for(ItemId id, std::size_t n) {
  Bytes b(n);
  for (std::size_t i = 0; i < n; ++i) b[i] = static_cast<std::uint8_t>(id * 31 + i);
  return b;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return Errc::Io;
}

}  // namespace

TEST(OramConfig, CapacityAtDefaultDepth) {
  OramConfig c;
  EXPECT_EQ(c.L, 14);
  EXPECT_EQ(c.num_buckets(), 32767u);
  EXPECT_EQ(c.num_leaves(), 16384u);
  EXPECT_EQ(c.slot_capacity(), 131068u);
  EXPECT_EQ(c.usable_capacity(), 65536u);
  c.L = 17;
  EXPECT_EQ(c.Z * c.num_leaves() * 2, 1048576u);
  EXPECT_EQ(c.num_leaves() * c.Z, 524288u);
}

TEST(OramConfig, Validation) {
  OramConfig c;
  c.block_size = 0;
  EXPECT_THROW(c.validate(), Error);
  c = {};
  c.L = 0;
  EXPECT_THROW(c.validate(), Error);
}

TEST(Oram, EvictionOrderReverseLexicographic) {
  std::vector<std::uint32_t> got;
  for (std::uint64_t g = 0; g < 8; ++g) got.push_back(OramClient::eviction_leaf(g, 2));
  EXPECT_EQ(got, (std::vector<std::uint32_t>{0, 2, 1, 3, 0, 2, 1, 3}));
  got.clear();
  for (std::uint64_t g = 0; g < 8; ++g) got.push_back(OramClient::eviction_leaf(g, 3));
  EXPECT_EQ(got, (std::vector<std::uint32_t>{0, 4, 2, 6, 1, 5, 3, 7}));
}

TEST(Oram, PathIndices) {
  Fixture f(3);
  EXPECT_EQ(f.client.path(0), (std::vector<std::uint64_t>{0, 1, 3, 7}));
  EXPECT_EQ(f.client.path(7), (std::vector<std::uint64_t>{0, 2, 6, 14}));
  EXPECT_EQ(f.client.path(5), (std::vector<std::uint64_t>{0, 2, 5, 12}));
}

TEST(Oram, ReadYourWrites) {
  Fixture f(7, 40);
  const std::size_t n = 300;
  for (ItemId id = 0; id < n; ++id) f.client.insert(id, payload_for(id, 40));
  EXPECT_EQ(f.client.live_blocks(), n);
  std::mt19937_64 rng(5);
  for (int round = 0; round < 200; ++round) {
    std::vector<ItemId> ids;
    for (int j = 0; j < 5; ++j) ids.push_back(rng() % (n + 50));  // some absent
    auto got = f.client.batch_read(ids);
    for (std::size_t j = 0; j < ids.size(); ++j) {
      if (ids[j] < n) {
        ASSERT_TRUE(got[j].has_value());
        EXPECT_EQ(*got[j], payload_for(ids[j], 40));
      } else {
        EXPECT_FALSE(got[j].has_value());
      }
    }
  }
  EXPECT_LE(f.client.stats().stash_max, 128u);
}

TEST(Oram, OverwriteAndForget) {
  Fixture f;
  f.client.insert(5, payload_for(5, 32));
  f.client.insert(5, payload_for(6, 32));
  EXPECT_EQ(f.client.live_blocks(), 1u);
  EXPECT_EQ(*f.client.batch_read(std::vector<ItemId>{5})[0], payload_for(6, 32));

  auto before = f.store.totals();
  EXPECT_TRUE(f.client.forget(5));
  EXPECT_FALSE(f.client.forget(5));
  EXPECT_EQ(f.store.totals().total_bytes(), before.total_bytes());
  EXPECT_FALSE(f.client.batch_read(std::vector<ItemId>{5})[0].has_value());
}

TEST(Oram, DuplicateIdsInBatch) {
  Fixture f;
  f.client.insert(1, payload_for(1, 32));
  auto got = f.client.batch_read(std::vector<ItemId>{1, 1, kDummyId});
  ASSERT_TRUE(got[0] && got[1]);
  EXPECT_EQ(*got[0], *got[1]);
  EXPECT_FALSE(got[2]);
}

TEST(Oram, RejectsBadPayloads) {
  Fixture f;
  EXPECT_EQ(code_of([&] { f.client.insert(1, Bytes(31, 0)); }), Errc::LengthMismatch);
  EXPECT_EQ(code_of([&] { f.client.insert(kDummyId, Bytes(32, 0)); }), Errc::DuplicateId);
}

TEST(Oram, TraceEventPerLogicalAccess) {
  Fixture f;
  f.client.insert(1, payload_for(1, 32));
  f.client.batch_read(std::vector<ItemId>{1, 2, 3, 4});
  auto ev = f.trace.events();
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_EQ(ev[0].kind, EventKind::OramAccess);
  EXPECT_EQ(*ev[0].batch_size, 1u);
  EXPECT_EQ(*ev[1].batch_size, 4u);
  EXPECT_EQ(*ev[1].store, Tree::ANN);
}

TEST(Oram, OnlineBytesIndependentOfTarget) {
  // Hit, miss and dummy reads fetch one slot per level.
  Fixture f(5);
  for (ItemId id = 0; id < 20; ++id) f.client.insert(id, payload_for(id, 32));
  std::set<std::uint64_t> online;
  for (ItemId id : {ItemId{3}, ItemId{999}, kDummyId, ItemId{7}}) {
    f.client.batch_read(std::vector<ItemId>{id});
    online.insert(f.client.last_batch_io().online_bytes);
  }
  EXPECT_EQ(online.size(), 1u);
  EXPECT_EQ(*online.begin(), 6 * f.cfg.slot_cipher_bytes());
}

TEST(Oram, EvictionEveryAAccesses) {
  Fixture f(3);
  f.client.insert(1, payload_for(1, 32));
  const int reps = 4000;
  for (int i = 0; i < reps; ++i) f.client.batch_read(std::vector<ItemId>{1});
  EXPECT_EQ(f.client.stats().accesses, static_cast<std::uint64_t>(reps + 1));
  EXPECT_EQ(f.client.stats().evictions, static_cast<std::uint64_t>((reps + 1) / 3));
}

TEST(Oram, RootTracksStorage) {
  Fixture f(5);
  for (ItemId id = 0; id < 40; ++id) f.client.insert(id, payload_for(id, 32));
  EXPECT_EQ(f.client.root(), f.client.recompute_root());
  EXPECT_EQ(f.client.root(), f.client.recompute_root_from_storage());
  EXPECT_FALSE(f.client.audit_storage().has_value());
}

TEST(Oram, TamperDetectedOnPath) {
  Fixture f(4);
  for (ItemId id = 0; id < 20; ++id) f.client.insert(id, payload_for(id, 32));
  auto raw = f.store.peek_raw(0);
  raw[raw.size() / 2] ^= 1;
  f.store.tamper_raw(0, raw);
  EXPECT_EQ(f.client.audit_storage(), 0u);
  EXPECT_NE(f.client.root(), f.client.recompute_root_from_storage());
  EXPECT_EQ(code_of([&] { f.client.evict_path(0); }), Errc::IntegrityFailure);
}

TEST(Oram, StateRoundTripOnSameStorage) {
  Fixture f(5);
  for (ItemId id = 0; id < 50; ++id) f.client.insert(id, payload_for(id, 32));
  auto state = f.client.serialize_state();
  OramClient again(f.cfg, f.store, f.keys, nullptr, false);
  again.load_state(state);
  EXPECT_EQ(again.root(), f.client.root());
  EXPECT_EQ(again.live_blocks(), 50u);
  for (ItemId id = 0; id < 50; id += 7) EXPECT_EQ(*again.batch_read(std::vector<ItemId>{id})[0], payload_for(id, 32));
}

TEST(Oram, WrongKeysFailToRead) {
  Fixture f(4);
  for (ItemId id = 0; id < 10; ++id) f.client.insert(id, payload_for(id, 32));
  auto state = f.client.serialize_state();
  OramClient other(f.cfg, f.store, crypto::derive_keys(crypto::ClientSecret::from_seed(77)), nullptr, false);
  other.load_state(state);
  EXPECT_THROW(other.batch_read(std::vector<ItemId>{3}), Error);
}

TEST(Oram, DreamSeesRequestedAndEvictedResidents) {
  Fixture f(4);
  for (ItemId id = 0; id < 30; ++id) f.client.insert(id, payload_for(id, 32));
  std::vector<DreamContext> seen;
  DreamCallback cb = [&](DreamContext& ctx) { seen.push_back(ctx); };
  std::size_t with_more = 0;
  for (int i = 0; i < 30; ++i) {
    f.client.batch_read(std::vector<ItemId>{static_cast<ItemId>(i)}, cb, 100 + i);
    const auto& ctx = seen.back();
    EXPECT_EQ(ctx.clock, static_cast<LogicalTime>(100 + i));
    bool found = false;
    for (const auto& r : ctx.residents) {
      if (r.id == static_cast<ItemId>(i)) {
        found = true;
        EXPECT_TRUE(r.requested);
        EXPECT_EQ(r.payload, payload_for(i, 32));
      } else {
        EXPECT_FALSE(r.requested);
      }
    }
    EXPECT_TRUE(found);
    with_more += ctx.residents.size() > 1;
  }
  EXPECT_GT(with_more, 0u);
}

TEST(Oram, DreamAddsNoStorageTraffic) {
  Fixture a(5, 32, 9), b(5, 32, 9);
  DreamCallback cb = [](DreamContext&) {};
  for (ItemId id = 0; id < 40; ++id) {
    a.client.insert(id, payload_for(id, 32), cb, id);
    b.client.insert(id, payload_for(id, 32));
  }
  for (ItemId id = 0; id < 40; ++id) {
    a.client.batch_read(std::vector<ItemId>{id, id + 1}, cb, id);
    b.client.batch_read(std::vector<ItemId>{id, id + 1});
  }
  EXPECT_EQ(a.store.totals().total_bytes(), b.store.totals().total_bytes());
  EXPECT_EQ(a.store.snapshot().size(), b.store.snapshot().size());
  EXPECT_FALSE(first_divergence(a.trace.events(), b.trace.events()).has_value());
}

TEST(Oram, StashStaysSmallNearCapacity) {
  Fixture f(8, 16, 3);
  const std::size_t n = f.cfg.usable_capacity() * 3 / 4;
  for (ItemId id = 0; id < n; ++id) f.client.insert(id, payload_for(id, 16));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 3000; ++i) f.client.batch_read(std::vector<ItemId>{rng() % n});
  EXPECT_LE(f.client.stats().stash_max, 128u);
}
