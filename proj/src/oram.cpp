#include "opal/oram.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>
#include <sstream>

#include "opal/codec.hpp"

namespace opal {

void OramConfig::validate() const {
  if (L < 1 || L > 24) throw Error(Errc::ConfigInvalid, "L must be in [1, 24]");
  if (Z < 1 || S < 1 || A < 1) throw Error(Errc::ConfigInvalid, "Z, S, A must be positive");
  if (block_size == 0) throw Error(Errc::ConfigInvalid, "block_size must be positive");
}

OramClient::OramClient(OramConfig cfg, BlockStorage& store, const crypto::DerivedKeys& keys, TraceRecorder* trace,
                       bool initialize)
    : cfg_(cfg), store_(store), keys_(keys), trace_(trace), rng_(cfg.seed) {
  cfg_.validate();
  const Geometry want = cfg_.geometry();
  const Geometry& have = store_.geometry();
  if (store_.tree() != cfg_.tree || have.L != want.L || have.Z != want.Z || have.S != want.S ||
      have.slot_bytes != want.slot_bytes) {
    throw Error(Errc::ConfigInvalid, "storage geometry does not match ORAM config");
  }
  meta_.resize(cfg_.num_buckets());
  merkle_ = crypto::MerkleTree(cfg_.L);
  if (!initialize) {
    for (auto& m : meta_) m.slots.assign(cfg_.Z + cfg_.S, SlotMeta{});
    return;
  }

  // Every bucket starts as Z+S encrypted dummies.
  const std::uint64_t batch = 1024;
  std::vector<std::pair<BucketId, Bucket>> pending;
  pending.reserve(batch);
  for (std::uint64_t b = 0; b < cfg_.num_buckets(); ++b) {
    pending.emplace_back(BucketId{cfg_.tree, b}, seal_bucket(b, {}));
    if (pending.size() == batch || b + 1 == cfg_.num_buckets()) {
      store_.write_buckets(pending);
      pending.clear();
    }
  }
  merkle_.rebuild();
}

std::uint32_t OramClient::eviction_leaf(std::uint64_t g, int L) {
  std::uint32_t x = static_cast<std::uint32_t>(g & ((std::uint64_t{1} << L) - 1));
  std::uint32_t r = 0;
  for (int i = 0; i < L; ++i) {
    r = (r << 1) | (x & 1u);
    x >>= 1;
  }
  return r;
}

std::vector<std::uint64_t> OramClient::path(std::uint32_t leaf) const {
  std::vector<std::uint64_t> p(cfg_.L + 1);
  for (int l = 0; l <= cfg_.L; ++l) p[l] = bucket_on_path(leaf, l, cfg_.L);
  return p;
}

std::uint32_t OramClient::random_leaf() {
  return static_cast<std::uint32_t>(rng_() & (cfg_.num_leaves() - 1));
}

Bytes OramClient::slot_plaintext(ItemId id, const Bytes* payload) const {
  Bytes plain(cfg_.slot_plain_bytes(), 0);
  for (int i = 0; i < 8; ++i) plain[i] = static_cast<std::uint8_t>(id >> (56 - 8 * i));
  if (payload) {
    if (payload->size() != cfg_.block_size) throw Error(Errc::LengthMismatch, "payload has wrong length");
    std::memcpy(plain.data() + 8, payload->data(), payload->size());
  }
  return plain;
}

Bucket OramClient::seal_bucket(std::uint64_t bucket, const std::vector<std::pair<ItemId, const Bytes*>>& reals) {
  const int slots = cfg_.Z + cfg_.S;
  BucketMeta& m = meta_[bucket];
  m.epoch += 1;
  m.count = 0;
  m.slots.assign(slots, SlotMeta{});

  std::vector<int> order(slots);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng_);

  Bucket out;
  out.epoch = m.epoch;
  out.slots.resize(slots);
  std::vector<const Bytes*> content(slots, nullptr);
  for (std::size_t i = 0; i < reals.size(); ++i) {
    int s = order[i];
    m.slots[s] = SlotMeta{reals[i].first, true, true};
    content[s] = reals[i].second;
  }
  const std::uint8_t tree = static_cast<std::uint8_t>(cfg_.tree);
  for (int s = 0; s < slots; ++s) {
    Bytes plain = slot_plaintext(m.slots[s].id, content[s]);
    out.slots[s] = crypto::seal_block(keys_, plain, {tree, bucket, static_cast<std::uint32_t>(s), m.epoch},
                                      cfg_.slot_plain_bytes());
  }
  merkle_.set_bucket(bucket, crypto::sha256(out.serialize()));
  return out;
}

void OramClient::note(ItemId id, const Bytes& payload, bool requested) {
  if (!collecting_) return;
  auto [it, fresh] = materialized_.try_emplace(id);
  if (fresh) it->second.payload = payload;
  else if (requested) it->second.payload = payload;
  it->second.requested = it->second.requested || requested;
}

std::optional<Bytes> OramClient::read_path(std::uint32_t leaf, ItemId target) {
  std::optional<Bytes> found;
  const std::uint8_t tree = static_cast<std::uint8_t>(cfg_.tree);
  for (int l = 0; l <= cfg_.L; ++l) {
    const std::uint64_t b = bucket_on_path(leaf, l, cfg_.L);
    BucketMeta& m = meta_[b];
    int pick = -1;
    if (target != kDummyId && !found) {
      for (int s = 0; s < static_cast<int>(m.slots.size()); ++s) {
        if (m.slots[s].real && m.slots[s].valid && m.slots[s].id == target) {
          pick = s;
          break;
        }
      }
    }
    if (pick < 0) {
      // Any unread slot that does not hold a live block serves as a dummy.
      int candidates[64];
      int nc = 0;
      for (int s = 0; s < static_cast<int>(m.slots.size()); ++s) {
        if (m.slots[s].valid && !m.slots[s].real) candidates[nc++] = s;
      }
      if (nc == 0) throw Error(Errc::IntegrityFailure, "bucket ran out of dummy slots");
      pick = candidates[rng_() % static_cast<std::uint64_t>(nc)];
    }
    Bytes ct = store_.read_slot(BucketId{cfg_.tree, b}, pick);
    online_bytes_ += ct.size();
    Bytes plain;
    try {
      plain = crypto::open_block(keys_, ct, {tree, b, static_cast<std::uint32_t>(pick), m.epoch},
                                 cfg_.slot_plain_bytes());
    } catch (const Error&) {
      throw Error(Errc::IntegrityFailure, std::string(tree_name(cfg_.tree)) + " bucket " + std::to_string(b) +
                                              " slot failed authentication");
    }
    ItemId sealed_id = 0;
    for (int i = 0; i < 8; ++i) sealed_id = (sealed_id << 8) | plain[i];
    SlotMeta& sm = m.slots[pick];
    if (sealed_id != sm.id) throw Error(Errc::IntegrityFailure, "slot holds an unexpected block");
    if (sm.real) {
      found = Bytes(plain.begin() + 8, plain.end());
      sm.real = false;
    }
    sm.valid = false;
    m.count += 1;
  }
  return found;
}

void OramClient::access_one(ItemId id, const Bytes* write_payload, std::optional<Bytes>* out) {
  auto pit = (id == kDummyId) ? pos_.end() : pos_.find(id);
  const bool live = pit != pos_.end();
  const std::uint32_t leaf = live ? pit->second : random_leaf();

  std::optional<Bytes> from_tree = read_path(leaf, live ? id : kDummyId);
  if (live) {
    const std::uint32_t fresh = random_leaf();
    pit->second = fresh;
    auto sit = stash_.find(id);
    if (from_tree) {
      stash_[id] = StashEntry{std::move(*from_tree), fresh};
    } else if (sit != stash_.end()) {
      sit->second.leaf = fresh;
    } else {
      throw Error(Errc::IntegrityFailure, "live block is neither on its path nor in the stash");
    }
    StashEntry& e = stash_[id];
    if (write_payload) e.payload = *write_payload;
    if (out) *out = e.payload;
    note(id, e.payload, out != nullptr);
  } else if (write_payload && id != kDummyId) {
    const std::uint32_t fresh = random_leaf();
    pos_[id] = fresh;
    stash_[id] = StashEntry{*write_payload, fresh};
    note(id, *write_payload, false);
  }
  after_access(leaf);
}

void OramClient::after_access(std::uint32_t leaf) {
  stats_.accesses += 1;
  round_ += 1;
  if (round_ % static_cast<std::uint64_t>(cfg_.A) == 0) deterministic_evict();
  for (int l = 0; l <= cfg_.L; ++l) {
    const std::uint64_t b = bucket_on_path(leaf, l, cfg_.L);
    if (meta_[b].count >= static_cast<std::uint32_t>(cfg_.S)) early_reshuffle(b);
  }
  stats_.stash_max = std::max(stats_.stash_max, stash_.size());
  check_stash();
}

void OramClient::check_stash() {
  if (stash_.size() > cfg_.stash_limit) {
    throw Error(Errc::StashOverflow, "stash holds " + std::to_string(stash_.size()) + " blocks");
  }
}

std::vector<std::pair<ItemId, Bytes>> OramClient::load_bucket(std::uint64_t bucket) {
  BucketId id{cfg_.tree, bucket};
  Bucket raw = std::move(store_.read_buckets(std::span(&id, 1)).front());
  if (!crypto::equal_ct(crypto::sha256(raw.serialize()), merkle_.bucket(bucket))) {
    throw Error(Errc::IntegrityFailure,
                std::string(tree_name(cfg_.tree)) + " bucket " + std::to_string(bucket) + " digest mismatch");
  }
  const BucketMeta& m = meta_[bucket];
  const std::uint8_t tree = static_cast<std::uint8_t>(cfg_.tree);
  std::vector<std::pair<ItemId, Bytes>> out;
  for (int s = 0; s < static_cast<int>(m.slots.size()); ++s) {
    const SlotMeta& sm = m.slots[s];
    if (!(sm.real && sm.valid)) continue;
    Bytes plain = crypto::open_block(keys_, raw.slots[s], {tree, bucket, static_cast<std::uint32_t>(s), m.epoch},
                                     cfg_.slot_plain_bytes());
    out.emplace_back(sm.id, Bytes(plain.begin() + 8, plain.end()));
  }
  return out;
}

void OramClient::early_reshuffle(std::uint64_t bucket) {
  stats_.reshuffles += 1;
  auto blocks = load_bucket(bucket);
  std::vector<std::pair<ItemId, const Bytes*>> reals;
  for (auto& [id, payload] : blocks) {
    note(id, payload, false);
    reals.emplace_back(id, &payload);
  }
  std::pair<BucketId, Bucket> w{BucketId{cfg_.tree, bucket}, seal_bucket(bucket, reals)};
  store_.write_buckets(std::span(&w, 1));
}

void OramClient::deterministic_evict() {
  evict_path(eviction_leaf(evict_counter_, cfg_.L));
  evict_counter_ += 1;
}

void OramClient::evict_path(std::uint32_t leaf) {
  stats_.evictions += 1;
  const int L = cfg_.L;
  for (int l = 0; l <= L; ++l) {
    for (auto& [id, payload] : load_bucket(bucket_on_path(leaf, l, L))) {
      note(id, payload, false);
      auto pit = pos_.find(id);
      if (pit == pos_.end()) continue;
      stash_[id] = StashEntry{std::move(payload), pit->second};
    }
  }

  // Deepest level at which each stash block may live on this path.
  std::vector<std::vector<ItemId>> by_level(L + 1);
  for (const auto& [id, e] : stash_) {
    std::uint32_t diff = e.leaf ^ leaf;
    int common = L;
    for (int l = 1; l <= L; ++l) {
      if ((diff >> (L - l)) != 0) {
        common = l - 1;
        break;
      }
    }
    by_level[common].push_back(id);
  }

  std::vector<std::pair<BucketId, Bucket>> writes;
  writes.reserve(L + 1);
  std::vector<ItemId> carry;
  for (int l = L; l >= 0; --l) {
    carry.insert(carry.end(), by_level[l].begin(), by_level[l].end());
    std::vector<std::pair<ItemId, const Bytes*>> reals;
    std::size_t take = std::min<std::size_t>(carry.size(), static_cast<std::size_t>(cfg_.Z));
    // Blocks that entered the carry list deepest go first.
    for (std::size_t i = 0; i < take; ++i) reals.emplace_back(carry[i], &stash_.at(carry[i]).payload);
    const std::uint64_t b = bucket_on_path(leaf, l, L);
    writes.emplace_back(BucketId{cfg_.tree, b}, seal_bucket(b, reals));
    for (std::size_t i = 0; i < take; ++i) stash_.erase(carry[i]);
    carry.erase(carry.begin(), carry.begin() + static_cast<std::ptrdiff_t>(take));
  }
  store_.write_buckets(writes);
}

void OramClient::run_dream(const DreamCallback& dream, LogicalTime clock) {
  for (const auto& [id, e] : stash_) note(id, e.payload, false);
  collecting_ = false;
  if (dream) {
    DreamContext ctx;
    ctx.tree = cfg_.tree;
    ctx.clock = clock;
    ctx.residents.reserve(materialized_.size());
    for (auto& [id, m] : materialized_) ctx.residents.push_back({id, std::move(m.payload), m.requested});
    materialized_.clear();
    dream(ctx);
  }
  materialized_.clear();
}

std::vector<std::optional<Bytes>> OramClient::batch_read(std::span<const ItemId> ids, const DreamCallback& dream,
                                                         LogicalTime clock) {
  const IoTotals before = store_.totals();
  online_bytes_ = 0;
  collecting_ = static_cast<bool>(dream);
  materialized_.clear();
  std::vector<std::optional<Bytes>> out(ids.size());
  std::vector<bool> seen_in_batch;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    // A repeated id would reveal itself by hitting the stash; read a dummy path
    // and copy the earlier result instead.
    bool repeat = false;
    for (std::size_t j = 0; j < i && !repeat; ++j) repeat = ids[j] == ids[i] && ids[i] != kDummyId;
    if (repeat) {
      access_one(kDummyId, nullptr, nullptr);
      for (std::size_t j = 0; j < i; ++j) {
        if (ids[j] == ids[i]) {
          out[i] = out[j];
          break;
        }
      }
    } else {
      access_one(ids[i], nullptr, &out[i]);
    }
  }
  run_dream(dream, clock);
  const IoTotals after = store_.totals();
  last_io_ = {online_bytes_, after.total_bytes() - before.total_bytes()};
  if (trace_) trace_->record_access(cfg_.tree, ids.size(), last_io_.total_bytes);
  return out;
}

void OramClient::insert(ItemId id, std::span<const std::uint8_t> payload, const DreamCallback& dream,
                        LogicalTime clock) {
  if (id == kDummyId) throw Error(Errc::DuplicateId, "reserved dummy id");
  if (payload.size() != cfg_.block_size) throw Error(Errc::LengthMismatch, "payload has wrong length");
  const IoTotals before = store_.totals();
  online_bytes_ = 0;
  collecting_ = static_cast<bool>(dream);
  materialized_.clear();
  Bytes copy(payload.begin(), payload.end());
  access_one(id, &copy, nullptr);
  run_dream(dream, clock);
  const IoTotals after = store_.totals();
  last_io_ = {online_bytes_, after.total_bytes() - before.total_bytes()};
  if (trace_) trace_->record_access(cfg_.tree, 1, last_io_.total_bytes);
}

bool OramClient::forget(ItemId id) {
  auto pit = pos_.find(id);
  if (pit == pos_.end()) return false;
  const std::uint32_t leaf = pit->second;
  pos_.erase(pit);
  if (stash_.erase(id) > 0) return true;
  for (int l = 0; l <= cfg_.L; ++l) {
    for (auto& sm : meta_[bucket_on_path(leaf, l, cfg_.L)].slots) {
      if (sm.real && sm.id == id) {
        sm.real = false;
        return true;
      }
    }
  }
  throw Error(Errc::IntegrityFailure, "forgotten block was not on its path");
}

crypto::Hash OramClient::recompute_root_from_storage() const {
  crypto::MerkleTree t(cfg_.L);
  for (std::uint64_t b = 0; b < cfg_.num_buckets(); ++b) {
    Bytes raw = store_.peek_raw(b);
    t.set_bucket(b, crypto::sha256(raw));
  }
  return t.root();
}

std::optional<std::uint64_t> OramClient::audit_storage() const {
  for (std::uint64_t b = 0; b < cfg_.num_buckets(); ++b) {
    if (!crypto::equal_ct(crypto::sha256(store_.peek_raw(b)), merkle_.bucket(b))) return b;
  }
  return std::nullopt;
}

Bytes OramClient::serialize_state() const {
  ByteWriter w;
  w.u8(static_cast<std::uint8_t>(cfg_.tree));
  w.u32(cfg_.L);
  w.u32(cfg_.Z);
  w.u32(cfg_.S);
  w.u32(cfg_.A);
  w.u64(cfg_.block_size);
  w.u64(evict_counter_);
  w.u64(round_);
  std::ostringstream rs;
  rs << rng_;
  w.str(rs.str());
  for (std::uint64_t b = 0; b < cfg_.num_buckets(); ++b) {
    const BucketMeta& m = meta_[b];
    w.u64(m.epoch);
    w.u32(m.count);
    for (const auto& s : m.slots) {
      w.u64(s.id);
      w.u8(static_cast<std::uint8_t>((s.real ? 1 : 0) | (s.valid ? 2 : 0)));
    }
    w.raw(merkle_.bucket(b));
  }
  std::vector<std::pair<ItemId, std::uint32_t>> pos(pos_.begin(), pos_.end());
  std::sort(pos.begin(), pos.end());
  w.u64(pos.size());
  for (const auto& [id, leaf] : pos) {
    w.u64(id);
    w.u32(leaf);
  }
  w.u64(stash_.size());
  for (const auto& [id, e] : stash_) {
    w.u64(id);
    w.u32(e.leaf);
    w.raw(e.payload);
  }
  return std::move(w).take();
}

void OramClient::load_state(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.u8() != static_cast<std::uint8_t>(cfg_.tree) || static_cast<int>(r.u32()) != cfg_.L ||
      static_cast<int>(r.u32()) != cfg_.Z || static_cast<int>(r.u32()) != cfg_.S ||
      static_cast<int>(r.u32()) != cfg_.A || r.u64() != cfg_.block_size) {
    throw Error(Errc::ConfigInvalid, "ORAM state does not match configuration");
  }
  evict_counter_ = r.u64();
  round_ = r.u64();
  std::istringstream rs(r.str());
  rs >> rng_;
  const int slots = cfg_.Z + cfg_.S;
  for (std::uint64_t b = 0; b < cfg_.num_buckets(); ++b) {
    BucketMeta& m = meta_[b];
    m.epoch = r.u64();
    m.count = r.u32();
    m.slots.assign(slots, SlotMeta{});
    for (auto& s : m.slots) {
      s.id = r.u64();
      std::uint8_t f = r.u8();
      s.real = f & 1;
      s.valid = f & 2;
    }
    crypto::Hash h;
    auto raw = r.raw(h.size());
    std::memcpy(h.data(), raw.data(), h.size());
    merkle_.set_bucket(b, h);
  }
  pos_.clear();
  for (auto n = r.u64(); n > 0; --n) {
    ItemId id = r.u64();
    pos_[id] = r.u32();
  }
  stash_.clear();
  for (auto n = r.u64(); n > 0; --n) {
    ItemId id = r.u64();
    StashEntry e;
    e.leaf = r.u32();
    auto p = r.raw(cfg_.block_size);
    e.payload.assign(p.begin(), p.end());
    stash_[id] = std::move(e);
  }
  if (!r.done()) throw Error(Errc::MalformedMetadata, "trailing bytes in ORAM state");
  stats_.stash_max = std::max(stats_.stash_max, stash_.size());
}

}  // namespace opal
