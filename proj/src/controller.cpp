#include "opal/controller.hpp"

#include <algorithm>
#include <cstring>
#include <set>
#include <unordered_set>

#include "opal/codec.hpp"

namespace opal {

std::size_t PadSizes::of(CallClass c) const {
  switch (c) {
    case CallClass::Traverse: return traverse;
    case CallClass::Embed: return embed;
    case CallClass::Synthesize: return synthesize;
    case CallClass::Summarize: return summarize;
  }
  return 0;
}

namespace {

int tix(Tree t) { return t == Tree::ANN ? 0 : 1; }

OramConfig oram_config(const ControllerConfig& cfg, Tree t) {
  OramConfig o;
  o.tree = t;
  o.L = cfg.pub.L;
  o.Z = cfg.pub.Z;
  o.S = cfg.S;
  o.A = cfg.A;
  o.block_size = t == Tree::ANN ? cfg.ann_block() : cfg.data_block;
  o.stash_limit = cfg.stash_limit;
  o.seed = cfg.seed * 2 + static_cast<std::uint64_t>(tix(t)) + 1;
  return o;
}

class OramBackend final : public MemoryBackend {
 public:
  OramBackend(const ControllerConfig& cfg, const crypto::DerivedKeys& keys, TraceRecorder* trace, bool initialize)
      : keys_(keys), trace_(trace) {
    for (Tree t : {Tree::ANN, Tree::Data}) {
      cfgs_[tix(t)] = oram_config(cfg, t);
      stores_[tix(t)] = make_storage(t, cfgs_[tix(t)].geometry(), cfg.backend, cfg.dir, initialize);
      clients_[tix(t)] = std::make_unique<OramClient>(cfgs_[tix(t)], *stores_[tix(t)], keys_, trace_, initialize);
    }
  }

  std::vector<std::optional<Bytes>> read(Tree t, std::span<const ItemId> ids, const DreamCallback& dream,
                                         LogicalTime clock) override {
    return clients_[tix(t)]->batch_read(ids, dream, clock);
  }
  void write(Tree t, ItemId id, std::span<const std::uint8_t> payload, const DreamCallback& dream,
             LogicalTime clock) override {
    clients_[tix(t)]->insert(id, payload, dream, clock);
  }
  void forget(Tree t, ItemId id) override { clients_[tix(t)]->forget(id); }
  crypto::Hash root(Tree t) const override { return clients_[tix(t)]->root(); }
  crypto::Hash root_from_storage(Tree t) const override { return clients_[tix(t)]->recompute_root_from_storage(); }
  std::optional<std::uint64_t> audit(Tree t) const override { return clients_[tix(t)]->audit_storage(); }

  Bytes serialize() const override {
    ByteWriter w;
    for (const auto& c : clients_) w.bytes(c->serialize_state());
    return std::move(w).take();
  }
  void load(std::span<const std::uint8_t> bytes) override {
    ByteReader r(bytes);
    for (auto& c : clients_) c->load_state(r.bytes());
    if (!r.done()) throw Error(Errc::MalformedMetadata, "trailing bytes in backend state");
  }
  void detach() override {
    for (int i = 0; i < 2; ++i) {
      stores_[i]->flush();
      clients_[i] = std::make_unique<OramClient>(cfgs_[i], *stores_[i], keys_, trace_, false);
    }
  }
  std::size_t stash_size() const override { return clients_[0]->stash_size() + clients_[1]->stash_size(); }
  std::size_t stash_max() const override {
    return std::max(clients_[0]->stats().stash_max, clients_[1]->stats().stash_max);
  }
  void reset_stash_max() override {
    for (auto& c : clients_) c->reset_stash_max();
  }
  BatchIo last_io(Tree t) const override { return clients_[tix(t)]->last_batch_io(); }
  BlockStorage* storage(Tree t) override { return stores_[tix(t)].get(); }
  OramClient* oram(Tree t) override { return clients_[tix(t)].get(); }

 private:
  crypto::DerivedKeys keys_;
  TraceRecorder* trace_;
  OramConfig cfgs_[2];
  std::unique_ptr<BlockStorage> stores_[2];
  std::unique_ptr<OramClient> clients_[2];
};

// Lower bound: the host sees exactly which items are touched.
class PlaintextBackend final : public MemoryBackend {
 public:
  explicit PlaintextBackend(TraceRecorder* trace) : trace_(trace) {}

  std::vector<std::optional<Bytes>> read(Tree t, std::span<const ItemId> ids, const DreamCallback& dream,
                                         LogicalTime clock) override {
    auto& m = maps_[tix(t)];
    std::vector<std::optional<Bytes>> out(ids.size());
    DreamContext ctx{t, clock, {}};
    std::unordered_set<ItemId> seen;
    std::uint64_t bytes = 0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = m.find(ids[i]);
      if (it == m.end()) continue;
      out[i] = it->second;
      bytes += it->second.size();
      if (seen.insert(ids[i]).second) ctx.residents.push_back({ids[i], it->second, true});
    }
    last_[tix(t)] = {bytes, bytes};
    if (trace_) trace_->record_access(t, ids.size(), bytes);
    if (dream) dream(ctx);
    return out;
  }
  void write(Tree t, ItemId id, std::span<const std::uint8_t> payload, const DreamCallback& dream,
             LogicalTime clock) override {
    maps_[tix(t)][id] = Bytes(payload.begin(), payload.end());
    last_[tix(t)] = {0, payload.size()};
    if (trace_) trace_->record_access(t, 1, payload.size());
    if (dream) {
      DreamContext ctx{t, clock, {{id, Bytes(payload.begin(), payload.end()), false}}};
      dream(ctx);
    }
  }
  void forget(Tree t, ItemId id) override { maps_[tix(t)].erase(id); }
  Bytes serialize() const override { return {}; }
  void load(std::span<const std::uint8_t>) override {}
  BatchIo last_io(Tree t) const override { return last_[tix(t)]; }

 private:
  TraceRecorder* trace_;
  std::unordered_map<ItemId, Bytes> maps_[2];
  BatchIo last_[2];
};

// Full-scan baseline: every entry is encrypted at rest and every read
// decrypts the whole store.
class InMemoryBackend final : public MemoryBackend {
 public:
  InMemoryBackend(const ControllerConfig& cfg, const crypto::DerivedKeys& keys, TraceRecorder* trace)
      : keys_(keys), trace_(trace) {
    block_[0] = cfg.ann_block();
    block_[1] = cfg.data_block;
  }

  std::vector<std::optional<Bytes>> read(Tree t, std::span<const ItemId> ids, const DreamCallback& dream,
                                         LogicalTime clock) override {
    const int k = tix(t);
    std::unordered_map<ItemId, std::size_t> want;
    for (std::size_t i = 0; i < ids.size(); ++i) want.emplace(ids[i], i);
    DreamContext ctx{t, clock, {}};
    ctx.residents.reserve(entries_[k].size());
    std::unordered_map<ItemId, const Bytes*> found;
    for (const auto& e : entries_[k]) {
      Bytes plain = crypto::open_block(keys_, e.sealed, nonce(t, e), block_[k]);
      ctx.residents.push_back({e.id, std::move(plain), want.contains(e.id)});
    }
    for (const auto& r : ctx.residents) {
      if (r.requested) found[r.id] = &r.payload;
    }
    std::vector<std::optional<Bytes>> out(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      auto it = found.find(ids[i]);
      if (it != found.end()) out[i] = *it->second;
    }
    const std::uint64_t bytes = entries_[k].size() * entry_bytes(k);
    last_[k] = {bytes, bytes};
    if (trace_) trace_->record_access(t, ids.size(), bytes);
    if (dream) dream(ctx);
    return out;
  }

  // Charged as a read-modify-write of the whole store; only the new entry is
  // actually sealed.
  void write(Tree t, ItemId id, std::span<const std::uint8_t> payload, const DreamCallback& dream,
             LogicalTime clock) override {
    const int k = tix(t);
    put(t, id, payload);
    const std::uint64_t bytes = 2 * entries_[k].size() * entry_bytes(k);
    last_[k] = {0, bytes};
    if (trace_) trace_->record_access(t, 1, bytes);
    if (dream) {
      DreamContext ctx{t, clock, {{id, Bytes(payload.begin(), payload.end()), false}}};
      dream(ctx);
    }
  }
  void forget(Tree t, ItemId id) override {
    const int k = tix(t);
    auto it = index_[k].find(id);
    if (it == index_[k].end()) return;
    std::size_t at = it->second;
    index_[k].erase(it);
    if (at + 1 != entries_[k].size()) {
      entries_[k][at] = std::move(entries_[k].back());
      index_[k][entries_[k][at].id] = at;
    }
    entries_[k].pop_back();
  }
  Bytes serialize() const override { return {}; }
  void load(std::span<const std::uint8_t>) override {}
  BatchIo last_io(Tree t) const override { return last_[tix(t)]; }

 private:
  struct Entry {
    ItemId id;
    std::uint64_t epoch;
    Bytes sealed;
  };
  crypto::PositionNonce nonce(Tree t, const Entry& e) const {
    return {static_cast<std::uint8_t>(static_cast<int>(t) + 2), e.id, 0, e.epoch};
  }
  std::size_t entry_bytes(int k) const { return 16 + block_[k] + crypto::kTagLen; }
  void put(Tree t, ItemId id, std::span<const std::uint8_t> payload) {
    const int k = tix(t);
    if (payload.size() != block_[k]) throw Error(Errc::LengthMismatch, "payload has wrong length");
    Entry e{id, ++epoch_, {}};
    e.sealed = crypto::seal_block(keys_, payload, nonce(t, e), block_[k]);
    auto it = index_[k].find(id);
    if (it != index_[k].end()) {
      entries_[k][it->second] = std::move(e);
    } else {
      index_[k][id] = entries_[k].size();
      entries_[k].push_back(std::move(e));
    }
  }

  crypto::DerivedKeys keys_;
  TraceRecorder* trace_;
  std::size_t block_[2];
  std::vector<Entry> entries_[2];
  std::unordered_map<ItemId, std::size_t> index_[2];
  std::uint64_t epoch_ = 0;
  BatchIo last_[2];
};

}  // namespace

std::unique_ptr<MemoryBackend> make_backend(const ControllerConfig& cfg, const crypto::DerivedKeys& keys,
                                            TraceRecorder* trace, bool initialize) {
  switch (cfg.store) {
    case StoreKind::Oram: return std::make_unique<OramBackend>(cfg, keys, trace, initialize);
    case StoreKind::Plaintext: return std::make_unique<PlaintextBackend>(trace);
    case StoreKind::InMemory: return std::make_unique<InMemoryBackend>(cfg, keys, trace);
  }
  throw Error(Errc::ConfigInvalid, "unknown store kind");
}

Controller::Controller(ControllerConfig cfg, std::unique_ptr<EnclaveInterface> enclaves, TraceRecorder* trace,
                       crypto::ClientSecret secret)
    : cfg_(std::move(cfg)),
      enclaves_(std::move(enclaves)),
      trace_(trace),
      keys_(crypto::derive_keys(secret)),
      ivf_(cfg_.ivf),
      dreamer_(cfg_.ttl(), cfg_.retention.n_target) {
  if (!enclaves_) throw Error(Errc::ConfigInvalid, "controller needs enclaves");
  if (enclaves_->dim() != cfg_.ivf.dim) throw Error(Errc::ConfigInvalid, "embedding dimension mismatch");
  if (cfg_.pub.K == 0 || cfg_.pub.n < cfg_.pub.K || cfg_.pub.T == 0) {
    throw Error(Errc::ConfigInvalid, "need 0 < K <= n and T > 0");
  }
  if (cfg_.data_block < 3) throw Error(Errc::ConfigInvalid, "data block too small");
  backend_ = make_backend(cfg_, keys_, trace_, true);
  last_ctr_ = secret.ctr;
  record_ = crypto::make_rollback_record(keys_, last_ctr_, backend_->root(Tree::ANN), backend_->root(Tree::Data));
}

void Controller::require_resident() const {
  if (evicted_) throw Error(Errc::StaleState, "controller state is evicted; restore first");
}

void Controller::cross(CallClass cls, std::size_t payload_bytes) {
  const std::size_t pad = cfg_.pads.of(cls);
  if (payload_bytes > pad) {
    throw Error(Errc::PadOverflow, std::to_string(payload_bytes) + " bytes exceed pad of " + std::to_string(pad));
  }
  if (trace_) trace_->record_call(pad);
}

Bytes Controller::encode_vector(const ann::Vec& v) const {
  Bytes out(cfg_.ann_block());
  std::memcpy(out.data(), v.data(), out.size());
  return out;
}

ann::Vec Controller::decode_vector(std::span<const std::uint8_t> b) const {
  ann::Vec v(cfg_.ivf.dim);
  std::memcpy(v.data(), b.data(), std::min(b.size(), static_cast<std::size_t>(v.size()) * sizeof(float)));
  return v;
}

Bytes Controller::encode_text(std::string_view text) const {
  const std::size_t n = std::min(text.size(), cfg_.data_block - 2);
  Bytes out(cfg_.data_block, 0);
  out[0] = static_cast<std::uint8_t>(n >> 8);
  out[1] = static_cast<std::uint8_t>(n);
  std::memcpy(out.data() + 2, text.data(), n);
  return out;
}

std::string Controller::decode_text(std::span<const std::uint8_t> b) const {
  if (b.size() < 2) return {};
  std::size_t n = (static_cast<std::size_t>(b[0]) << 8) | b[1];
  n = std::min(n, b.size() - 2);
  return std::string(reinterpret_cast<const char*>(b.data() + 2), n);
}

void Controller::erase_item(ItemId id) {
  ivf_.remove(id);
  kg_.remove(id);
  backend_->forget(Tree::ANN, id);
  backend_->forget(Tree::Data, id);
  recent_text_.erase(id);
  if (on_expire_) on_expire_(id, clock_.now());
}

DreamCallback Controller::make_dream(bool refresh) {
  if (!cfg_.dreaming) return {};
  return [this, refresh](DreamContext& ctx) {
    DreamHooks h;
    h.expiry = [this](ItemId id) { return ivf_.expiry(id); };
    h.set_expiry = [this](ItemId id, LogicalTime t) { ivf_.set_expiry(id, t); };
    h.live_count = [this] { return ivf_.size(); };
    h.erase = [this](ItemId id) { erase_item(id); };
    if (ctx.tree == Tree::ANN) {
      h.resolve = [this](const DreamContext& c) {
        std::vector<std::pair<ItemId, ann::Vec>> vecs;
        for (const auto& r : c.residents) {
          if (ivf_.is_pending(r.id)) vecs.emplace_back(r.id, decode_vector(r.payload));
        }
        return vecs.empty() ? std::size_t{0} : ivf_.resolve_pending(vecs);
      };
    }
    metrics_.dream += dreamer_.run(ctx, h, refresh);
  };
}

void Controller::finish_request(std::uint64_t ctr) {
  record_ = crypto::make_rollback_record(keys_, ctr, backend_->root(Tree::ANN), backend_->root(Tree::Data));
}

QueryResult Controller::query(const QueryRequest& q, std::uint64_t ctr) {
  require_resident();
  crypto::accept_request_counter(last_ctr_, ctr);
  const std::size_t n = cfg_.pub.n;
  const std::size_t K = cfg_.pub.K;

  FilterSet filters = enclaves_->traverse(q.text, q.timestamp);
  cross(CallClass::Traverse, q.text.size() + 16);

  TraverseResult tr;
  if (cfg_.mode == RetrievalMode::KgFiltered) {
    tr = kg_.traverse(filters, cfg_.min_candidates.value_or(n));
  } else {
    tr = kg_.traverse(FilterSet{}, 0);
  }

  ann::Vec e = enclaves_->embed(q.text);
  cross(CallClass::Embed, q.text.size() + e.size() * sizeof(float));

  auto cands = ivf_.score(e, &tr.admissible, n);
  std::vector<ItemId> ids;
  ids.reserve(n);
  for (const auto& c : cands) ids.push_back(c.id);
  auto fetched = backend_->read(Tree::ANN, ids, make_dream(false), clock_.now());
  std::vector<std::pair<ItemId, ann::Vec>> vecs;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (fetched[i] && ids[i] != kDummyId) vecs.emplace_back(ids[i], decode_vector(*fetched[i]));
  }
  std::vector<ItemId> top = ann::IvfIndex::rerank(vecs, e, K);

  std::vector<ItemId> data_ids = top;
  data_ids.resize(K, kDummyId);
  auto texts = backend_->read(Tree::Data, data_ids, make_dream(true), clock_.now());
  std::vector<std::pair<ItemId, std::string>> chunks;
  std::size_t payload = q.text.size();
  for (std::size_t i = 0; i < top.size(); ++i) {
    if (!texts[i]) continue;
    chunks.emplace_back(top[i], decode_text(*texts[i]));
    payload += chunks.back().second.size() + 16;
  }
  QueryResult res;
  res.answer = enclaves_->synthesize(q.text, chunks);
  cross(CallClass::Synthesize, std::max(payload, res.answer.size()));
  for (const auto& c : chunks) res.top_k.push_back(c.first);
  res.admissible = tr.admissible.size();
  res.relaxation_level = tr.relaxation_level;

  clock_.tick();
  metrics_.queries += 1;
  finish_request(ctr);
  return res;
}

void Controller::ingest(const IngestRequest& d, std::uint64_t ctr) {
  require_resident();
  crypto::accept_request_counter(last_ctr_, ctr);
  ingest_one(d, false);
  finish_request(ctr);
}

void Controller::ingest_one(const IngestRequest& d, bool nested) {
  const ItemId id = d.meta.chunk_id;
  if (id == kDummyId || ivf_.contains(id) || kg_.contains(id)) {
    throw Error(Errc::DuplicateId, "item " + std::to_string(id) + " already stored");
  }
  if (!nested && id >= kSummaryBase) throw Error(Errc::DuplicateId, "id is in the summary range");
  kg_.update(d.meta);
  ann::Vec v = enclaves_->embed(d.text);
  cross(CallClass::Embed, d.text.size() + v.size() * sizeof(float));
  ivf_.insert(id, v, clock_.now() + dreamer_.ttl());
  backend_->write(Tree::ANN, id, encode_vector(v), make_dream(false), clock_.now());
  backend_->write(Tree::Data, id, encode_text(d.text), make_dream(false), clock_.now());
  clock_.tick();
  if (on_insert_) on_insert_(id, clock_.now(), v);
  if (nested) return;

  metrics_.ingests += 1;
  raw_ingests_ += 1;
  recent_text_[id] = d.text;
  auto window = kg_.recent(cfg_.pub.T);
  std::set<ItemId> keep(window.begin(), window.end());
  std::erase_if(recent_text_, [&](const auto& kv) { return !keep.contains(kv.first); });

  if (raw_ingests_ % cfg_.pub.T != 0) return;
  std::vector<std::string> texts;
  std::vector<ItemId> covered;
  std::size_t payload = 0;
  for (ItemId c : window) {
    auto it = recent_text_.find(c);
    if (it == recent_text_.end()) continue;
    texts.push_back(it->second);
    covered.push_back(c);
    payload += it->second.size() + 16;
  }
  std::string summary = enclaves_->summarize(texts);
  cross(CallClass::Summarize, std::max(payload, summary.size()));

  IngestRequest s;
  s.text = std::move(summary);
  s.meta.chunk_id = kSummaryBase + next_summary_++;
  s.meta.artifact_id = "summary-" + std::to_string(s.meta.chunk_id - kSummaryBase);
  s.meta.modality = d.meta.modality;
  s.meta.timestamp = d.meta.timestamp;
  s.meta.summary = true;
  s.meta.summarized = std::move(covered);
  ingest_one(s, true);
  metrics_.summaries += 1;
}

Bytes Controller::serialize_state() const {
  ByteWriter w;
  w.u32(1);
  w.u64(cfg_.pub.n);
  w.u64(cfg_.pub.K);
  w.u64(cfg_.pub.T);
  w.u32(static_cast<std::uint32_t>(cfg_.pub.L));
  w.u32(static_cast<std::uint32_t>(cfg_.pub.Z));
  w.u64(clock_.now());
  w.u64(last_ctr_);
  w.u64(raw_ingests_);
  w.u64(next_summary_);
  w.u64(metrics_.queries);
  w.u64(metrics_.ingests);
  w.u64(metrics_.summaries);
  const DreamReport& dr = dreamer_.totals();
  w.u64(dr.expired);
  w.u64(dr.refreshed);
  w.u64(dr.resolved);
  w.u64(recent_text_.size());
  for (const auto& [id, text] : recent_text_) {
    w.u64(id);
    w.str(text);
  }
  w.bytes(ivf_.serialize());
  w.bytes(kg_.serialize());
  w.bytes(backend_->serialize());
  return std::move(w).take();
}

void Controller::load_state(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (r.u32() != 1) throw Error(Errc::MalformedMetadata, "unknown controller state version");
  PublicParams p;
  p.n = r.u64();
  p.K = r.u64();
  p.T = r.u64();
  p.L = static_cast<int>(r.u32());
  p.Z = static_cast<int>(r.u32());
  if (!(p == cfg_.pub)) throw Error(Errc::ConfigInvalid, "checkpoint was sealed under other public parameters");
  clock_.set(r.u64());
  last_ctr_ = r.u64();
  raw_ingests_ = r.u64();
  next_summary_ = r.u64();
  metrics_.queries = r.u64();
  metrics_.ingests = r.u64();
  metrics_.summaries = r.u64();
  DreamReport dr;
  dr.expired = r.u64();
  dr.refreshed = r.u64();
  dr.resolved = r.u64();
  dreamer_.set_totals(dr);
  metrics_.dream = dr;
  recent_text_.clear();
  for (auto k = r.u64(); k > 0; --k) {
    ItemId id = r.u64();
    recent_text_[id] = r.str();
  }
  ivf_.deserialize(r.bytes());
  kg_.deserialize(r.bytes());
  backend_->load(r.bytes());
  if (!r.done()) throw Error(Errc::MalformedMetadata, "trailing bytes in controller state");
}

crypto::Checkpoint Controller::seal_and_evict() {
  require_resident();
  crypto::Checkpoint cp =
      crypto::seal_checkpoint(keys_, last_ctr_, serialize_state(), cfg_.checkpoint_pad, cfg_.instance_id);
  ivf_ = ann::IvfIndex(cfg_.ivf);
  kg_ = KnowledgeGraph{};
  recent_text_.clear();
  backend_->detach();
  evicted_ = true;
  return cp;
}

void Controller::restore(const crypto::Checkpoint& cp, const crypto::RollbackRecord& record,
                         std::uint64_t expected_ctr, VerifyMode mode) {
  auto opened = crypto::open_checkpoint(keys_, cp, cfg_.checkpoint_pad, cfg_.instance_id);
  if (!crypto::rollback_tag_valid(keys_, record)) throw Error(Errc::BadTag, "rollback record tag is invalid");
  if (record.ctr != expected_ctr) throw Error(Errc::CounterMismatch, "rollback record is not the latest");
  if (opened.ctr != record.ctr) throw Error(Errc::CounterMismatch, "checkpoint and record disagree");
  evicted_ = true;
  backend_->detach();
  load_state(opened.client_state);
  if (!crypto::equal_ct(backend_->root(Tree::ANN), record.root_ann) ||
      !crypto::equal_ct(backend_->root(Tree::Data), record.root_data)) {
    throw Error(Errc::StaleState, "checkpoint roots differ from the rollback record");
  }
  if (mode == VerifyMode::Full) {
    if (!crypto::equal_ct(backend_->root_from_storage(Tree::ANN), record.root_ann) ||
        !crypto::equal_ct(backend_->root_from_storage(Tree::Data), record.root_data)) {
      throw Error(Errc::StaleState, "storage does not match the rollback record");
    }
  }
  last_ctr_ = opened.ctr;
  record_ = record;
  evicted_ = false;
}

}  // namespace opal
