#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "opal/ann/ivf.hpp"
#include "opal/crypto.hpp"
#include "opal/dreaming.hpp"
#include "opal/enclaves.hpp"
#include "opal/kg.hpp"
#include "opal/oram.hpp"
#include "opal/storage.hpp"

namespace opal {

struct PublicParams {
  std::size_t n = 200;
  std::size_t K = 10;
  std::size_t T = 5;
  int L = 14;
  int Z = 4;
  bool operator==(const PublicParams&) const = default;
};

enum class CallClass : std::uint8_t { Traverse, Embed, Synthesize, Summarize };

struct PadSizes {
  std::size_t traverse = 4096;
  std::size_t embed = 4096;
  std::size_t synthesize = 16384;
  std::size_t summarize = 16384;
  std::size_t of(CallClass c) const;
};

enum class StoreKind : std::uint8_t { Oram, Plaintext, InMemory };
enum class RetrievalMode : std::uint8_t { KgFiltered, AnnOnly };

struct ControllerConfig {
  PublicParams pub;
  int S = 5;
  int A = 3;
  std::size_t data_block = 512;
  std::size_t stash_limit = 1u << 16;
  RetentionConfig retention{8192, 1.0, 1.0, 10};
  bool dreaming = true;
  PadSizes pads;
  std::size_t checkpoint_pad = 1u << 20;  // up to 64 MiB
  ann::IvfConfig ivf;
  std::optional<std::size_t> min_candidates;  // defaults to n
  StoreKind store = StoreKind::Oram;
  RetrievalMode mode = RetrievalMode::KgFiltered;
  std::string backend = "memory";  // memory | file
  std::filesystem::path dir;
  std::uint64_t seed = 1;
  std::uint64_t instance_id = 0;

  std::size_t ann_block() const { return static_cast<std::size_t>(ivf.dim) * sizeof(float); }
  std::uint64_t ttl() const { return compute_ttl(retention); }
};

struct IngestRequest {
  std::string text;
  ChunkMeta meta;  // meta.chunk_id is the item id
};

struct QueryRequest {
  std::string text;
  std::int64_t timestamp = 0;
};

struct QueryResult {
  std::string answer;
  std::vector<ItemId> top_k;  // reals only, rerank order
  std::size_t admissible = 0;
  int relaxation_level = 0;
};

enum class VerifyMode : std::uint8_t { Full, Lazy };

// Storage path behind the pipeline. The ORAM path is Opal; the others are
// the plaintext lower bound and the full-scan in-memory baseline.
class MemoryBackend {
 public:
  virtual ~MemoryBackend() = default;
  virtual std::vector<std::optional<Bytes>> read(Tree t, std::span<const ItemId> ids, const DreamCallback& dream,
                                                 LogicalTime clock) = 0;
  virtual void write(Tree t, ItemId id, std::span<const std::uint8_t> payload, const DreamCallback& dream,
                     LogicalTime clock) = 0;
  virtual void forget(Tree t, ItemId id) = 0;
  virtual crypto::Hash root(Tree) const { return {}; }
  virtual crypto::Hash root_from_storage(Tree) const { return {}; }
  virtual std::optional<std::uint64_t> audit(Tree) const { return std::nullopt; }
  virtual Bytes serialize() const = 0;
  virtual void load(std::span<const std::uint8_t> bytes) = 0;
  virtual std::size_t stash_size() const { return 0; }
  virtual std::size_t stash_max() const { return 0; }
  virtual void reset_stash_max() {}
  virtual BatchIo last_io(Tree) const = 0;
  // Drops client-side state; storage stays. load() follows.
  virtual void detach() {}
  virtual BlockStorage* storage(Tree) { return nullptr; }
  virtual OramClient* oram(Tree) { return nullptr; }
};

std::unique_ptr<MemoryBackend> make_backend(const ControllerConfig& cfg, const crypto::DerivedKeys& keys,
                                            TraceRecorder* trace, bool initialize = true);

struct ControllerMetrics {
  std::uint64_t queries = 0;
  std::uint64_t ingests = 0;
  std::uint64_t summaries = 0;
  DreamReport dream;
};

class Controller {
 public:
  using ExpiryObserver = std::function<void(ItemId, LogicalTime)>;
  using InsertObserver = std::function<void(ItemId, LogicalTime, const ann::Vec&)>;

  Controller(ControllerConfig cfg, std::unique_ptr<EnclaveInterface> enclaves, TraceRecorder* trace,
             crypto::ClientSecret secret);

  QueryResult query(const QueryRequest& q, std::uint64_t ctr);
  void ingest(const IngestRequest& d, std::uint64_t ctr);

  // Seals client state into a fixed-size checkpoint and drops it from memory.
  crypto::Checkpoint seal_and_evict();
  void restore(const crypto::Checkpoint& cp, const crypto::RollbackRecord& record, std::uint64_t expected_ctr,
               VerifyMode mode = VerifyMode::Full);
  bool evicted() const { return evicted_; }

  // The host-held rollback record for the last accepted request.
  const crypto::RollbackRecord& record() const { return record_; }
  std::uint64_t last_ctr() const { return last_ctr_; }
  LogicalTime clock() const { return clock_.now(); }
  std::size_t live_items() const { return ivf_.size(); }
  std::size_t live_summaries() const { return kg_.summary_count(); }
  bool is_summary(ItemId id) const { return id >= kSummaryBase; }

  const ControllerConfig& config() const { return cfg_; }
  const ann::IvfIndex& index() const { return ivf_; }
  const KnowledgeGraph& graph() const { return kg_; }
  const ControllerMetrics& metrics() const { return metrics_; }
  const crypto::DerivedKeys& keys() const { return keys_; }
  MemoryBackend& backend() { return *backend_; }
  std::uint64_t ttl() const { return dreamer_.ttl(); }

  void set_expiry_observer(ExpiryObserver obs) { on_expire_ = std::move(obs); }
  // Harness hooks: deletions by dreaming, and every stored item with its vector.
  void set_insert_observer(InsertObserver obs) { on_insert_ = std::move(obs); }

  Bytes serialize_state() const;
  void load_state(std::span<const std::uint8_t> bytes);

  static constexpr ItemId kSummaryBase = ItemId{1} << 62;

 private:
  void cross(CallClass cls, std::size_t payload_bytes);
  void ingest_one(const IngestRequest& d, bool nested);
  void erase_item(ItemId id);
  DreamCallback make_dream(bool refresh);
  Bytes encode_vector(const ann::Vec& v) const;
  ann::Vec decode_vector(std::span<const std::uint8_t> b) const;
  Bytes encode_text(std::string_view text) const;
  std::string decode_text(std::span<const std::uint8_t> b) const;
  void finish_request(std::uint64_t ctr);
  void require_resident() const;

  ControllerConfig cfg_;
  std::unique_ptr<EnclaveInterface> enclaves_;
  TraceRecorder* trace_;
  crypto::DerivedKeys keys_;
  std::unique_ptr<MemoryBackend> backend_;

  ann::IvfIndex ivf_;
  KnowledgeGraph kg_;
  Dreamer dreamer_;
  LogicalClock clock_;
  std::uint64_t last_ctr_ = 0;
  std::uint64_t raw_ingests_ = 0;
  std::uint64_t next_summary_ = 0;
  std::map<ItemId, std::string> recent_text_;  // texts of the most recent raw chunks
  crypto::RollbackRecord record_;
  ControllerMetrics metrics_;
  bool evicted_ = false;

  ExpiryObserver on_expire_;
  InsertObserver on_insert_;
};

}  // namespace opal
