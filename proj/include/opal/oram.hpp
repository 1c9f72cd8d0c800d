#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <unordered_map>
#include <vector>

#include "opal/common.hpp"
#include "opal/crypto.hpp"
#include "opal/storage.hpp"

namespace opal {

inline constexpr ItemId kDummyId = ~ItemId{0};

struct OramConfig {
  Tree tree = Tree::ANN;
  int L = 14;
  int Z = 4;
  int S = 5;
  int A = 3;
  std::size_t block_size = 256;  // plaintext payload bytes
  std::size_t stash_limit = 1u << 16;
  std::uint64_t seed = 1;

  void validate() const;
  std::uint64_t num_buckets() const { return (std::uint64_t{1} << (L + 1)) - 1; }
  std::uint64_t num_leaves() const { return std::uint64_t{1} << L; }
  std::uint64_t slot_capacity() const { return static_cast<std::uint64_t>(Z) * num_buckets(); }
  std::uint64_t usable_capacity() const { return static_cast<std::uint64_t>(Z) * num_leaves(); }
  std::size_t slot_plain_bytes() const { return 8 + block_size; }
  std::size_t slot_cipher_bytes() const { return slot_plain_bytes() + crypto::kTagLen; }
  Geometry geometry() const { return Geometry{L, Z, S, slot_cipher_bytes()}; }
};

struct ResidentBlock {
  ItemId id = kDummyId;
  Bytes payload;
  bool requested = false;
};

// Everything a maintenance callback may act on: blocks already inside the
// trust boundary. It has no handle to storage.
struct DreamContext {
  Tree tree = Tree::ANN;
  LogicalTime clock = 0;
  std::vector<ResidentBlock> residents;
};
using DreamCallback = std::function<void(DreamContext&)>;

struct OramStats {
  std::uint64_t accesses = 0;
  std::uint64_t evictions = 0;
  std::uint64_t reshuffles = 0;
  std::size_t stash_max = 0;
};

struct BatchIo {
  std::uint64_t online_bytes = 0;  // slot reads on the requested paths
  std::uint64_t total_bytes = 0;   // including eviction and reshuffle traffic
};

class OramClient {
 public:
  // initialize=false attaches to an already written tree; call load_state next.
  OramClient(OramConfig cfg, BlockStorage& store, const crypto::DerivedKeys& keys, TraceRecorder* trace = nullptr,
             bool initialize = true);

  // One logical access of public batch size ids.size(). kDummyId and ids
  // not present read a uniformly random path instead.
  std::vector<std::optional<Bytes>> batch_read(std::span<const ItemId> ids, const DreamCallback& dream = {},
                                               LogicalTime clock = 0);
  // Batch of one; overwrites if the id is live.
  void insert(ItemId id, std::span<const std::uint8_t> payload, const DreamCallback& dream = {},
              LogicalTime clock = 0);

  // Metadata-only deletion: no storage traffic.
  bool forget(ItemId id);
  bool contains(ItemId id) const { return pos_.contains(id); }
  std::size_t live_blocks() const { return pos_.size(); }
  std::size_t stash_size() const { return stash_.size(); }
  const OramStats& stats() const { return stats_; }
  void reset_stash_max() { stats_.stash_max = stash_.size(); }
  BatchIo last_batch_io() const { return last_io_; }

  crypto::Hash root() const { return merkle_.root(); }
  crypto::Hash recompute_root() const { return merkle_.recompute(); }
  // Hashes every bucket on the device; ignores client-held digests.
  crypto::Hash recompute_root_from_storage() const;
  // Index of the first bucket whose stored bytes differ from the digest the
  // client recorded, if any.
  std::optional<std::uint64_t> audit_storage() const;

  // Scheduled eviction along the next reverse-lexicographic path.
  void deterministic_evict();
  // Evict along an explicit leaf (fuzzing and tests).
  void evict_path(std::uint32_t leaf);

  Bytes serialize_state() const;
  void load_state(std::span<const std::uint8_t> bytes);

  static std::uint32_t eviction_leaf(std::uint64_t g, int L);
  static std::uint64_t bucket_on_path(std::uint32_t leaf, int level, int L) {
    return ((std::uint64_t{1} << level) - 1) + (static_cast<std::uint64_t>(leaf) >> (L - level));
  }
  std::vector<std::uint64_t> path(std::uint32_t leaf) const;

  const OramConfig& config() const { return cfg_; }
  BlockStorage& storage() { return store_; }

 private:
  struct SlotMeta {
    ItemId id = kDummyId;  // id sealed in the slot
    bool real = false;     // holds a live block
    bool valid = true;     // unread since the bucket was written
  };
  struct BucketMeta {
    std::uint64_t epoch = 0;
    std::uint32_t count = 0;
    std::vector<SlotMeta> slots;
  };
  struct StashEntry {
    Bytes payload;
    std::uint32_t leaf = 0;
  };
  struct Materialized {
    Bytes payload;
    bool requested = false;
  };

  std::uint32_t random_leaf();
  std::optional<Bytes> read_path(std::uint32_t leaf, ItemId target);
  void access_one(ItemId id, const Bytes* write_payload, std::optional<Bytes>* out);
  void after_access(std::uint32_t leaf);
  void early_reshuffle(std::uint64_t bucket);
  // Reads a whole bucket, verifies its digest, returns decrypted live blocks.
  std::vector<std::pair<ItemId, Bytes>> load_bucket(std::uint64_t bucket);
  Bucket seal_bucket(std::uint64_t bucket, const std::vector<std::pair<ItemId, const Bytes*>>& reals);
  Bytes slot_plaintext(ItemId id, const Bytes* payload) const;
  void note(ItemId id, const Bytes& payload, bool requested);
  void run_dream(const DreamCallback& dream, LogicalTime clock);
  void check_stash();

  OramConfig cfg_;
  BlockStorage& store_;
  crypto::DerivedKeys keys_;
  TraceRecorder* trace_;
  std::mt19937_64 rng_;

  std::vector<BucketMeta> meta_;
  crypto::MerkleTree merkle_;
  std::unordered_map<ItemId, std::uint32_t> pos_;
  std::map<ItemId, StashEntry> stash_;
  std::uint64_t evict_counter_ = 0;
  std::uint64_t round_ = 0;

  OramStats stats_;
  BatchIo last_io_;
  std::uint64_t online_bytes_ = 0;
  std::map<ItemId, Materialized> materialized_;
  bool collecting_ = false;
};

}  // namespace opal
