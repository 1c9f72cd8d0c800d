#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "opal/common.hpp"

namespace opal {

enum class Tree : std::uint8_t { ANN = 0, Data = 1 };
const char* tree_name(Tree t);

struct BucketId {
  Tree tree = Tree::ANN;
  std::uint64_t index = 0;
  bool operator==(const BucketId&) const = default;
};

struct Geometry {
  int L = 0;
  int Z = 4;
  int S = 5;
  std::size_t slot_bytes = 0;  // ciphertext bytes per slot

  std::uint64_t num_buckets() const { return (std::uint64_t{1} << (L + 1)) - 1; }
  int slots_per_bucket() const { return Z + S; }
  // Serialized bucket: epoch (8 bytes) followed by Z+S slots.
  std::size_t bucket_bytes() const { return 8 + slot_bytes * static_cast<std::size_t>(Z + S); }
};

struct Bucket {
  std::uint64_t epoch = 0;
  std::vector<Bytes> slots;

  Bytes serialize() const;
  static Bucket parse(std::span<const std::uint8_t> bytes, const Geometry& g);
  bool operator==(const Bucket&) const = default;
};

// ---------------------------------------------------------------------------
// Trace

enum class EventKind : std::uint8_t { InterEnclaveCall = 0, OramAccess = 1 };

struct TraceEvent {
  EventKind kind = EventKind::InterEnclaveCall;
  std::optional<Tree> store;
  std::optional<std::uint64_t> batch_size;
  std::uint64_t byte_count = 0;
  std::uint64_t seq = 0;
};

// Equal kind, store and batch size at each position; call events also
// compare their padded byte_count since pad sizes are public.
bool structurally_equal(const TraceEvent& a, const TraceEvent& b);
// Index of the first divergent position, or nullopt when equivalent.
std::optional<std::size_t> first_divergence(std::span<const TraceEvent> a, std::span<const TraceEvent> b);

class TraceRecorder {
 public:
  std::uint64_t record_call(std::uint64_t padded_bytes);
  std::uint64_t record_access(Tree store, std::uint64_t batch_size, std::uint64_t bytes);

  std::vector<TraceEvent> events() const;
  std::vector<TraceEvent> events_since(std::size_t from) const;
  std::size_t size() const;
  void write_jsonl(std::ostream& out) const;

 private:
  mutable std::mutex mu_;
  std::vector<TraceEvent> events_;
  std::uint64_t next_seq_ = 0;
};

// ---------------------------------------------------------------------------
// Untrusted block storage

struct IoFragment {
  enum class Op : std::uint8_t { ReadBuckets, ReadSlot, WriteBuckets } op;
  Tree tree;
  std::uint64_t count;
  std::uint64_t bytes;
};

struct IoTotals {
  std::uint64_t bytes_read = 0;
  std::uint64_t bytes_written = 0;
  std::uint64_t bucket_reads = 0;
  std::uint64_t slot_reads = 0;
  std::uint64_t bucket_writes = 0;
  std::uint64_t total_bytes() const { return bytes_read + bytes_written; }
};

class BlockStorage {
 public:
  BlockStorage(Tree tree, Geometry g) : tree_(tree), geom_(g) {}
  virtual ~BlockStorage() = default;

  Tree tree() const { return tree_; }
  const Geometry& geometry() const { return geom_; }

  std::vector<Bucket> read_buckets(std::span<const BucketId> ids);
  void write_buckets(std::span<const std::pair<BucketId, Bucket>> pairs);
  // Single ciphertext slot; the unit of a Ring-style online read.
  Bytes read_slot(const BucketId& id, int slot);
  // Raw serialized bucket without logging, for hashing during recovery.
  Bytes peek_raw(std::uint64_t index) const { return load(index); }
  // Adversary hook: overwrite stored bytes directly (fuzzing, rollback).
  void tamper_raw(std::uint64_t index, std::span<const std::uint8_t> bytes) { store(index, bytes); }
  virtual void flush() {}

  // Whole-store image for snapshot/rollback experiments.
  Bytes snapshot() const;
  void restore_snapshot(std::span<const std::uint8_t> image);

  IoTotals totals() const;
  std::vector<IoFragment> recent_io() const;

 protected:
  virtual Bytes load(std::uint64_t index) const = 0;
  virtual Bytes load_range(std::uint64_t index, std::size_t offset, std::size_t len) const = 0;
  virtual void store(std::uint64_t index, std::span<const std::uint8_t> bytes) = 0;

 private:
  void check(const BucketId& id) const;
  void log(IoFragment f);

  Tree tree_;
  Geometry geom_;
  mutable std::mutex io_mu_;
  IoTotals totals_;
  std::deque<IoFragment> io_log_;
  static constexpr std::size_t kIoLogCap = 4096;
};

class MemoryStorage final : public BlockStorage {
 public:
  MemoryStorage(Tree tree, Geometry g);

 protected:
  Bytes load(std::uint64_t index) const override;
  Bytes load_range(std::uint64_t index, std::size_t offset, std::size_t len) const override;
  void store(std::uint64_t index, std::span<const std::uint8_t> bytes) override;

 private:
  Bytes data_;
};

// Single file: 32-byte header (magic "OPALTREE", version, L, Z, S, slot
// bytes) followed by buckets in heap order at a fixed stride.
class FileStorage final : public BlockStorage {
 public:
  static constexpr std::size_t kHeaderSize = 32;
  FileStorage(Tree tree, Geometry g, const std::filesystem::path& path, bool truncate = true);
  ~FileStorage() override;
  FileStorage(const FileStorage&) = delete;
  FileStorage& operator=(const FileStorage&) = delete;
  void flush() override;

 protected:
  Bytes load(std::uint64_t index) const override;
  Bytes load_range(std::uint64_t index, std::size_t offset, std::size_t len) const override;
  void store(std::uint64_t index, std::span<const std::uint8_t> bytes) override;

 private:
  int fd_ = -1;
  std::filesystem::path path_;
};

std::unique_ptr<BlockStorage> make_storage(Tree tree, Geometry g, const std::string& backend,
                                           const std::filesystem::path& dir = {}, bool truncate = true);

}  // namespace opal
