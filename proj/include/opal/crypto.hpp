#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "opal/common.hpp"

namespace opal::crypto {

using Hash = std::array<std::uint8_t, 32>;
using MacKey = std::array<std::uint8_t, 32>;
using EncKey = std::array<std::uint8_t, 16>;

inline constexpr std::size_t kTagLen = 16;
inline constexpr std::size_t kNonceLen = 12;

struct ClientSecret {
  std::array<std::uint8_t, 32> k{};
  std::uint64_t ctr = 0;

  static ClientSecret random();
  // Deterministic secret for reproducible runs. Not for production keys.
  static ClientSecret from_seed(std::uint64_t seed);
};

struct DerivedKeys {
  MacKey k_mac{};
  EncKey k_enc{};
};

DerivedKeys derive_keys(const ClientSecret& secret);

Hash sha256(std::span<const std::uint8_t> data);
Hash hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data);
void random_bytes(std::span<std::uint8_t> out);
bool equal_ct(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

// Raw AES-128-GCM. Output is ciphertext || tag.
Bytes aead_seal(const EncKey& key, std::span<const std::uint8_t, kNonceLen> nonce,
                std::span<const std::uint8_t> ad, std::span<const std::uint8_t> plaintext);
// Throws AuthFailure on any mismatch.
Bytes aead_open(const EncKey& key, std::span<const std::uint8_t, kNonceLen> nonce,
                std::span<const std::uint8_t> ad, std::span<const std::uint8_t> sealed);

// Identifies one slot write. Bumping the epoch on every rewrite of the
// bucket keeps nonces unique without storing them.
struct PositionNonce {
  std::uint8_t tree = 0;
  std::uint64_t bucket = 0;
  std::uint32_t slot = 0;
  std::uint64_t epoch = 0;

  std::array<std::uint8_t, kNonceLen> nonce() const;
  std::array<std::uint8_t, 21> associated_data() const;
};

Bytes seal_block(const DerivedKeys& keys, std::span<const std::uint8_t> plaintext,
                 const PositionNonce& pos, std::size_t block_size);
Bytes open_block(const DerivedKeys& keys, std::span<const std::uint8_t> ciphertext,
                 const PositionNonce& pos, std::size_t block_size);

// Fixed layout, 106 bytes:
//   [0,2)    version (=1)
//   [2,10)   ctr
//   [10,42)  root_ann
//   [42,74)  root_data
//   [74,106) tag = HMAC(k_mac, "opal.rollback" || bytes [0,74))
struct RollbackRecord {
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kEncodedSize = 106;
  static constexpr std::size_t kCtrOffset = 2;
  static constexpr std::size_t kRootAnnOffset = 10;
  static constexpr std::size_t kRootDataOffset = 42;
  static constexpr std::size_t kTagOffset = 74;

  std::uint64_t ctr = 0;
  Hash root_ann{};
  Hash root_data{};
  Hash tag{};

  Bytes encode() const;
  static RollbackRecord decode(std::span<const std::uint8_t> bytes);
};

RollbackRecord make_rollback_record(const DerivedKeys& keys, std::uint64_t ctr, const Hash& root_ann,
                                    const Hash& root_data);
bool rollback_tag_valid(const DerivedKeys& keys, const RollbackRecord& record);
// Throws BadTag, CounterMismatch or StaleState, in that order of precedence.
void verify_rollback_record(const DerivedKeys& keys, const RollbackRecord& record, std::uint64_t observed_ctr,
                            const Hash& observed_root_ann, const Hash& observed_root_data);

// Fixed layout:
//   [0,2)   version (=1)
//   [2,10)  instance id (bound as associated data)
//   [10,22) nonce
//   [22,..) AEAD(pad_size plaintext) || tag
// Plaintext: ctr u64 | state length u64 | state | zero padding up to pad_size.
struct Checkpoint {
  static constexpr std::uint16_t kVersion = 1;
  static constexpr std::size_t kHeaderSize = 22;
  static constexpr std::size_t kPlainHeader = 16;
  Bytes bytes;
};

Checkpoint seal_checkpoint(const DerivedKeys& keys, std::uint64_t ctr, std::span<const std::uint8_t> client_state,
                           std::size_t pad_size, std::uint64_t instance_id = 0);
struct OpenedCheckpoint {
  std::uint64_t ctr = 0;
  Bytes client_state;
};
OpenedCheckpoint open_checkpoint(const DerivedKeys& keys, const Checkpoint& cp, std::size_t pad_size,
                                 std::uint64_t instance_id = 0);

// Accepts iff incoming > last_accepted and advances last_accepted.
void accept_request_counter(std::uint64_t& last_accepted, std::uint64_t incoming);

// Merkle tree laid over a heap-ordered binary tree of buckets. Node i hashes
// its own bucket digest together with both children, so the root commits to
// every bucket.
class MerkleTree {
 public:
  MerkleTree() = default;
  explicit MerkleTree(int depth);

  int depth() const { return depth_; }
  std::size_t size() const { return leaf_.size(); }

  void set_bucket(std::uint64_t index, const Hash& bucket_digest);
  const Hash& bucket(std::uint64_t index) const { return leaf_.at(index); }
  Hash root() const { return node_.empty() ? Hash{} : node_[0]; }
  // Rebuilds internal nodes from bucket digests alone.
  Hash recompute() const;
  void rebuild();

  static Hash combine(const Hash& bucket_digest, const Hash& left, const Hash& right);

 private:
  int depth_ = -1;
  std::vector<Hash> leaf_;
  std::vector<Hash> node_;
};

}  // namespace opal::crypto
