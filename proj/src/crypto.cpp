#include "opal/crypto.hpp"

#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/kdf.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <cstring>
#include <memory>
#include <random>
#include <string_view>

#include "opal/codec.hpp"

namespace opal::crypto {

namespace {

struct CipherCtxDeleter {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};

// Per-thread GCM contexts; the key schedule is redone only when the key changes.
EVP_CIPHER_CTX* cipher_ctx(bool encrypt, const EncKey& key) {
  struct Keyed {
    std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter> ctx{EVP_CIPHER_CTX_new()};
    EncKey key{};
    bool ready = false;
  };
  thread_local Keyed slots[2];
  Keyed& k = slots[encrypt ? 1 : 0];
  if (!k.ready || k.key != key) {
    const int ok = encrypt ? EVP_EncryptInit_ex(k.ctx.get(), EVP_aes_128_gcm(), nullptr, key.data(), nullptr)
                           : EVP_DecryptInit_ex(k.ctx.get(), EVP_aes_128_gcm(), nullptr, key.data(), nullptr);
    if (ok != 1) throw Error(Errc::ConfigInvalid, "AES-GCM key setup failed");
    k.key = key;
    k.ready = true;
  }
  return k.ctx.get();
}

std::span<const std::uint8_t> as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

template <std::size_t N>
std::array<std::uint8_t, N> hkdf(std::span<const std::uint8_t> ikm, std::string_view info) {
  std::array<std::uint8_t, N> out{};
  std::unique_ptr<EVP_PKEY_CTX, decltype(&EVP_PKEY_CTX_free)> pctx(EVP_PKEY_CTX_new_id(EVP_PKEY_HKDF, nullptr),
                                                                     EVP_PKEY_CTX_free);
  static constexpr std::string_view kSalt = "opal.kdf.v1";
  std::size_t len = N;
  if (!pctx || EVP_PKEY_derive_init(pctx.get()) <= 0 || EVP_PKEY_CTX_set_hkdf_md(pctx.get(), EVP_sha256()) <= 0 ||
      EVP_PKEY_CTX_set1_hkdf_salt(pctx.get(), reinterpret_cast<const unsigned char*>(kSalt.data()),
                                  static_cast<int>(kSalt.size())) <= 0 ||
      EVP_PKEY_CTX_set1_hkdf_key(pctx.get(), ikm.data(), static_cast<int>(ikm.size())) <= 0 ||
      EVP_PKEY_CTX_add1_hkdf_info(pctx.get(), reinterpret_cast<const unsigned char*>(info.data()),
                                  static_cast<int>(info.size())) <= 0 ||
      EVP_PKEY_derive(pctx.get(), out.data(), &len) <= 0 || len != N) {
    throw Error(Errc::ConfigInvalid, "HKDF failed");
  }
  return out;
}

}  // namespace

ClientSecret ClientSecret::random() {
  ClientSecret s;
  random_bytes(s.k);
  return s;
}

ClientSecret ClientSecret::from_seed(std::uint64_t seed) {
  ClientSecret s;
  std::mt19937_64 rng(seed ^ 0x6f70616c6b657931ULL);
  for (std::size_t i = 0; i < s.k.size(); i += 8) {
    std::uint64_t v = rng();
    std::memcpy(s.k.data() + i, &v, 8);
  }
  return s;
}

DerivedKeys derive_keys(const ClientSecret& secret) {
  DerivedKeys keys;
  keys.k_mac = hkdf<32>(secret.k, "opal.k_mac");
  keys.k_enc = hkdf<16>(secret.k, "opal.k_enc");
  return keys;
}

Hash sha256(std::span<const std::uint8_t> data) {
  // The one-shot helper refetches the algorithm on every call.
  thread_local std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  Hash h;
  unsigned int len = 0;
  if (EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), h.data(), &len) != 1) {
    throw Error(Errc::ConfigInvalid, "SHA-256 failed");
  }
  return h;
}

Hash hmac_sha256(std::span<const std::uint8_t> key, std::span<const std::uint8_t> data) {
  Hash h;
  unsigned int len = 0;
  if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(), h.data(), &len) ||
      len != h.size()) {
    throw Error(Errc::ConfigInvalid, "HMAC failed");
  }
  return h;
}

void random_bytes(std::span<std::uint8_t> out) {
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) throw Error(Errc::ConfigInvalid, "RAND_bytes failed");
}

bool equal_ct(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  return a.size() == b.size() && CRYPTO_memcmp(a.data(), b.data(), a.size()) == 0;
}

Bytes aead_seal(const EncKey& key, std::span<const std::uint8_t, kNonceLen> nonce, std::span<const std::uint8_t> ad,
                std::span<const std::uint8_t> plaintext) {
  EVP_CIPHER_CTX* ctx = cipher_ctx(true, key);
  Bytes out(plaintext.size() + kTagLen);
  int len = 0;
  bool ok = EVP_EncryptInit_ex(ctx, nullptr, nullptr, nullptr, nonce.data()) == 1;
  ok = ok && (ad.empty() || EVP_EncryptUpdate(ctx, nullptr, &len, ad.data(), static_cast<int>(ad.size())) == 1);
  ok = ok && EVP_EncryptUpdate(ctx, out.data(), &len, plaintext.data(), static_cast<int>(plaintext.size())) == 1;
  ok = ok && EVP_EncryptFinal_ex(ctx, out.data() + len, &len) == 1;
  ok = ok && EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_GET_TAG, kTagLen, out.data() + plaintext.size()) == 1;
  if (!ok) throw Error(Errc::ConfigInvalid, "AES-GCM seal failed");
  return out;
}

Bytes aead_open(const EncKey& key, std::span<const std::uint8_t, kNonceLen> nonce, std::span<const std::uint8_t> ad,
                std::span<const std::uint8_t> sealed) {
  if (sealed.size() < kTagLen) throw Error(Errc::AuthFailure, "ciphertext shorter than tag");
  EVP_CIPHER_CTX* ctx = cipher_ctx(false, key);
  const std::size_t n = sealed.size() - kTagLen;
  Bytes out(n);
  std::array<std::uint8_t, kTagLen> tag;
  std::memcpy(tag.data(), sealed.data() + n, kTagLen);
  int len = 0;
  bool ok = EVP_DecryptInit_ex(ctx, nullptr, nullptr, nullptr, nonce.data()) == 1;
  ok = ok && (ad.empty() || EVP_DecryptUpdate(ctx, nullptr, &len, ad.data(), static_cast<int>(ad.size())) == 1);
  ok = ok && EVP_DecryptUpdate(ctx, out.data(), &len, sealed.data(), static_cast<int>(n)) == 1;
  ok = ok && EVP_CIPHER_CTX_ctrl(ctx, EVP_CTRL_GCM_SET_TAG, kTagLen, tag.data()) == 1;
  ok = ok && EVP_DecryptFinal_ex(ctx, out.data() + len, &len) == 1;
  if (!ok) throw Error(Errc::AuthFailure, "AES-GCM tag mismatch");
  return out;
}

std::array<std::uint8_t, kNonceLen> PositionNonce::nonce() const {
  // tree u8 | slot u8 | bucket low 32 bits | epoch u48. Tree buckets fit in
  // 32 bits; callers with wider bucket ids keep epochs unique on their own.
  // The full tuple is authenticated as associated data either way.
  if (slot > 0xff || epoch >> 48) throw Error(Errc::Oversize, "position does not fit the nonce");
  std::array<std::uint8_t, kNonceLen> n;
  n[0] = tree;
  n[1] = static_cast<std::uint8_t>(slot);
  for (int i = 0; i < 4; ++i) n[2 + i] = static_cast<std::uint8_t>(bucket >> (24 - 8 * i));
  for (int i = 0; i < 6; ++i) n[6 + i] = static_cast<std::uint8_t>(epoch >> (40 - 8 * i));
  return n;
}

std::array<std::uint8_t, 21> PositionNonce::associated_data() const {
  std::array<std::uint8_t, 21> out;
  out[0] = tree;
  for (int i = 0; i < 8; ++i) out[1 + i] = static_cast<std::uint8_t>(bucket >> (56 - 8 * i));
  for (int i = 0; i < 4; ++i) out[9 + i] = static_cast<std::uint8_t>(slot >> (24 - 8 * i));
  for (int i = 0; i < 8; ++i) out[13 + i] = static_cast<std::uint8_t>(epoch >> (56 - 8 * i));
  return out;
}

Bytes seal_block(const DerivedKeys& keys, std::span<const std::uint8_t> plaintext, const PositionNonce& pos,
                 std::size_t block_size) {
  if (plaintext.size() != block_size) throw Error(Errc::LengthMismatch, "block plaintext has wrong length");
  auto n = pos.nonce();
  auto ad = pos.associated_data();
  return aead_seal(keys.k_enc, n, ad, plaintext);
}

Bytes open_block(const DerivedKeys& keys, std::span<const std::uint8_t> ciphertext, const PositionNonce& pos,
                 std::size_t block_size) {
  if (ciphertext.size() != block_size + kTagLen) throw Error(Errc::AuthFailure, "block ciphertext has wrong length");
  auto n = pos.nonce();
  auto ad = pos.associated_data();
  return aead_open(keys.k_enc, n, ad, ciphertext);
}

Bytes RollbackRecord::encode() const {
  ByteWriter w;
  w.u16(kVersion);
  w.u64(ctr);
  w.raw(root_ann);
  w.raw(root_data);
  w.raw(tag);
  return std::move(w).take();
}

RollbackRecord RollbackRecord::decode(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != kEncodedSize) throw Error(Errc::BadTag, "rollback record has wrong size");
  ByteReader r(bytes);
  if (r.u16() != kVersion) throw Error(Errc::BadTag, "rollback record version");
  RollbackRecord rec;
  rec.ctr = r.u64();
  auto copy = [&](Hash& h) {
    auto s = r.raw(h.size());
    std::memcpy(h.data(), s.data(), h.size());
  };
  copy(rec.root_ann);
  copy(rec.root_data);
  copy(rec.tag);
  return rec;
}

namespace {
Hash record_mac(const DerivedKeys& keys, const RollbackRecord& rec) {
  ByteWriter w;
  w.raw(as_bytes("opal.rollback"));
  w.u16(RollbackRecord::kVersion);
  w.u64(rec.ctr);
  w.raw(rec.root_ann);
  w.raw(rec.root_data);
  return hmac_sha256(keys.k_mac, w.data());
}
}  // namespace

RollbackRecord make_rollback_record(const DerivedKeys& keys, std::uint64_t ctr, const Hash& root_ann,
                                    const Hash& root_data) {
  RollbackRecord rec;
  rec.ctr = ctr;
  rec.root_ann = root_ann;
  rec.root_data = root_data;
  rec.tag = record_mac(keys, rec);
  return rec;
}

bool rollback_tag_valid(const DerivedKeys& keys, const RollbackRecord& record) {
  Hash expect = record_mac(keys, record);
  return equal_ct(expect, record.tag);
}

void verify_rollback_record(const DerivedKeys& keys, const RollbackRecord& record, std::uint64_t observed_ctr,
                            const Hash& observed_root_ann, const Hash& observed_root_data) {
  if (!rollback_tag_valid(keys, record)) throw Error(Errc::BadTag, "rollback record MAC invalid");
  if (record.ctr != observed_ctr) throw Error(Errc::CounterMismatch, "rollback record counter is not current");
  if (!equal_ct(record.root_ann, observed_root_ann) || !equal_ct(record.root_data, observed_root_data)) {
    throw Error(Errc::StaleState, "ORAM roots do not match rollback record");
  }
}

namespace {
std::array<std::uint8_t, 10> checkpoint_ad(std::uint64_t instance_id) {
  ByteWriter w;
  w.u16(Checkpoint::kVersion);
  w.u64(instance_id);
  std::array<std::uint8_t, 10> out;
  std::memcpy(out.data(), w.data().data(), out.size());
  return out;
}
}  // namespace

Checkpoint seal_checkpoint(const DerivedKeys& keys, std::uint64_t ctr, std::span<const std::uint8_t> client_state,
                           std::size_t pad_size, std::uint64_t instance_id) {
  if (pad_size < Checkpoint::kPlainHeader || client_state.size() > pad_size - Checkpoint::kPlainHeader) {
    throw Error(Errc::Oversize, "client state exceeds checkpoint pad (" + std::to_string(client_state.size()) +
                                    " > " + std::to_string(pad_size) + ")");
  }
  Bytes plain(pad_size, 0);
  ByteWriter hdr;
  hdr.u64(ctr);
  hdr.u64(client_state.size());
  std::memcpy(plain.data(), hdr.data().data(), Checkpoint::kPlainHeader);
  std::memcpy(plain.data() + Checkpoint::kPlainHeader, client_state.data(), client_state.size());

  std::array<std::uint8_t, kNonceLen> nonce;
  random_bytes(nonce);
  auto ad = checkpoint_ad(instance_id);
  Bytes sealed = aead_seal(keys.k_enc, nonce, ad, plain);

  Checkpoint cp;
  cp.bytes.reserve(Checkpoint::kHeaderSize + sealed.size());
  cp.bytes.insert(cp.bytes.end(), ad.begin(), ad.end());
  cp.bytes.insert(cp.bytes.end(), nonce.begin(), nonce.end());
  cp.bytes.insert(cp.bytes.end(), sealed.begin(), sealed.end());
  return cp;
}

OpenedCheckpoint open_checkpoint(const DerivedKeys& keys, const Checkpoint& cp, std::size_t pad_size,
                                 std::uint64_t instance_id) {
  if (cp.bytes.size() != Checkpoint::kHeaderSize + pad_size + kTagLen) {
    throw Error(Errc::AuthFailure, "checkpoint has wrong size");
  }
  auto ad = checkpoint_ad(instance_id);
  if (!equal_ct(std::span(cp.bytes).first(ad.size()), ad)) throw Error(Errc::AuthFailure, "checkpoint header mismatch");
  std::array<std::uint8_t, kNonceLen> nonce;
  std::memcpy(nonce.data(), cp.bytes.data() + ad.size(), kNonceLen);
  Bytes plain = aead_open(keys.k_enc, nonce, ad, std::span(cp.bytes).subspan(Checkpoint::kHeaderSize));
  ByteReader r(plain);
  OpenedCheckpoint out;
  out.ctr = r.u64();
  auto len = r.u64();
  if (len > pad_size - Checkpoint::kPlainHeader) throw Error(Errc::AuthFailure, "checkpoint length field");
  auto body = r.raw(len);
  out.client_state.assign(body.begin(), body.end());
  return out;
}

void accept_request_counter(std::uint64_t& last_accepted, std::uint64_t incoming) {
  if (incoming <= last_accepted) {
    throw Error(Errc::ReplayDetected,
                "counter " + std::to_string(incoming) + " not above " + std::to_string(last_accepted));
  }
  last_accepted = incoming;
}

MerkleTree::MerkleTree(int depth) : depth_(depth) {
  if (depth < 0 || depth > 30) throw Error(Errc::ConfigInvalid, "merkle depth out of range");
  std::size_t n = (std::size_t{1} << (depth + 1)) - 1;
  leaf_.assign(n, Hash{});
  node_.assign(n, Hash{});
  rebuild();
}

Hash MerkleTree::combine(const Hash& bucket_digest, const Hash& left, const Hash& right) {
  std::array<std::uint8_t, 1 + 96> buf;
  buf[0] = 0x01;
  std::memcpy(buf.data() + 1, bucket_digest.data(), 32);
  std::memcpy(buf.data() + 33, left.data(), 32);
  std::memcpy(buf.data() + 65, right.data(), 32);
  return sha256(buf);
}

void MerkleTree::set_bucket(std::uint64_t index, const Hash& bucket_digest) {
  if (index >= leaf_.size()) throw Error(Errc::UnknownBucket, "merkle index out of range");
  leaf_[index] = bucket_digest;
  const std::size_t n = leaf_.size();
  std::uint64_t i = index;
  while (true) {
    const Hash zero{};
    const Hash& l = 2 * i + 1 < n ? node_[2 * i + 1] : zero;
    const Hash& r = 2 * i + 2 < n ? node_[2 * i + 2] : zero;
    node_[i] = combine(leaf_[i], l, r);
    if (i == 0) break;
    i = (i - 1) / 2;
  }
}

void MerkleTree::rebuild() {
  const std::size_t n = leaf_.size();
  const Hash zero{};
  for (std::size_t k = n; k-- > 0;) {
    const Hash& l = 2 * k + 1 < n ? node_[2 * k + 1] : zero;
    const Hash& r = 2 * k + 2 < n ? node_[2 * k + 2] : zero;
    node_[k] = combine(leaf_[k], l, r);
  }
}

Hash MerkleTree::recompute() const {
  MerkleTree copy = *this;
  copy.rebuild();
  return copy.root();
}

}  // namespace opal::crypto
