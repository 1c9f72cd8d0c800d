#include "opal/storage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <json.hpp>

#include "opal/codec.hpp"

namespace opal {

const char* tree_name(Tree t) { return t == Tree::ANN ? "ANN" : "Data"; }

Bytes Bucket::serialize() const {
  ByteWriter w;
  w.u64(epoch);
  for (const auto& s : slots) w.raw(s);
  return std::move(w).take();
}

Bucket Bucket::parse(std::span<const std::uint8_t> bytes, const Geometry& g) {
  if (bytes.size() != g.bucket_bytes()) throw Error(Errc::SizeMismatch, "bucket image has wrong length");
  ByteReader r(bytes);
  Bucket b;
  b.epoch = r.u64();
  b.slots.reserve(g.slots_per_bucket());
  for (int i = 0; i < g.slots_per_bucket(); ++i) {
    auto s = r.raw(g.slot_bytes);
    b.slots.emplace_back(s.begin(), s.end());
  }
  return b;
}

bool structurally_equal(const TraceEvent& a, const TraceEvent& b) {
  if (a.kind != b.kind || a.store != b.store || a.batch_size != b.batch_size) return false;
  if (a.kind == EventKind::InterEnclaveCall && a.byte_count != b.byte_count) return false;
  return true;
}

std::optional<std::size_t> first_divergence(std::span<const TraceEvent> a, std::span<const TraceEvent> b) {
  std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!structurally_equal(a[i], b[i])) return i;
  }
  if (a.size() != b.size()) return n;
  return std::nullopt;
}

std::uint64_t TraceRecorder::record_call(std::uint64_t padded_bytes) {
  std::lock_guard lk(mu_);
  TraceEvent e;
  e.kind = EventKind::InterEnclaveCall;
  e.byte_count = padded_bytes;
  e.seq = next_seq_++;
  events_.push_back(e);
  return e.seq;
}

std::uint64_t TraceRecorder::record_access(Tree store, std::uint64_t batch_size, std::uint64_t bytes) {
  std::lock_guard lk(mu_);
  TraceEvent e;
  e.kind = EventKind::OramAccess;
  e.store = store;
  e.batch_size = batch_size;
  e.byte_count = bytes;
  e.seq = next_seq_++;
  events_.push_back(e);
  return e.seq;
}

std::vector<TraceEvent> TraceRecorder::events() const {
  std::lock_guard lk(mu_);
  return events_;
}

std::vector<TraceEvent> TraceRecorder::events_since(std::size_t from) const {
  std::lock_guard lk(mu_);
  if (from >= events_.size()) return {};
  return {events_.begin() + static_cast<std::ptrdiff_t>(from), events_.end()};
}

std::size_t TraceRecorder::size() const {
  std::lock_guard lk(mu_);
  return events_.size();
}

void TraceRecorder::write_jsonl(std::ostream& out) const {
  for (const auto& e : events()) {
    nlohmann::json j;
    j["kind"] = e.kind == EventKind::OramAccess ? "OramAccess" : "InterEnclaveCall";
    j["store"] = e.store ? nlohmann::json(tree_name(*e.store)) : nlohmann::json(nullptr);
    j["batch_size"] = e.batch_size ? nlohmann::json(*e.batch_size) : nlohmann::json(nullptr);
    j["byte_count"] = e.byte_count;
    j["seq"] = e.seq;
    out << j.dump() << '\n';
  }
}

void BlockStorage::check(const BucketId& id) const {
  if (id.tree != tree_ || id.index >= geom_.num_buckets()) {
    throw Error(Errc::UnknownBucket, std::string(tree_name(id.tree)) + " bucket " + std::to_string(id.index));
  }
}

void BlockStorage::log(IoFragment f) {
  std::lock_guard lk(io_mu_);
  if (f.op == IoFragment::Op::WriteBuckets) {
    totals_.bytes_written += f.bytes;
    totals_.bucket_writes += f.count;
  } else {
    totals_.bytes_read += f.bytes;
    if (f.op == IoFragment::Op::ReadSlot) totals_.slot_reads += f.count;
    else totals_.bucket_reads += f.count;
  }
  io_log_.push_back(f);
  if (io_log_.size() > kIoLogCap) io_log_.pop_front();
}

std::vector<Bucket> BlockStorage::read_buckets(std::span<const BucketId> ids) {
  std::vector<Bucket> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    check(id);
    out.push_back(Bucket::parse(load(id.index), geom_));
  }
  log({IoFragment::Op::ReadBuckets, tree_, ids.size(), ids.size() * geom_.bucket_bytes()});
  return out;
}

void BlockStorage::write_buckets(std::span<const std::pair<BucketId, Bucket>> pairs) {
  std::vector<Bytes> images;
  images.reserve(pairs.size());
  for (const auto& [id, b] : pairs) {
    check(id);
    if (static_cast<int>(b.slots.size()) != geom_.slots_per_bucket()) {
      throw Error(Errc::SizeMismatch, "bucket has wrong slot count");
    }
    for (const auto& s : b.slots) {
      if (s.size() != geom_.slot_bytes) throw Error(Errc::SizeMismatch, "slot has wrong length");
    }
    images.push_back(b.serialize());
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) store(pairs[i].first.index, images[i]);
  log({IoFragment::Op::WriteBuckets, tree_, pairs.size(), pairs.size() * geom_.bucket_bytes()});
}

Bytes BlockStorage::read_slot(const BucketId& id, int slot) {
  check(id);
  if (slot < 0 || slot >= geom_.slots_per_bucket()) throw Error(Errc::UnknownBucket, "slot out of range");
  Bytes s = load_range(id.index, 8 + static_cast<std::size_t>(slot) * geom_.slot_bytes, geom_.slot_bytes);
  log({IoFragment::Op::ReadSlot, tree_, 1, geom_.slot_bytes});
  return s;
}

Bytes BlockStorage::snapshot() const {
  Bytes image;
  image.reserve(geom_.num_buckets() * geom_.bucket_bytes());
  for (std::uint64_t i = 0; i < geom_.num_buckets(); ++i) {
    Bytes b = load(i);
    image.insert(image.end(), b.begin(), b.end());
  }
  return image;
}

void BlockStorage::restore_snapshot(std::span<const std::uint8_t> image) {
  const std::size_t stride = geom_.bucket_bytes();
  if (image.size() != geom_.num_buckets() * stride) throw Error(Errc::SizeMismatch, "snapshot size");
  for (std::uint64_t i = 0; i < geom_.num_buckets(); ++i) store(i, image.subspan(i * stride, stride));
}

IoTotals BlockStorage::totals() const {
  std::lock_guard lk(io_mu_);
  return totals_;
}

std::vector<IoFragment> BlockStorage::recent_io() const {
  std::lock_guard lk(io_mu_);
  return {io_log_.begin(), io_log_.end()};
}

MemoryStorage::MemoryStorage(Tree tree, Geometry g)
    : BlockStorage(tree, g), data_(g.num_buckets() * g.bucket_bytes(), 0) {}

Bytes MemoryStorage::load(std::uint64_t index) const {
  const std::size_t stride = geometry().bucket_bytes();
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(index * stride);
  return Bytes(first, first + static_cast<std::ptrdiff_t>(stride));
}

Bytes MemoryStorage::load_range(std::uint64_t index, std::size_t offset, std::size_t len) const {
  auto first = data_.begin() + static_cast<std::ptrdiff_t>(index * geometry().bucket_bytes() + offset);
  return Bytes(first, first + static_cast<std::ptrdiff_t>(len));
}

void MemoryStorage::store(std::uint64_t index, std::span<const std::uint8_t> bytes) {
  if (bytes.size() != geometry().bucket_bytes()) throw Error(Errc::SizeMismatch, "bucket image has wrong length");
  std::memcpy(data_.data() + index * geometry().bucket_bytes(), bytes.data(), bytes.size());
}

namespace {
[[noreturn]] void io_fail(const std::string& what) { throw Error(Errc::Io, what + ": " + std::strerror(errno)); }
}  // namespace

FileStorage::FileStorage(Tree tree, Geometry g, const std::filesystem::path& path, bool truncate)
    : BlockStorage(tree, g), path_(path) {
  int flags = O_RDWR | O_CREAT | (truncate ? O_TRUNC : 0);
  fd_ = ::open(path.c_str(), flags, 0600);
  if (fd_ < 0) io_fail("open " + path.string());
  ByteWriter h;
  h.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("OPALTREE"), 8));
  h.u32(1);
  h.u32(static_cast<std::uint32_t>(g.L));
  h.u32(static_cast<std::uint32_t>(g.Z));
  h.u32(static_cast<std::uint32_t>(g.S));
  h.u64(g.slot_bytes);
  if (truncate) {
    if (::pwrite(fd_, h.data().data(), h.size(), 0) != static_cast<ssize_t>(h.size())) io_fail("write header");
    if (::ftruncate(fd_, static_cast<off_t>(kHeaderSize + g.num_buckets() * g.bucket_bytes())) != 0) {
      io_fail("size file");
    }
  } else {
    Bytes got(kHeaderSize);
    if (::pread(fd_, got.data(), got.size(), 0) != static_cast<ssize_t>(got.size()) ||
        !std::equal(h.data().begin(), h.data().end(), got.begin())) {
      throw Error(Errc::ConfigInvalid, "tree file header does not match geometry");
    }
  }
}

FileStorage::~FileStorage() {
  if (fd_ >= 0) ::close(fd_);
}

void FileStorage::flush() {
  if (::fdatasync(fd_) != 0) io_fail("fdatasync");
}

Bytes FileStorage::load(std::uint64_t index) const {
  return load_range(index, 0, geometry().bucket_bytes());
}

Bytes FileStorage::load_range(std::uint64_t index, std::size_t offset, std::size_t len) const {
  Bytes out(len);
  off_t at = static_cast<off_t>(kHeaderSize + index * geometry().bucket_bytes() + offset);
  if (::pread(fd_, out.data(), len, at) != static_cast<ssize_t>(len)) io_fail("pread");
  return out;
}

void FileStorage::store(std::uint64_t index, std::span<const std::uint8_t> bytes) {
  if (bytes.size() != geometry().bucket_bytes()) throw Error(Errc::SizeMismatch, "bucket image has wrong length");
  off_t at = static_cast<off_t>(kHeaderSize + index * geometry().bucket_bytes());
  if (::pwrite(fd_, bytes.data(), bytes.size(), at) != static_cast<ssize_t>(bytes.size())) io_fail("pwrite");
}

std::unique_ptr<BlockStorage> make_storage(Tree tree, Geometry g, const std::string& backend,
                                           const std::filesystem::path& dir, bool truncate) {
  if (backend == "memory") return std::make_unique<MemoryStorage>(tree, g);
  if (backend == "file") {
    return std::make_unique<FileStorage>(tree, g, dir / (std::string(tree_name(tree)) + ".tree"), truncate);
  }
  throw Error(Errc::ConfigInvalid, "unknown storage backend '" + backend + "'");
}

}  // namespace opal
