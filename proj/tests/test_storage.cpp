#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "opal/storage.hpp"

using namespace opal;

namespace {

Geometry small_geom() { return Geometry{3, 4, 5, 24}; }

Bucket make_bucket(const Geometry& g, std::uint8_t fill, std::uint64_t epoch) {
  Bucket b;
  b.epoch = epoch;
  for (int i = 0; i < g.slots_per_bucket(); ++i) b.slots.emplace_back(g.slot_bytes, static_cast<std::uint8_t>(fill + i));
  return b;
}

void exercise(BlockStorage& s) {
  const auto& g = s.geometry();
  std::vector<std::pair<BucketId, Bucket>> w;
  w.emplace_back(BucketId{s.tree(), 0}, make_bucket(g, 10, 1));
  w.emplace_back(BucketId{s.tree(), 14}, make_bucket(g, 50, 9));
  s.write_buckets(w);

  std::vector<BucketId> ids = {{s.tree(), 14}, {s.tree(), 0}};
  auto got = s.read_buckets(ids);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0], w[1].second);
  EXPECT_EQ(got[1], w[0].second);
  EXPECT_EQ(s.read_slot({s.tree(), 14}, 2), w[1].second.slots[2]);

  auto t = s.totals();
  EXPECT_EQ(t.bucket_writes, 2u);
  EXPECT_EQ(t.bucket_reads, 2u);
  EXPECT_EQ(t.slot_reads, 1u);
  EXPECT_EQ(t.bytes_written, 2 * g.bucket_bytes());
  EXPECT_EQ(t.bytes_read, 2 * g.bucket_bytes() + g.slot_bytes);
}

}  // namespace

TEST(Geometry, Counts) {
  Geometry g{14, 4, 5, 100};
  EXPECT_EQ(g.num_buckets(), 32767u);
  EXPECT_EQ(g.slots_per_bucket(), 9);
  EXPECT_EQ(g.bucket_bytes(), 8u + 900u);
}

TEST(Bucket, SerializeParse) {
  auto g = small_geom();
  auto b = make_bucket(g, 3, 0xdeadbeef);
  auto bytes = b.serialize();
  EXPECT_EQ(bytes.size(), g.bucket_bytes());
  EXPECT_EQ(Bucket::parse(bytes, g), b);
  bytes.pop_back();
  EXPECT_THROW(Bucket::parse(bytes, g), Error);
}

TEST(Storage, MemoryReadWrite) {
  MemoryStorage s(Tree::ANN, small_geom());
  exercise(s);
}

TEST(Storage, FileReadWriteAndReopen) {
  auto dir = std::filesystem::temp_directory_path() / "opal_storage_test";
  std::filesystem::create_directories(dir);
  auto path = dir / "data.tree";
  auto g = small_geom();
  {
    FileStorage s(Tree::Data, g, path);
    exercise(s);
    s.flush();
  }
  EXPECT_EQ(std::filesystem::file_size(path), FileStorage::kHeaderSize + g.num_buckets() * g.bucket_bytes());
  {
    FileStorage s(Tree::Data, g, path, false);
    auto b = s.read_buckets(std::vector<BucketId>{{Tree::Data, 14}});
    EXPECT_EQ(b[0], make_bucket(g, 50, 9));
  }
  Geometry other = g;
  other.slot_bytes = 32;
  EXPECT_THROW(FileStorage(Tree::Data, other, path, false), Error);
  std::filesystem::remove_all(dir);
}

TEST(Storage, RejectsUnknownBucketsAndBadShapes) {
  MemoryStorage s(Tree::ANN, small_geom());
  auto code = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Io;
  };
  EXPECT_EQ(code([&] { s.read_buckets(std::vector<BucketId>{{Tree::ANN, 15}}); }), Errc::UnknownBucket);
  EXPECT_EQ(code([&] { s.read_buckets(std::vector<BucketId>{{Tree::Data, 0}}); }), Errc::UnknownBucket);
  EXPECT_EQ(code([&] { s.read_slot({Tree::ANN, 0}, 9); }), Errc::UnknownBucket);
  Bucket bad = make_bucket(small_geom(), 0, 0);
  bad.slots.pop_back();
  std::vector<std::pair<BucketId, Bucket>> w{{BucketId{Tree::ANN, 0}, bad}};
  EXPECT_EQ(code([&] { s.write_buckets(w); }), Errc::SizeMismatch);
}

TEST(Storage, SnapshotRestore) {
  auto g = small_geom();
  MemoryStorage s(Tree::ANN, g);
  std::vector<std::pair<BucketId, Bucket>> w{{BucketId{Tree::ANN, 3}, make_bucket(g, 1, 1)}};
  s.write_buckets(w);
  auto snap = s.snapshot();
  w[0].second = make_bucket(g, 2, 2);
  s.write_buckets(w);
  EXPECT_NE(s.snapshot(), snap);
  s.restore_snapshot(snap);
  EXPECT_EQ(s.snapshot(), snap);
  EXPECT_THROW(s.restore_snapshot(std::span(snap).first(10)), Error);
}

TEST(Storage, FactoryBackends) {
  auto m = make_storage(Tree::ANN, small_geom(), "memory");
  EXPECT_NE(dynamic_cast<MemoryStorage*>(m.get()), nullptr);
  EXPECT_THROW(make_storage(Tree::ANN, small_geom(), "tape"), Error);
}

TEST(Trace, StructuralEquivalence) {
  TraceRecorder a, b;
  a.record_call(4096);
  a.record_access(Tree::ANN, 200, 1000);
  b.record_call(4096);
  b.record_access(Tree::ANN, 200, 5555);  // access byte counts are not compared
  EXPECT_FALSE(first_divergence(a.events(), b.events()).has_value());

  b.record_access(Tree::Data, 10, 1);
  EXPECT_EQ(first_divergence(a.events(), b.events()), 2u);

  TraceRecorder c;
  c.record_call(4096);
  c.record_access(Tree::Data, 200, 1000);
  EXPECT_EQ(first_divergence(a.events(), c.events()), 1u);

  TraceRecorder d;
  d.record_call(8192);
  EXPECT_EQ(first_divergence(a.events(), d.events()), 0u);
}

TEST(Trace, JsonlOneLinePerEvent) {
  TraceRecorder t;
  t.record_call(10);
  t.record_access(Tree::Data, 3, 99);
  std::ostringstream os;
  t.write_jsonl(os);
  auto s = os.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 2);
  EXPECT_NE(s.find("\"batch_size\":3"), std::string::npos);
  EXPECT_EQ(t.events_since(1).size(), 1u);
}
