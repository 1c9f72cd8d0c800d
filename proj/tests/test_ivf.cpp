#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "opal/ann/ivf.hpp"
#include "opal/ann/kmeans.hpp"
#include "opal/ann/pq.hpp"

using namespace opal;
using namespace opal::ann;

namespace {

// Columns drawn from two isotropic Gaussians at +/- offset on every axis.
Matrix<float> two_modes(int dim, int per_mode, float offset, float sigma, std::uint64_t seed,
                        std::vector<int>* truth = nullptr) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> n(0.f, sigma);
  Matrix<float> X(dim, 2 * per_mode);
  for (int i = 0; i < 2 * per_mode; ++i) {
    const float c = (i % 2 == 0) ? offset : -offset;
    for (int d = 0; d < dim; ++d) X(d, i) = c + n(rng);
    if (truth) truth->push_back(i % 2);
  }
  return X;
}

std::vector<ItemId> brute_force(const std::map<ItemId, Vec>& all, const Vec& q, std::size_t k) {
  std::vector<std::pair<float, ItemId>> d;
  for (const auto& [id, v] : all) d.emplace_back((v - q).squaredNorm(), id);
  std::sort(d.begin(), d.end());
  std::vector<ItemId> out;
  for (std::size_t i = 0; i < k && i < d.size(); ++i) out.push_back(d[i].second);
  return out;
}

IvfConfig small_cfg(std::size_t n_target = 400, std::size_t warmup = 200) {
  IvfConfig c;
  c.dim = 16;
  c.m = 4;
  c.nbits = 6;
  c.n_target = n_target;
  c.warmup = warmup;
  c.kmeans_iters = 10;
  return c;
}

}  // namespace

TEST(KMeans, SeparatesTwoGaussians) {
  std::vector<int> truth;
  auto X = two_modes(8, 300, 3.f, 1.f, 1, &truth);
  std::mt19937_64 rng(2);
  auto km = kmeans<float>(X, 2, 20, rng);
  int agree = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) agree += (km.labels[i] == truth[i]);
  double purity = std::max(agree, static_cast<int>(truth.size()) - agree) / static_cast<double>(truth.size());
  EXPECT_GT(purity, 0.9);
}

TEST(KMeans, NearestColumn) {
  Matrix<float> C(2, 3);
  C << 0, 5, 10, 0, 5, 10;
  Vector<float> x(2);
  x << 6, 4;
  float d = 0;
  EXPECT_EQ(nearest_column(C, x, &d), 1);
  EXPECT_FLOAT_EQ(d, 2.f);
}

TEST(Pq, ConfigChecks) {
  EXPECT_THROW(ProductQuantizer<float>(10, 3, 8), Error);
  EXPECT_THROW(ProductQuantizer<float>(12, 3, 9), Error);
}

TEST(Pq, AdcEqualsDistanceToDecoded) {
  auto X = two_modes(16, 200, 1.f, 1.f, 3);
  ProductQuantizer<float> pq(16, 4, 6);
  std::mt19937_64 rng(4);
  float err = pq.train(X, rng, 10);
  float var = (X.colwise() - X.rowwise().mean()).squaredNorm() / X.cols();
  EXPECT_LT(err, 0.5f * var);
  Vector<float> q = X.col(7) * 0.5f;
  auto table = pq.distance_table(q);
  for (int i = 0; i < 20; ++i) {
    auto code = pq.encode(X.col(i));
    ASSERT_EQ(code.size(), 4u);
    EXPECT_NEAR(ProductQuantizer<float>::adc(table, code), (pq.decode(code) - q).squaredNorm(), 1e-3);
  }
}

TEST(Ivf, ListTargets) {
  IvfConfig c;
  c.n_target = 8192;
  EXPECT_EQ(c.nlist_target(), 91u);
  EXPECT_NEAR(c.target_mean(), 8192.0 / 91.0, 1e-9);
}

TEST(Ivf, WarmupScoresExactly) {
  IvfIndex idx(small_cfg());
  auto X = two_modes(16, 20, 2.f, 1.f, 5);
  for (int i = 0; i < X.cols(); ++i) idx.insert(i, X.col(i), 100);
  EXPECT_FALSE(idx.trained());
  Vec q = X.col(3);
  auto c = idx.score(q, nullptr, 5);
  ASSERT_EQ(c.size(), 5u);
  EXPECT_EQ(c[0].id, 3u);
  EXPECT_FLOAT_EQ(c[0].approx_score, 0.f);
}

TEST(Ivf, ScorePadsWithDummies) {
  IvfIndex idx(small_cfg());
  auto X = two_modes(16, 5, 2.f, 1.f, 6);
  for (int i = 0; i < X.cols(); ++i) idx.insert(i, X.col(i), 100);
  std::unordered_set<ItemId> adm{1, 2, 3};
  auto c = idx.score(X.col(0), &adm, 8);
  ASSERT_EQ(c.size(), 8u);
  EXPECT_EQ(std::count_if(c.begin(), c.end(), [](auto& x) { return x.dummy(); }), 5);
  for (int i = 0; i < 3; ++i) EXPECT_TRUE(adm.contains(c[i].id));
}

TEST(Ivf, RecallAgainstBruteForce) {
  auto cfg = small_cfg(1000, 300);
  IvfIndex idx(cfg);
  auto X = two_modes(16, 500, 1.5f, 1.f, 7);
  std::map<ItemId, Vec> all;
  for (int i = 0; i < X.cols(); ++i) {
    idx.insert(i, X.col(i), 100);
    all[i] = X.col(i);
  }
  ASSERT_TRUE(idx.trained());
  std::mt19937_64 rng(8);
  double hits = 0, total = 0;
  for (int t = 0; t < 50; ++t) {
    Vec q = X.col(rng() % X.cols()) + Vec::Constant(16, 0.1f);
    auto cand = idx.score(q, nullptr, 200);
    std::vector<std::pair<ItemId, Vec>> fetched;
    for (auto& c : cand)
      if (!c.dummy()) fetched.emplace_back(c.id, all.at(c.id));
    auto got = IvfIndex::rerank(fetched, q, 10);
    auto want = brute_force(all, q, 10);
    for (ItemId id : want) hits += std::count(got.begin(), got.end(), id);
    total += want.size();
  }
  EXPECT_GT(hits / total, 0.8);
}

TEST(Ivf, SplitChildrenLandNearModes) {
  auto cfg = small_cfg(100, 10);  // nlist 10, mean 10, split above 20
  IvfIndex idx(cfg);
  const float off = 4.f;
  auto sample = two_modes(16, 100, off, 0.3f, 9);
  idx.seed_centroids({Vec::Zero(16)}, sample);
  for (int i = 0; i < 21; ++i) idx.insert(i, sample.col(i), 100);
  EXPECT_EQ(idx.stats().splits, 1u);
  auto live = idx.live_cluster_ids();
  ASSERT_EQ(live.size(), 2u);
  Vec up = Vec::Constant(16, off), down = Vec::Constant(16, -off);
  for (int c : live) {
    float d = std::min((idx.centroid(c) - up).norm(), (idx.centroid(c) - down).norm());
    EXPECT_LT(d, 0.25f * (up - down).norm());
  }
  // Members marked pending until they are resolved from full vectors.
  EXPECT_EQ(idx.pending_count(), 21u);
  std::vector<std::pair<ItemId, Vec>> res;
  for (int i = 0; i < 21; ++i) res.emplace_back(i, sample.col(i));
  EXPECT_EQ(idx.resolve_pending(res), 21u);
  EXPECT_EQ(idx.pending_count(), 0u);
  EXPECT_EQ(idx.stats().resolved_changed, 0u);
}

TEST(Ivf, MergeOnShrinkAndLastClusterGuard) {
  auto cfg = small_cfg(100, 10);
  IvfIndex idx(cfg);
  auto sample = two_modes(16, 50, 4.f, 0.3f, 10);
  idx.seed_centroids({Vec::Constant(16, 4.f), Vec::Constant(16, -4.f)}, sample);
  for (int i = 0; i < 10; ++i) idx.insert(i, sample.col(i), 100);
  // Mode -4 holds odd ids; drop all but one so it falls below 0.2 * mean.
  idx.remove(3);
  idx.remove(5);
  idx.remove(7);
  idx.remove(9);
  EXPECT_EQ(idx.stats().merges, 1u);
  EXPECT_EQ(idx.live_clusters(), 1u);
  EXPECT_TRUE(idx.is_pending(1));
  for (int i : {0, 2, 4, 6}) idx.remove(i);
  idx.remove(8);
  EXPECT_EQ(idx.live_clusters(), 1u);
  EXPECT_THROW(idx.maybe_merge(idx.live_cluster_ids().front()), Error);
}

TEST(Ivf, EagerNeedsSourceAndReassignsImmediately) {
  auto cfg = small_cfg(100, 10);
  cfg.eager = true;
  auto sample = two_modes(16, 100, 4.f, 0.3f, 11);
  {
    IvfIndex idx(cfg);
    idx.seed_centroids({Vec::Zero(16)}, sample);
    for (int i = 0; i < 20; ++i) idx.insert(i, sample.col(i), 100);
    EXPECT_THROW(idx.insert(20, sample.col(20), 100), Error);
  }
  IvfIndex idx(cfg);
  idx.set_vector_source([&](ItemId id) -> std::optional<Vec> { return Vec(sample.col(static_cast<int>(id))); });
  idx.seed_centroids({Vec::Zero(16)}, sample);
  for (int i = 0; i < 21; ++i) idx.insert(i, sample.col(i), 100);
  EXPECT_EQ(idx.pending_count(), 0u);
  EXPECT_EQ(idx.stats().eager_reassigned, 21u);
}

TEST(Ivf, DuplicateAndDimensionChecks) {
  IvfIndex idx(small_cfg());
  idx.insert(1, Vec::Zero(16), 1);
  EXPECT_THROW(idx.insert(1, Vec::Zero(16), 1), Error);
  EXPECT_THROW(idx.insert(2, Vec::Zero(8), 1), Error);
}

TEST(Ivf, ExpiryBookkeeping) {
  IvfIndex idx(small_cfg());
  idx.insert(4, Vec::Ones(16), 77);
  EXPECT_EQ(idx.expiry(4), 77u);
  idx.set_expiry(4, 99);
  EXPECT_EQ(idx.expiry(4), 99u);
  EXPECT_FALSE(idx.expiry(5).has_value());
}

TEST(Ivf, RerankDropsDummiesAndDuplicates) {
  Vec q = Vec::Zero(2);
  std::vector<std::pair<ItemId, Vec>> f = {{1, Vec::Constant(2, 2.f)}, {~ItemId{0}, Vec::Zero(2)},
                                           {2, Vec::Constant(2, 1.f)}, {2, Vec::Constant(2, 1.f)},
                                           {3, Vec::Constant(2, 3.f)}};
  EXPECT_EQ(IvfIndex::rerank(f, q, 2), (std::vector<ItemId>{2, 1}));
}

TEST(Ivf, SerializeRoundTrip) {
  auto cfg = small_cfg(400, 100);
  IvfIndex idx(cfg);
  auto X = two_modes(16, 150, 1.5f, 1.f, 12);
  for (int i = 0; i < X.cols(); ++i) idx.insert(i, X.col(i), i);
  auto bytes = idx.serialize();
  IvfIndex back(cfg);
  back.deserialize(bytes);
  EXPECT_EQ(back.serialize(), bytes);
  EXPECT_EQ(back.size(), idx.size());
  auto a = idx.score(X.col(0), nullptr, 20), b = back.score(X.col(0), nullptr, 20);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i].id, b[i].id);
  auto other = cfg;
  other.dim = 32;
  IvfIndex wrong(other);
  EXPECT_THROW(wrong.deserialize(bytes), Error);
}
