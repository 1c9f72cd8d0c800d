#include "opal/ann/ivf.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <json.hpp>
#include <sstream>

#include "opal/codec.hpp"

namespace opal::ann {

std::size_t IvfConfig::nlist_target() const {
  return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(n_target))));
}

double IvfConfig::target_mean() const {
  return static_cast<double>(n_target) / static_cast<double>(nlist_target());
}

IvfIndex::IvfIndex(IvfConfig cfg) : cfg_(cfg), pq_(cfg.dim, cfg.m, cfg.nbits), rng_(cfg.seed) {
  if (cfg_.n_target == 0 || cfg_.warmup == 0) throw Error(Errc::ConfigInvalid, "IVF: n_target and warmup > 0");
}

int IvfIndex::add_centroid(const Vec& c) {
  centroids_.push_back(c);
  retired_.push_back(false);
  members_.emplace_back();
  return static_cast<int>(centroids_.size()) - 1;
}

void IvfIndex::retire(int cluster) { retired_[cluster] = true; }

std::size_t IvfIndex::live_clusters() const {
  return static_cast<std::size_t>(std::count(retired_.begin(), retired_.end(), false));
}

std::vector<int> IvfIndex::live_cluster_ids() const {
  std::vector<int> out;
  for (std::size_t c = 0; c < retired_.size(); ++c) {
    if (!retired_[c]) out.push_back(static_cast<int>(c));
  }
  return out;
}

int IvfIndex::nearest_live(const Vec& v, float* dist2) const {
  int best = -1;
  float bd = std::numeric_limits<float>::infinity();
  for (std::size_t c = 0; c < centroids_.size(); ++c) {
    if (retired_[c]) continue;
    float d = (centroids_[c] - v).squaredNorm();
    if (d < bd) {
      bd = d;
      best = static_cast<int>(c);
    }
  }
  if (dist2) *dist2 = bd;
  return best;
}

std::vector<int> IvfIndex::live_by_distance(const Vec& v) const {
  std::vector<std::pair<float, int>> d;
  for (std::size_t c = 0; c < centroids_.size(); ++c) {
    if (!retired_[c]) d.emplace_back((centroids_[c] - v).squaredNorm(), static_cast<int>(c));
  }
  std::sort(d.begin(), d.end());
  std::vector<int> out;
  out.reserve(d.size());
  for (auto& [dist, c] : d) out.push_back(c);
  return out;
}

void IvfIndex::assign(ItemId id, Item& it, int cluster, const Vec& v) {
  if (it.cluster >= 0) members_[it.cluster].erase(id);
  it.cluster = cluster;
  it.base = cluster;
  it.code = pq_.encode(v - centroids_[cluster]);
  members_[cluster].insert(id);
}

void IvfIndex::move_member(ItemId id, Item& it, int cluster) {
  if (it.cluster == cluster) return;
  members_[it.cluster].erase(id);
  it.cluster = cluster;
  members_[cluster].insert(id);
}

void IvfIndex::mark_pending(ItemId id, Item& it) {
  it.pending = true;
  pending_.insert(id);
}

Vec IvfIndex::reconstruct(ItemId id) const {
  auto wit = warm_.find(id);
  if (wit != warm_.end()) return wit->second;
  const Item& it = items_.at(id);
  return centroids_[it.base] + pq_.decode(it.code);
}

void IvfIndex::train() {
  const std::size_t n = warm_.size();
  if (n == 0) return;
  Matrix<float> X(cfg_.dim, static_cast<Eigen::Index>(n));
  std::vector<ItemId> order;
  order.reserve(n);
  Eigen::Index col = 0;
  for (const auto& [id, v] : warm_) {
    X.col(col++) = v;
    order.push_back(id);
  }
  int k0 = static_cast<int>(std::lround(static_cast<double>(n) / cfg_.target_mean()));
  k0 = std::clamp<int>(k0, 1, static_cast<int>(std::min(n, cfg_.nlist_target())));
  auto coarse = kmeans<float>(X, k0, cfg_.kmeans_iters, rng_);
  Matrix<float> R(X.rows(), X.cols());
  for (Eigen::Index i = 0; i < X.cols(); ++i) R.col(i) = X.col(i) - coarse.centroids.col(coarse.labels[i]);
  train_err_ = pq_.train(R, rng_, cfg_.kmeans_iters);
  for (int c = 0; c < k0; ++c) add_centroid(coarse.centroids.col(c));
  trained_ = true;
  for (std::size_t i = 0; i < n; ++i) {
    Item& it = items_.at(order[i]);
    assign(order[i], it, coarse.labels[i], warm_.at(order[i]));
  }
  warm_.clear();
}

void IvfIndex::force_train() {
  if (!trained_) train();
}

void IvfIndex::seed_centroids(const std::vector<Vec>& centroids, const Matrix<float>& sample) {
  if (trained_ || !items_.empty()) throw Error(Errc::ConfigInvalid, "IVF: seed_centroids on a non-empty index");
  if (centroids.empty()) throw Error(Errc::ConfigInvalid, "IVF: need at least one centroid");
  for (const auto& c : centroids) add_centroid(c);
  Matrix<float> R(sample.rows(), sample.cols());
  for (Eigen::Index i = 0; i < sample.cols(); ++i) {
    R.col(i) = sample.col(i) - centroids_[nearest_live(sample.col(i))];
  }
  train_err_ = pq_.train(R, rng_, cfg_.kmeans_iters);
  trained_ = true;
}

int IvfIndex::insert(ItemId id, const Vec& v, LogicalTime expiry) {
  if (items_.contains(id)) throw Error(Errc::DuplicateId, "item " + std::to_string(id) + " already indexed");
  if (v.size() != cfg_.dim) throw Error(Errc::LengthMismatch, "vector has wrong dimension");
  Item& it = items_[id];
  it.expiry = expiry;
  if (!trained_) {
    warm_[id] = v;
    if (warm_.size() >= cfg_.warmup) train();
    return items_.at(id).cluster;
  }
  assign(id, it, nearest_live(v), v);
  const int c = it.cluster;
  maybe_split(c);
  return items_.at(id).cluster;
}

void IvfIndex::remove(ItemId id) {
  auto it = items_.find(id);
  if (it == items_.end()) return;
  const int c = it->second.cluster;
  if (c >= 0) members_[c].erase(id);
  pending_.erase(id);
  warm_.erase(id);
  items_.erase(it);
  if (c >= 0 && live_clusters() > 1) maybe_merge(c);
}

void IvfIndex::maybe_split(int cluster) {
  if (retired_.at(cluster)) return;
  const auto& mem = members_[cluster];
  if (static_cast<double>(mem.size()) <= cfg_.split_factor * cfg_.target_mean()) return;

  std::vector<ItemId> ids(mem.begin(), mem.end());
  std::sort(ids.begin(), ids.end());
  Matrix<float> X(cfg_.dim, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = reconstruct(ids[i]);

  // 2-means, farthest-point seeding.
  Vec mean = X.rowwise().mean();
  Eigen::Index a, b;
  (X.colwise() - mean).colwise().squaredNorm().maxCoeff(&a);
  Vec ca = X.col(a);
  (X.colwise() - ca).colwise().squaredNorm().maxCoeff(&b);
  Vec cb = X.col(b);
  if ((ca - cb).squaredNorm() == 0.0f) return;
  std::vector<int> lbl(ids.size(), 0);
  for (int iter = 0; iter < 15; ++iter) {
    Vec sa = Vec::Zero(cfg_.dim), sb = Vec::Zero(cfg_.dim);
    std::size_t na = 0, nb = 0;
    for (Eigen::Index i = 0; i < X.cols(); ++i) {
      bool to_a = (X.col(i) - ca).squaredNorm() <= (X.col(i) - cb).squaredNorm();
      lbl[i] = to_a ? 0 : 1;
      if (to_a) {
        sa += X.col(i);
        ++na;
      } else {
        sb += X.col(i);
        ++nb;
      }
    }
    if (na == 0 || nb == 0) return;
    Vec na_c = sa / static_cast<float>(na), nb_c = sb / static_cast<float>(nb);
    bool stable = (na_c - ca).squaredNorm() < 1e-12f && (nb_c - cb).squaredNorm() < 1e-12f;
    ca = na_c;
    cb = nb_c;
    if (stable) break;
  }

  const Vec parent = centroids_[cluster];
  const int c1 = add_centroid(ca);
  const int c2 = add_centroid(cb);
  retire(cluster);
  stats_.splits += 1;
  std::vector<ItemId> touched;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    Item& it = items_.at(ids[i]);
    const Vec x = X.col(static_cast<Eigen::Index>(i));
    move_member(ids[i], it, (x - ca).squaredNorm() <= (x - cb).squaredNorm() ? c1 : c2);
    mark_pending(ids[i], it);
    touched.push_back(ids[i]);
  }

  // Neighbors whose members may now sit closer to a new child.
  const float spacing = (ca - cb).norm();
  int seen = 0;
  for (int nb : live_by_distance(parent)) {
    if (nb == c1 || nb == c2) continue;
    if (seen++ >= cfg_.neighbor_clusters) break;
    std::vector<ItemId> nids(members_[nb].begin(), members_[nb].end());
    std::sort(nids.begin(), nids.end());
    for (ItemId id : nids) {
      Item& it = items_.at(id);
      if (it.pending) continue;
      Vec x = reconstruct(id);
      float d_own = (x - centroids_[nb]).norm();
      float d_new = std::min((x - ca).norm(), (x - cb).norm());
      if (d_new - d_own < static_cast<float>(cfg_.margin) * spacing) {
        mark_pending(id, it);
        touched.push_back(id);
      }
    }
  }
  if (cfg_.eager) eager_fix(touched);
}

void IvfIndex::maybe_merge(int cluster) {
  if (retired_.at(cluster)) return;
  if (static_cast<double>(members_[cluster].size()) >= cfg_.merge_factor * cfg_.target_mean()) return;
  if (live_clusters() <= 1) throw Error(Errc::CannotMergeLast, "cannot merge the last live cluster");
  int survivor = -1;
  for (int c : live_by_distance(centroids_[cluster])) {
    if (c != cluster) {
      survivor = c;
      break;
    }
  }
  std::vector<ItemId> ids(members_[cluster].begin(), members_[cluster].end());
  std::sort(ids.begin(), ids.end());
  for (ItemId id : ids) {
    Item& it = items_.at(id);
    move_member(id, it, survivor);
    mark_pending(id, it);
  }
  retire(cluster);
  stats_.merges += 1;
  if (cfg_.eager) eager_fix(ids);
}

void IvfIndex::eager_fix(const std::vector<ItemId>& ids) {
  if (!source_) throw Error(Errc::ConfigInvalid, "IVF: eager mode needs a vector source");
  for (ItemId id : ids) {
    auto it = items_.find(id);
    if (it == items_.end() || !it->second.pending) continue;
    auto v = source_(id);
    if (!v) continue;
    const int before = it->second.cluster;
    assign(id, it->second, nearest_live(*v), *v);
    it->second.pending = false;
    pending_.erase(id);
    stats_.eager_reassigned += 1;
    if (it->second.cluster != before) stats_.eager_changed += 1;
  }
}

std::size_t IvfIndex::resolve_pending(std::span<const std::pair<ItemId, Vec>> residents) {
  std::size_t n = 0;
  for (const auto& [id, v] : residents) {
    auto it = items_.find(id);
    if (it == items_.end() || !it->second.pending) continue;
    const int before = it->second.cluster;
    assign(id, it->second, nearest_live(v), v);
    it->second.pending = false;
    pending_.erase(id);
    stats_.resolved += 1;
    if (it->second.cluster != before) stats_.resolved_changed += 1;
    ++n;
  }
  return n;
}

std::vector<Candidate> IvfIndex::score(const Vec& q, const std::unordered_set<ItemId>* admissible,
                                       std::size_t n) const {
  std::vector<Candidate> cand;
  auto admitted = [&](ItemId id) { return admissible == nullptr || admissible->contains(id); };
  if (!trained_) {
    for (const auto& [id, v] : warm_) {
      if (admitted(id)) cand.push_back({id, (v - q).squaredNorm(), -1});
    }
  } else {
    std::unordered_map<int, Matrix<float>> tables;
    auto adc = [&](const Item& it) {
      auto t = tables.find(it.base);
      if (t == tables.end()) t = tables.emplace(it.base, pq_.distance_table(q - centroids_[it.base])).first;
      return ProductQuantizer<float>::adc(t->second, it.code);
    };
    if (admissible != nullptr && admissible->size() <= n) {
      for (ItemId id : *admissible) {
        auto it = items_.find(id);
        if (it != items_.end()) cand.push_back({id, adc(it->second), it->second.cluster});
      }
    } else {
      for (int c : live_by_distance(q)) {
        for (ItemId id : members_[c]) {
          if (admitted(id)) cand.push_back({id, adc(items_.at(id)), c});
        }
        if (cand.size() >= n) break;
      }
    }
  }
  std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
    return a.approx_score != b.approx_score ? a.approx_score < b.approx_score : a.id < b.id;
  });
  if (cand.size() > n) cand.resize(n);
  while (cand.size() < n) cand.push_back(Candidate{});
  return cand;
}

std::vector<ItemId> IvfIndex::rerank(std::span<const std::pair<ItemId, Vec>> fetched, const Vec& q, std::size_t K) {
  std::vector<std::pair<float, ItemId>> d;
  d.reserve(fetched.size());
  for (const auto& [id, v] : fetched) {
    if (id != ~ItemId{0}) d.emplace_back((v - q).squaredNorm(), id);
  }
  std::sort(d.begin(), d.end());
  d.erase(std::unique(d.begin(), d.end(), [](auto& a, auto& b) { return a.second == b.second; }), d.end());
  std::vector<ItemId> out;
  for (std::size_t i = 0; i < d.size() && out.size() < K; ++i) out.push_back(d[i].second);
  return out;
}

bool IvfIndex::is_pending(ItemId id) const { return pending_.contains(id); }
std::size_t IvfIndex::pending_count() const { return pending_.size(); }

int IvfIndex::cluster_of(ItemId id) const {
  auto it = items_.find(id);
  return it == items_.end() ? -1 : it->second.cluster;
}

std::optional<LogicalTime> IvfIndex::expiry(ItemId id) const {
  auto it = items_.find(id);
  if (it == items_.end()) return std::nullopt;
  return it->second.expiry;
}

void IvfIndex::set_expiry(ItemId id, LogicalTime t) { items_.at(id).expiry = t; }

std::vector<ItemId> IvfIndex::ids() const {
  std::vector<ItemId> out;
  out.reserve(items_.size());
  for (const auto& [id, it] : items_) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

namespace {
void put_vec(ByteWriter& w, const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) w.f32(v(i));
}
Vec get_vec(ByteReader& r, int dim) {
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = r.f32();
  return v;
}
}  // namespace

Bytes IvfIndex::serialize() const {
  ByteWriter w;
  w.u32(cfg_.dim);
  w.u32(cfg_.m);
  w.u32(cfg_.nbits);
  w.u8(trained_ ? 1 : 0);
  w.f32(train_err_);
  std::ostringstream rs;
  rs << rng_;
  w.str(rs.str());
  w.u64(centroids_.size());
  for (std::size_t c = 0; c < centroids_.size(); ++c) {
    put_vec(w, centroids_[c]);
    w.u8(retired_[c] ? 1 : 0);
  }
  if (trained_) {
    for (int j = 0; j < pq_.m(); ++j) {
      const auto& book = pq_.codebook(j);
      for (Eigen::Index c = 0; c < book.cols(); ++c) put_vec(w, book.col(c));
    }
  }
  auto ids_sorted = ids();
  w.u64(ids_sorted.size());
  for (ItemId id : ids_sorted) {
    const Item& it = items_.at(id);
    w.u64(id);
    w.u32(static_cast<std::uint32_t>(it.cluster));
    w.u32(static_cast<std::uint32_t>(it.base));
    w.u64(it.expiry);
    w.u8(it.pending ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(it.code.size()));
    w.raw(it.code);
  }
  w.u64(warm_.size());
  for (const auto& [id, v] : warm_) {
    w.u64(id);
    put_vec(w, v);
  }
  w.u64(stats_.splits);
  w.u64(stats_.merges);
  w.u64(stats_.resolved);
  w.u64(stats_.resolved_changed);
  return std::move(w).take();
}

void IvfIndex::deserialize(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  if (static_cast<int>(r.u32()) != cfg_.dim || static_cast<int>(r.u32()) != cfg_.m ||
      static_cast<int>(r.u32()) != cfg_.nbits) {
    throw Error(Errc::ConfigInvalid, "IVF state does not match configuration");
  }
  trained_ = r.u8() != 0;
  train_err_ = r.f32();
  std::istringstream rs(r.str());
  rs >> rng_;
  centroids_.clear();
  retired_.clear();
  members_.clear();
  for (auto n = r.u64(); n > 0; --n) {
    add_centroid(get_vec(r, cfg_.dim));
    retired_.back() = r.u8() != 0;
  }
  pq_ = ProductQuantizer<float>(cfg_.dim, cfg_.m, cfg_.nbits);
  if (trained_) {
    std::vector<Matrix<float>> books(cfg_.m, Matrix<float>(pq_.dsub(), pq_.ksub()));
    for (auto& book : books) {
      for (Eigen::Index c = 0; c < book.cols(); ++c) book.col(c) = get_vec(r, pq_.dsub());
    }
    pq_.set_codebooks(std::move(books));
  }
  items_.clear();
  pending_.clear();
  for (auto n = r.u64(); n > 0; --n) {
    ItemId id = r.u64();
    Item it;
    it.cluster = static_cast<int>(r.u32());
    it.base = static_cast<int>(r.u32());
    it.expiry = r.u64();
    it.pending = r.u8() != 0;
    auto cl = r.u8();
    auto code = r.raw(cl);
    it.code.assign(code.begin(), code.end());
    if (it.cluster >= 0) members_.at(it.cluster).insert(id);
    if (it.pending) pending_.insert(id);
    items_[id] = std::move(it);
  }
  warm_.clear();
  for (auto n = r.u64(); n > 0; --n) {
    ItemId id = r.u64();
    warm_[id] = get_vec(r, cfg_.dim);
  }
  stats_ = {};
  stats_.splits = r.u64();
  stats_.merges = r.u64();
  stats_.resolved = r.u64();
  stats_.resolved_changed = r.u64();
  if (!r.done()) throw Error(Errc::MalformedMetadata, "trailing bytes in IVF state");
}

std::string IvfIndex::debug_json() const {
  nlohmann::json j;
  j["trained"] = trained_;
  j["items"] = items_.size();
  j["pending"] = pending_.size();
  j["splits"] = stats_.splits;
  j["merges"] = stats_.merges;
  j["resolved"] = stats_.resolved;
  j["resolved_changed"] = stats_.resolved_changed;
  nlohmann::json clusters = nlohmann::json::array();
  for (int c : live_cluster_ids()) clusters.push_back({{"id", c}, {"size", members_[c].size()}});
  j["clusters"] = clusters;
  return j.dump();
}

}  // namespace opal::ann
