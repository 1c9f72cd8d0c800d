#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "opal/ann/pq.hpp"
#include "opal/common.hpp"

namespace opal::ann {

using Vec = Eigen::VectorXf;

struct IvfConfig {
  int dim = 64;
  int m = 8;
  int nbits = 8;
  std::size_t warmup = 2048;     // items buffered before the quantizers are trained
  std::size_t n_target = 8192;   // steady-state size; sets nlist = ceil(sqrt(n_target))
  double split_factor = 2.0;
  double merge_factor = 0.2;
  double margin = 0.1;           // neighbor-pending margin, fraction of child spacing
  int neighbor_clusters = 4;
  int kmeans_iters = 20;
  bool eager = false;            // reassign immediately from full vectors
  std::uint64_t seed = 7;

  std::size_t nlist_target() const;
  double target_mean() const;
};

struct Candidate {
  ItemId id = ~ItemId{0};
  float approx_score = 0;
  int cluster = -1;
  bool dummy() const { return id == ~ItemId{0}; }
};

struct IvfStats {
  std::uint64_t splits = 0;
  std::uint64_t merges = 0;
  std::uint64_t resolved = 0;
  std::uint64_t resolved_changed = 0;
  std::uint64_t eager_reassigned = 0;
  std::uint64_t eager_changed = 0;
};

class IvfIndex {
 public:
  // Full-vector lookup used only by the eager baseline, standing in for the
  // extra fetches that eager reassignment needs.
  using VectorSource = std::function<std::optional<Vec>(ItemId)>;

  explicit IvfIndex(IvfConfig cfg);

  int insert(ItemId id, const Vec& v, LogicalTime expiry);
  // Drops the item; may merge its cluster.
  void remove(ItemId id);
  std::vector<Candidate> score(const Vec& q, const std::unordered_set<ItemId>* admissible, std::size_t n) const;
  static std::vector<ItemId> rerank(std::span<const std::pair<ItemId, Vec>> fetched, const Vec& q, std::size_t K);

  void maybe_split(int cluster);
  void maybe_merge(int cluster);
  // Reassigns pending items among the given residents from their full vectors.
  std::size_t resolve_pending(std::span<const std::pair<ItemId, Vec>> residents);

  bool contains(ItemId id) const { return items_.contains(id); }
  std::size_t size() const { return items_.size(); }
  bool trained() const { return trained_; }
  bool is_pending(ItemId id) const;
  std::size_t pending_count() const;
  int cluster_of(ItemId id) const;
  std::size_t live_clusters() const;
  std::size_t cluster_size(int cluster) const { return members_.at(cluster).size(); }
  std::vector<int> live_cluster_ids() const;
  const Vec& centroid(int cluster) const { return centroids_.at(cluster); }
  std::optional<LogicalTime> expiry(ItemId id) const;
  void set_expiry(ItemId id, LogicalTime t);
  std::vector<ItemId> ids() const;
  // Reconstruction from enclave-resident metadata only.
  Vec reconstruct(ItemId id) const;
  const IvfStats& stats() const { return stats_; }
  const IvfConfig& config() const { return cfg_; }
  const ProductQuantizer<float>& pq() const { return pq_; }
  float training_error() const { return train_err_; }

  void set_vector_source(VectorSource src) { source_ = std::move(src); }

  // Test hooks: start from explicit centroids (PQ trained on residuals of
  // sample, columns are points) or train early on whatever is buffered.
  void seed_centroids(const std::vector<Vec>& centroids, const Matrix<float>& sample);
  void force_train();

  Bytes serialize() const;
  void deserialize(std::span<const std::uint8_t> bytes);
  std::string debug_json() const;

 private:
  struct Item {
    int cluster = -1;
    int base = -1;
    ProductQuantizer<float>::Code code;
    LogicalTime expiry = 0;
    bool pending = false;
  };

  void train();
  int nearest_live(const Vec& v, float* dist2 = nullptr) const;
  std::vector<int> live_by_distance(const Vec& v) const;
  int add_centroid(const Vec& c);
  void retire(int cluster);
  void assign(ItemId id, Item& it, int cluster, const Vec& v);
  void move_member(ItemId id, Item& it, int cluster);
  void mark_pending(ItemId id, Item& it);
  void eager_fix(const std::vector<ItemId>& ids);

  IvfConfig cfg_;
  ProductQuantizer<float> pq_;
  bool trained_ = false;
  float train_err_ = 0;
  std::mt19937_64 rng_;

  std::vector<Vec> centroids_;
  std::vector<bool> retired_;
  std::vector<std::unordered_set<ItemId>> members_;
  std::unordered_map<ItemId, Item> items_;
  std::map<ItemId, Vec> warm_;  // exact vectors before training
  std::unordered_set<ItemId> pending_;
  VectorSource source_;
  IvfStats stats_;
};

}  // namespace opal::ann
