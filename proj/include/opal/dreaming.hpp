#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <unordered_set>

#include "opal/common.hpp"
#include "opal/oram.hpp"

namespace opal {

struct RetentionConfig {
  std::size_t n_target = 8192;
  double w = 1.0;  // fraction of logical operations that are ingests
  double c = 1.0;  // chunks per ingest operation
  int K = 10;
};

// Lifetime-refresh correction: 1 + (1 - w) ln K.
double retention_eta(double w, int K);
// ceil(N / (w c eta)). Throws DomainError outside 0 < w <= 1, c >= 1, K >= 1.
std::uint64_t compute_ttl(const RetentionConfig& cfg);

class LogicalClock {
 public:
  LogicalTime now() const { return t_; }
  LogicalTime tick() { return ++t_; }
  void set(LogicalTime t) { t_ = t; }

 private:
  LogicalTime t_ = 0;
};

struct DreamReport {
  std::size_t expired = 0;
  std::size_t refreshed = 0;
  std::size_t resolved = 0;
  DreamReport& operator+=(const DreamReport& o) {
    expired += o.expired;
    refreshed += o.refreshed;
    resolved += o.resolved;
    return *this;
  }
};

// What a dream may touch: enclave-resident metadata only.
struct DreamHooks {
  std::function<std::optional<LogicalTime>(ItemId)> expiry;
  std::function<void(ItemId, LogicalTime)> set_expiry;
  std::function<std::size_t()> live_count;
  std::function<void(ItemId)> erase;
  std::function<std::size_t(const DreamContext&)> resolve;
};

class Dreamer {
 public:
  Dreamer(std::uint64_t ttl, std::size_t n_target) : ttl_(ttl), n_target_(n_target) {}

  // refresh: whether requested residents of this batch get a new deadline.
  DreamReport run(const DreamContext& ctx, const DreamHooks& hooks, bool refresh);

  std::uint64_t ttl() const { return ttl_; }
  std::size_t n_target() const { return n_target_; }
  const DreamReport& totals() const { return totals_; }
  void set_totals(const DreamReport& r) { totals_ = r; }

 private:
  std::uint64_t ttl_;
  std::size_t n_target_;
  DreamReport totals_;
};

}  // namespace opal
