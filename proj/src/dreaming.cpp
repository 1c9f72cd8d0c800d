#include "opal/dreaming.hpp"

#include <cmath>

namespace opal {

double retention_eta(double w, int K) { return 1.0 + (1.0 - w) * std::log(static_cast<double>(K)); }

std::uint64_t compute_ttl(const RetentionConfig& cfg) {
  if (!(cfg.w > 0.0 && cfg.w <= 1.0)) throw Error(Errc::DomainError, "write ratio must be in (0, 1]");
  if (!(cfg.c >= 1.0)) throw Error(Errc::DomainError, "chunks per item must be >= 1");
  if (cfg.K < 1) throw Error(Errc::DomainError, "K must be >= 1");
  const double eta = retention_eta(cfg.w, cfg.K);
  const double raw = static_cast<double>(cfg.n_target) / (cfg.w * cfg.c * eta);
  // Guard against 930.0000000001 style rounding before the ceiling.
  const double rounded = std::round(raw);
  if (std::abs(raw - rounded) < 1e-9 * std::max(1.0, raw)) return static_cast<std::uint64_t>(rounded);
  return static_cast<std::uint64_t>(std::ceil(raw));
}

DreamReport Dreamer::run(const DreamContext& ctx, const DreamHooks& hooks, bool refresh) {
  DreamReport rep;
  std::unordered_set<ItemId> gone;
  for (const auto& r : ctx.residents) {
    if (!r.requested || !refresh) continue;
    if (hooks.expiry(r.id)) {
      hooks.set_expiry(r.id, ctx.clock + ttl_);
      rep.refreshed += 1;
    }
  }
  for (const auto& r : ctx.residents) {
    // Items the current request asked for are never dropped by that request.
    if (r.requested) continue;
    auto exp = hooks.expiry(r.id);
    if (!exp || ctx.clock < *exp) continue;
    // Deletion is allowed only while the store is at capacity.
    if (hooks.live_count() < n_target_) break;
    hooks.erase(r.id);
    gone.insert(r.id);
    rep.expired += 1;
  }
  if (hooks.resolve) {
    if (gone.empty()) {
      rep.resolved = hooks.resolve(ctx);
    } else {
      DreamContext rest{ctx.tree, ctx.clock, {}};
      for (const auto& r : ctx.residents) {
        if (!gone.contains(r.id)) rest.residents.push_back(r);
      }
      rep.resolved = hooks.resolve(rest);
    }
  }
  totals_ += rep;
  return rep;
}

}  // namespace opal
