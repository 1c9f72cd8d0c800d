#include "opal/workload/hawkes.hpp"

#include <cmath>
#include <deque>
#include <random>
#include <unordered_map>

namespace opal::workload {

namespace {
constexpr int idx(Modality m) { return static_cast<int>(m); }
}  // namespace

ModalVec default_daily_targets() {
  ModalVec d;
  d[idx(Modality::Email)] = 137.0;
  d[idx(Modality::Meeting)] = 17.1 / 7.0;
  d[idx(Modality::Document)] = 27.0;
  d[idx(Modality::Query)] = 4.0;
  d[idx(Modality::Message)] = 345.0;
  d[idx(Modality::Ambient)] = 8.0;
  return d;
}

HawkesConfig HawkesConfig::defaults() {
  HawkesConfig c;
  auto a = [&](Modality s, Modality d) -> double& { return c.alpha(idx(s), idx(d)); };
  a(Modality::Email, Modality::Email) = 0.40;
  a(Modality::Message, Modality::Message) = 0.60;
  a(Modality::Meeting, Modality::Email) = 0.6;
  a(Modality::Meeting, Modality::Message) = 0.8;
  a(Modality::Meeting, Modality::Document) = 0.3;
  a(Modality::Email, Modality::Message) = 0.05;
  a(Modality::Message, Modality::Email) = 0.03;
  c.beta.setOnes();
  c.beta[idx(Modality::Email)] = std::log(2.0) / (47.0 / 60.0);
  c.beta[idx(Modality::Message)] = std::log(2.0) / 0.25;
  c.beta[idx(Modality::Document)] = std::log(2.0) / 4.0;
  c.calibrate(default_daily_targets() / 24.0);
  return c;
}

HawkesConfig HawkesConfig::poisson(const ModalVec& mu_per_hour) {
  HawkesConfig c;
  c.mu = mu_per_hour;
  c.schedule = LifeSchedule::flat();
  return c;
}

double HawkesConfig::spectral_radius() const {
  Eigen::EigenSolver<ModalMat> es(alpha, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

void HawkesConfig::validate() const {
  if ((mu.array() < 0).any() || (alpha.array() < 0).any() || (beta.array() <= 0).any()) {
    throw Error(Errc::ConfigInvalid, "negative rate, branching or decay parameter");
  }
  for (Modality sink : {Modality::Document, Modality::Query, Modality::Ambient}) {
    if (alpha.row(idx(sink)).cwiseAbs().sum() != 0.0) {
      throw Error(Errc::ConfigInvalid, std::string(modality_name(sink)) + " must not trigger events");
    }
  }
  const double rho = spectral_radius();
  if (rho >= 1.0) throw Error(Errc::SupercriticalConfig, "spectral radius " + std::to_string(rho) + " >= 1");
}

ModalVec HawkesConfig::mean_rates() const {
  return (ModalMat::Identity() - alpha.transpose()).partialPivLu().solve(mu);
}

void HawkesConfig::calibrate(const ModalVec& target_per_hour) {
  mu = (ModalMat::Identity() - alpha.transpose()) * target_per_hour;
  if ((mu.array() < 0).any()) throw Error(Errc::ConfigInvalid, "targets need a negative baseline rate");
}

std::vector<HawkesEvent> simulate(const HawkesConfig& cfg, Hours horizon, std::uint64_t seed) {
  cfg.validate();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  constexpr int M = kNumModalities;

  // ex(dst, src): current kernel mass at dst contributed by src events.
  ModalMat ex = ModalMat::Zero();
  // Recent events per source modality, for parent attribution.
  std::array<std::deque<std::pair<Hours, std::uint64_t>>, M> recent;
  const double keep = 40.0 / cfg.beta.minCoeff();

  std::vector<HawkesEvent> out;
  Hours t = 0;
  auto decay_to = [&](Hours to) {
    const double dt = to - t;
    for (int d = 0; d < M; ++d) ex.row(d) *= std::exp(-cfg.beta[d] * dt);
    t = to;
  };

  while (t < horizon) {
    const LifeState s = LifeSchedule::state_at(t);
    const Hours boundary = std::min(LifeSchedule::next_boundary(t), horizon);
    ModalVec lam;
    for (int m = 0; m < M; ++m) {
      const double g = cfg.schedule.multiplier(static_cast<Modality>(m), s);
      lam[m] = g > 0 ? g * cfg.mu[m] + ex.row(m).sum() : 0.0;
    }
    // Kernel terms only decay until the next event, so lam bounds the
    // intensity on [t, boundary).
    const double bound = lam.sum();
    if (bound <= 0) {
      decay_to(boundary);
      continue;
    }
    const double dt = std::exponential_distribution<double>(bound)(rng);
    if (t + dt >= boundary) {
      decay_to(boundary);
      continue;
    }
    decay_to(t + dt);
    for (int m = 0; m < M; ++m) {
      const double g = cfg.schedule.multiplier(static_cast<Modality>(m), s);
      lam[m] = g > 0 ? g * cfg.mu[m] + ex.row(m).sum() : 0.0;
    }
    double u = unif(rng) * bound;
    if (u >= lam.sum()) continue;
    int m = 0;
    while (m + 1 < M && u >= lam[m]) u -= lam[m++];

    HawkesEvent e;
    e.id = out.size();
    e.t = t;
    e.modality = static_cast<Modality>(m);
    // u is uniform on [0, lam[m]); the background share comes first.
    double r = u - cfg.schedule.multiplier(e.modality, s) * cfg.mu[m];
    if (r >= 0) {
      int src = 0;
      while (src + 1 < M && r >= ex(m, src)) r -= ex(m, src++);
      auto& q = recent[src];
      double total = 0;
      for (const auto& [ti, id] : q) total += std::exp(-cfg.beta[m] * (t - ti));
      double pick = unif(rng) * total;
      for (const auto& [ti, id] : q) {
        pick -= std::exp(-cfg.beta[m] * (t - ti));
        if (pick <= 0) {
          e.parent = id;
          break;
        }
      }
      if (!e.parent && !q.empty()) e.parent = q.back().second;
    }
    out.push_back(e);
    for (int d = 0; d < M; ++d) ex(d, m) += cfg.alpha(m, d) * cfg.beta[d];
    auto& q = recent[m];
    q.emplace_back(t, e.id);
    while (!q.empty() && t - q.front().first > keep) q.pop_front();
  }
  return out;
}

double branching_ratio(const std::vector<HawkesEvent>& events, Modality src, Modality dst) {
  std::size_t parents = 0, children = 0;
  for (const auto& e : events) {
    if (e.modality == src) ++parents;
    if (e.modality == dst && e.parent && events[*e.parent].modality == src) ++children;
  }
  return parents == 0 ? 0.0 : static_cast<double>(children) / static_cast<double>(parents);
}

double branching_estimate(const std::vector<HawkesEvent>& events, const HawkesConfig& cfg, Modality src,
                          Modality dst, Hours horizon) {
  const double beta = cfg.beta[idx(dst)];
  const Hours reach = 40.0 / beta;
  std::size_t children = 0;
  double exposure = 0.0;
  for (const auto& e : events) {
    if (e.modality == dst && e.parent && events[*e.parent].modality == src) ++children;
    if (e.modality != src) continue;
    Hours a = e.t;
    const Hours stop = std::min(horizon, e.t + reach);
    while (a < stop) {
      const Hours b = std::min(LifeSchedule::next_boundary(a), stop);
      if (!cfg.schedule.gated(dst, a)) exposure += std::exp(-beta * (a - e.t)) - std::exp(-beta * (b - e.t));
      a = b;
    }
  }
  return exposure == 0.0 ? 0.0 : static_cast<double>(children) / exposure;
}

std::array<std::size_t, kNumModalities> count_by_modality(const std::vector<HawkesEvent>& events) {
  std::array<std::size_t, kNumModalities> c{};
  for (const auto& e : events) c[idx(e.modality)] += 1;
  return c;
}

}  // namespace opal::workload
