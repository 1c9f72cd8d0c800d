// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Pass criterion numbers as arguments
// to run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "opal/controller.hpp"
#include "opal/dreaming.hpp"
#include "opal/harness/bandwidth.hpp"
#include "opal/harness/fuzz.hpp"
#include "opal/harness/game.hpp"
#include "opal/harness/replay.hpp"
#include "opal/harness/uplift.hpp"
#include "opal/workload/hawkes.hpp"
#include "opal/workload/questions.hpp"

using namespace opal;
using namespace opal::harness;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Verdict obliviousness() {
  GameConfig cfg;  // 200 ops, L=10, n=200, K=10, T=5
  const auto t0 = Clock::now();
  auto suite = run_game_suite(cfg, 100, 1, 0);
  const double secs = seconds_since(t0);
  std::size_t divergent = 0;
  for (const auto& v : suite.verdicts) divergent += !v.rejected && !v.equivalent;
  bool ok = suite.passed == 100 && suite.rejected == 0 && divergent == 0 && secs < 300.0;
  return {ok, fmt("%zu/100 pairs equivalent, %zu divergent, %zu rejected, %.1f s (limit 300 s)", suite.passed,
                  divergent, suite.rejected, secs)};
}

Verdict dream_neutrality() {
  GameConfig cfg;
  std::vector<std::optional<std::size_t>> div(20);
  parallel_for(20, 0, [&](std::size_t i) { div[i] = dream_divergence(cfg, 1000 + i); });
  std::size_t bad = 0;
  for (const auto& d : div) bad += d.has_value();
  return {bad == 0, fmt("%zu/20 seeds with identical traces", 20 - bad)};
}

Verdict integrity() {
  FuzzConfig cfg;  // 10^4 flips per target
  auto r = run_fuzz(cfg);
  bool ok = true;
  for (const FuzzCount* c : {&r.bucket, &r.record, &r.checkpoint, &r.stale, &r.replay}) {
    ok = ok && c->trials > 0 && c->detected == c->trials;
  }
  ok = ok && r.bucket.trials + r.record.trials + r.checkpoint.trials >= 10000;
  std::string d = fuzz_summary(r);
  while (!d.empty() && d.back() == '\n') d.pop_back();
  for (auto& ch : d)
    if (ch == '\n') ch = ';';
  return {ok, d};
}

Verdict trace_arithmetic() {
  GameConfig g;
  ControllerConfig cc = game_controller_config(g);
  TraceRecorder trace;
  Controller ctl(cc, std::make_unique<TestEnclaves>(cc.ivf.dim), &trace, crypto::ClientSecret::from_seed(3));
  const PadSizes& pads = cc.pads;
  std::uint64_t ctr = 0;
  std::string why;
  auto is_call = [](const TraceEvent& e, std::size_t pad) {
    return e.kind == EventKind::InterEnclaveCall && !e.store && e.byte_count == pad;
  };
  auto is_access = [](const TraceEvent& e, Tree t, std::uint64_t b) {
    return e.kind == EventKind::OramAccess && e.store == t && e.batch_size == b;
  };
  auto ingest = [&](ItemId id) {
    IngestRequest r;
    r.text = "chunk " + std::to_string(id) + " alpha beta gamma";
    r.meta.chunk_id = id;
    r.meta.artifact_id = "a" + std::to_string(id);
    r.meta.timestamp = 1736121600 + static_cast<std::int64_t>(id);
    const std::size_t from = trace.size();
    ctl.ingest(r, ++ctr);
    return trace.events_since(from);
  };
  std::size_t checked = 0;
  for (ItemId id = 1; id <= 4 * g.T; ++id) {
    auto ev = ingest(id);
    bool base = ev.size() >= 3 && is_call(ev[0], pads.embed) && is_access(ev[1], Tree::ANN, 1) &&
                is_access(ev[2], Tree::Data, 1);
    bool ok = base;
    if (id % g.T == 0) {
      ok = ok && ev.size() == 7 && is_call(ev[3], pads.summarize) && is_call(ev[4], pads.embed) &&
           is_access(ev[5], Tree::ANN, 1) && is_access(ev[6], Tree::Data, 1);
    } else {
      ok = ok && ev.size() == 3;
    }
    if (!ok && why.empty()) why = fmt("ingest %llu emitted %zu events", static_cast<unsigned long long>(id), ev.size());
    ++checked;
    if (id % 3 == 0) {
      const std::size_t from = trace.size();
      ctl.query({"alpha " + std::to_string(id), 1736121600}, ++ctr);
      auto q = trace.events_since(from);
      bool qok = q.size() == 5 && is_call(q[0], pads.traverse) && is_call(q[1], pads.embed) &&
                 is_access(q[2], Tree::ANN, g.n) && is_access(q[3], Tree::Data, g.K) && is_call(q[4], pads.synthesize);
      if (!qok && why.empty()) why = fmt("query after ingest %llu emitted %zu events", static_cast<unsigned long long>(id), q.size());
      ++checked;
    }
  }
  return {why.empty(), why.empty() ? fmt("%zu requests matched exactly (query: 3 calls + ANN(%zu) + Data(%zu))", checked,
                                          g.n, g.K)
                                   : why};
}

// Shared by criteria 5-7.
std::optional<ReplayReport> g_replay;
double g_replay_secs = 0;

const ReplayReport& replay() {
  if (!g_replay) {
    ReplayConfig cfg;  // N_target 8192
    const auto t0 = Clock::now();
    g_replay = run_replay(cfg);
    g_replay_secs = seconds_since(t0);
  }
  return *g_replay;
}

Verdict retention() {
  const auto& r = replay();
  const double live_err = r.steady_live / 8192.0 - 1.0;
  const double life_err = r.lifetime_target > 0 ? r.lifetime_mean / r.lifetime_target - 1.0 : 1.0;
  bool ok = std::abs(live_err) <= 0.10 && std::abs(life_err) <= 0.10 && r.expired > 0 && g_replay_secs < 600.0;
  return {ok, fmt("steady live %.0f vs 8192 (%+.1f%%), mean lifetime %.0f vs %.0f ticks (%+.1f%%, std %.0f), "
                  "w=%.4f ttl=%llu, %.1f s (limit 600 s)",
                  r.steady_live, 100 * live_err, r.lifetime_mean, r.lifetime_target, 100 * life_err, r.lifetime_std,
                  r.w, static_cast<unsigned long long>(r.ttl), g_replay_secs)};
}

Verdict stash_bound() {
  const auto& r = replay();
  return {r.stash_max <= 128, fmt("stash max %zu blocks (limit 128)", r.stash_max)};
}

Verdict sleepy_vs_eager() {
  const auto& r = replay();
  const double gap = 100 * std::abs(r.recall_sleepy - r.recall_eager);
  bool ok = !r.probes.empty() && gap <= 2.0 && r.change_fraction < 0.25;
  return {ok, fmt("recall@10 sleepy %.3f vs eager %.3f (gap %.2f pp, limit 2), cluster-changing resolutions "
                  "%.1f%% of %llu (limit 25%%)",
                  r.recall_sleepy, r.recall_eager, gap, 100 * r.change_fraction,
                  static_cast<unsigned long long>(r.resolved))};
}

Verdict bandwidth() {
  BandwidthConfig cfg;  // 2^8 .. 2^14
  cfg.threads = 0;
  auto r = run_bandwidth(cfg);
  bool ok = r.opal_log.r2 > 0.95 && r.inmemory_lin.r2 > 0.95 && r.inmemory_lin.slope > 0 && r.ratio_at_max >= 100.0;
  return {ok, fmt("opal a*log2N+b R2=%.4f, inmemory linear R2=%.4f, ratio at 2^%d = %.2fx (target >= 100x)",
                  r.opal_log.r2, r.inmemory_lin.r2, cfg.max_log, r.ratio_at_max)};
}

Verdict uplift() {
  UpliftConfig cfg;  // 500 questions
  cfg.threads = 0;
  auto r = run_uplift(cfg);
  bool ok = r.questions == 500 && r.uplift_pp >= 10.0 && r.soundness == 1.0;
  return {ok, fmt("KG %.1f%% vs ANN-only %.1f%% (+%.1f pp, need 10), soundness %.1f%%, extractor exact %.1f%%",
                  100 * r.kg_rate, 100 * r.ann_rate, r.uplift_pp, 100 * r.soundness, 100 * r.extractor_exact)};
}

Verdict hawkes() {
  using namespace workload;
  std::vector<std::string> notes;
  bool ok = true;

  // Degenerate alpha = 0 case against Poisson counts.
  ModalVec mu = default_daily_targets() / 24.0;
  auto pcfg = HawkesConfig::poisson(mu);
  const Hours ph = 24 * 30;
  auto pev = simulate(pcfg, ph, 17);
  auto counts = count_by_modality(pev);
  double worst = 0;
  for (int m = 0; m < kNumModalities; ++m) {
    const double expect = mu[m] * ph;
    worst = std::max(worst, std::abs(counts[m] - expect) / std::sqrt(expect));
  }
  ok = ok && worst < 3.0;
  notes.push_back(fmt("poisson max |z|=%.2f", worst));

  // Branching ratios over >= 10^5 events, and gating.
  auto cfg = HawkesConfig::defaults();
  Hours horizon = 24 * 220;
  auto ev = simulate(cfg, horizon, 23);
  const double a_ee = branching_estimate(ev, cfg, Modality::Email, Modality::Email, horizon);
  const double a_mm = branching_estimate(ev, cfg, Modality::Message, Modality::Message, horizon);
  const bool enough = ev.size() >= 100000;
  const bool alphas = std::abs(a_ee / 0.40 - 1) <= 0.05 && std::abs(a_mm / 0.60 - 1) <= 0.05;
  std::size_t gated = 0;
  for (const auto& e : ev) gated += cfg.schedule.gated(e.modality, e.t);
  ok = ok && enough && alphas && gated == 0;
  notes.push_back(fmt("%zu events, alpha_ee=%.3f alpha_msg=%.3f, %zu gated", ev.size(), a_ee, a_mm, gated));

  // Recency sampler on a uniform one-year corpus (one artifact per hour).
  std::vector<double> ages;
  for (int h = 0; h < 365 * 24; ++h) ages.push_back((h + 0.5) / 24.0);
  RecencyWeights w;
  std::mt19937_64 rng(29);
  const int draws = 200000;
  int day = 0, week = 0, month = 0;
  for (int i = 0; i < draws; ++i) {
    const double a = ages[sample_by_recency(ages, w, rng)];
    day += a < 1;
    week += a < 7;
    month += a < 30;
  }
  const double got[3] = {100.0 * day / draws, 100.0 * week / draws, 100.0 * month / draws};
  const double want[3] = {6.6, 21.9, 45.9};
  bool buckets = true;
  for (int i = 0; i < 3; ++i) buckets = buckets && std::abs(got[i] - want[i]) <= 5.0;
  ok = ok && buckets;
  notes.push_back(fmt("recency day/week/month %.1f/%.1f/%.1f%% vs 6.6/21.9/45.9%% (+-5 pp)", got[0], got[1], got[2]));

  std::string d;
  for (const auto& n : notes) d += (d.empty() ? "" : "; ") + n;
  return {ok, d};
}

Verdict ttl_formula() {
  bool ok = true;
  for (std::size_t N : {1000u, 8192u, 12345u})
    for (int K : {1, 5, 10, 200}) ok = ok && compute_ttl({N, 1.0, 1.0, K}) == N;
  for (double w : {0.1, 0.5, 0.9}) ok = ok && retention_eta(w, 1) == 1.0;
  const double eta = retention_eta(0.5, 10);
  ok = ok && std::abs(eta - 2.1513) < 1e-4;
  for (std::size_t N : {1000u, 8192u}) {
    ok = ok && compute_ttl({N, 0.5, 2.0, 10}) == static_cast<std::uint64_t>(std::ceil(N / eta));
  }
  return {ok, fmt("eta(0.5,10)=%.4f, ttl(1000,w=0.5,c=2,K=10)=%llu, ttl(1000,w=0.5,c=1,K=10)=%llu", eta,
                  static_cast<unsigned long long>(compute_ttl({1000, 0.5, 2.0, 10})),
                  static_cast<unsigned long long>(compute_ttl({1000, 0.5, 1.0, 10})))};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"obliviousness", obliviousness},   {"dream neutrality", dream_neutrality},
      {"integrity and freshness", integrity}, {"trace arithmetic", trace_arithmetic},
      {"retention convergence", retention}, {"stash bound", stash_bound},
      {"sleepy vs eager", sleepy_vs_eager}, {"bandwidth scaling", bandwidth},
      {"kg filtering uplift", uplift},    {"hawkes statistics", hawkes},
      {"ttl formula", ttl_formula},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int num = static_cast<int>(i) + 1;
    if (!only.empty() && !only.contains(num)) continue;
    Verdict v;
    const auto t0 = Clock::now();
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("%s %2d %s: %s [%.1f s]\n", v.pass ? "PASS" : "FAIL", num, criteria[i].first, v.detail.c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
