#include "opal/harness/replay.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_map>

#include "opal/harness/common.hpp"

namespace opal::harness {

namespace {

std::vector<ItemId> exact_top(const std::unordered_map<ItemId, ann::Vec>& vecs, const ann::Vec& q, std::size_t k) {
  std::vector<std::pair<float, ItemId>> d;
  d.reserve(vecs.size());
  for (const auto& [id, v] : vecs) d.emplace_back((v - q).squaredNorm(), id);
  k = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
  std::vector<ItemId> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(d[i].second);
  return out;
}

std::vector<ItemId> index_top(const ann::IvfIndex& ix, const std::unordered_map<ItemId, ann::Vec>& vecs,
                              const ann::Vec& q, std::size_t n, std::size_t k) {
  std::vector<std::pair<ItemId, ann::Vec>> fetched;
  for (const auto& c : ix.score(q, nullptr, n)) {
    if (c.dummy()) continue;
    auto it = vecs.find(c.id);
    if (it != vecs.end()) fetched.emplace_back(c.id, it->second);
  }
  return ann::IvfIndex::rerank(fetched, q, k);
}

double overlap(const std::vector<ItemId>& a, const std::vector<ItemId>& truth) {
  if (truth.empty()) return 1.0;
  std::size_t hit = 0;
  for (auto id : a) hit += std::find(truth.begin(), truth.end(), id) != truth.end();
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

}  // namespace

int replay_depth(const ReplayConfig& cfg) {
  if (cfg.L > 0) return cfg.L;
  int L = 1;
  while ((std::size_t{4} << L) < cfg.n_target) ++L;
  return L;
}

ControllerConfig replay_controller_config(const ReplayConfig& cfg, double w) {
  ControllerConfig cc;
  cc.pub = PublicParams{200, 10, 5, replay_depth(cfg), 4};
  cc.retention = RetentionConfig{cfg.n_target, w, cfg.c, 10};
  cc.ivf.n_target = cfg.n_target;
  cc.dreaming = cfg.dreaming;
  cc.seed = cfg.seed;
  cc.checkpoint_pad = 64u << 20;
  return cc;
}

ReplayReport run_replay(const ReplayConfig& cfg, const workload::Corpus& corpus) {
  ReplayReport r;
  r.w = corpus.write_ratio(5);
  r.chunks = corpus.chunks.size();
  r.queries = corpus.queries.size();
  ControllerConfig cc = replay_controller_config(cfg, r.w);
  r.ttl = cc.ttl();
  r.lifetime_target = static_cast<double>(cfg.n_target) / (r.w * cfg.c);

  Controller ctl(cc, make_enclaves(corpus, cc.ivf.dim), nullptr, crypto::ClientSecret::from_seed(cfg.seed));
  HashingEmbedder embed(cc.ivf.dim);

  // Exact vectors of everything live, for the oracle and the eager baseline.
  std::unordered_map<ItemId, ann::Vec> vecs;
  std::unordered_map<ItemId, LogicalTime> born;
  ann::IvfConfig eager_cfg = cc.ivf;
  eager_cfg.eager = true;
  ann::IvfIndex eager(eager_cfg);
  eager.set_vector_source([&](ItemId id) -> std::optional<ann::Vec> {
    auto it = vecs.find(id);
    if (it == vecs.end()) return std::nullopt;
    return it->second;
  });

  double life_sum = 0, life_sq = 0;
  ctl.set_insert_observer([&](ItemId id, LogicalTime t, const ann::Vec& v) {
    vecs[id] = v;
    born[id] = t;
    if (cfg.eager_shadow) eager.insert(id, v, ~LogicalTime{0});
  });
  ctl.set_expiry_observer([&](ItemId id, LogicalTime t) {
    auto b = born.find(id);
    if (b != born.end()) {
      const double life = static_cast<double>(t - b->second);
      life_sum += life;
      life_sq += life * life;
      ++r.expired;
      born.erase(b);
    }
    vecs.erase(id);
    if (cfg.eager_shadow && eager.contains(id)) eager.remove(id);
  });

  std::mt19937_64 rng(cfg.seed ^ 0xabcdefULL);
  std::size_t raw = 0;
  std::size_t topk_total = 0, topk_summaries = 0;
  std::uint64_t ctr = 0;
  LogicalTime next_sample = 0;
  auto sample = [&] {
    while (ctl.clock() >= next_sample) {
      r.timeline.push_back({ctl.clock(), ctl.live_items(), ctl.live_summaries(), ctl.backend().stash_size(),
                            ctl.index().pending_count()});
      next_sample += cfg.sample_every;
    }
  };
  auto probe = [&] {
    RecallProbe p;
    p.tick = ctl.clock();
    for (std::size_t i = 0; i < cfg.probe_queries; ++i) {
      // Query near a random live chunk: its text plus nothing else.
      const auto& ch = corpus.chunks[rng() % raw];
      const ann::Vec q = embed.embed(ch.text);
      const auto truth = exact_top(vecs, q, cfg.recall_k);
      p.sleepy += overlap(index_top(ctl.index(), vecs, q, cc.pub.n, cfg.recall_k), truth);
      if (cfg.eager_shadow) p.eager += overlap(index_top(eager, vecs, q, cc.pub.n, cfg.recall_k), truth);
    }
    p.sleepy /= static_cast<double>(cfg.probe_queries);
    p.eager /= static_cast<double>(cfg.probe_queries);
    r.probes.push_back(p);
  };

  for (const auto& op : corpus.ops) {
    if (op.kind == workload::Op::Kind::Ingest) {
      ctl.ingest(make_ingest(corpus, corpus.chunks[op.index]), ++ctr);
      ++raw;
      if (cfg.probe_every && raw % cfg.probe_every == 0) probe();
    } else {
      const auto& q = corpus.queries[op.index];
      auto res = ctl.query(QueryRequest{q.text, q.timestamp}, ++ctr);
      for (auto id : res.top_k) {
        ++topk_total;
        topk_summaries += ctl.is_summary(id);
      }
    }
    sample();
  }

  r.ticks = ctl.clock();
  r.stash_max = ctl.backend().stash_max();
  r.steady_from = static_cast<LogicalTime>(1.5 * r.lifetime_target);
  double s = 0;
  std::size_t k = 0;
  for (const auto& t : r.timeline) {
    if (t.tick >= r.steady_from) s += static_cast<double>(t.live), ++k;
  }
  r.steady_live = k ? s / static_cast<double>(k) : 0.0;
  if (r.expired) {
    r.lifetime_mean = life_sum / static_cast<double>(r.expired);
    r.lifetime_std = std::sqrt(std::max(0.0, life_sq / static_cast<double>(r.expired) - r.lifetime_mean * r.lifetime_mean));
  }
  for (const auto& p : r.probes) r.recall_sleepy += p.sleepy, r.recall_eager += p.eager;
  if (!r.probes.empty()) {
    r.recall_sleepy /= static_cast<double>(r.probes.size());
    r.recall_eager /= static_cast<double>(r.probes.size());
  }
  r.resolved = ctl.index().stats().resolved;
  r.resolved_changed = ctl.index().stats().resolved_changed;
  r.change_fraction = r.resolved ? static_cast<double>(r.resolved_changed) / static_cast<double>(r.resolved) : 0.0;
  if (ctl.live_items()) {
    r.summary_store_share = static_cast<double>(ctl.live_summaries()) / static_cast<double>(ctl.live_items());
  }
  if (topk_total) r.summary_topk_share = static_cast<double>(topk_summaries) / static_cast<double>(topk_total);
  return r;
}

ReplayReport run_replay(const ReplayConfig& cfg) {
  workload::CorpusConfig cc;
  cc.days = cfg.days;
  cc.seed = cfg.seed;
  return run_replay(cfg, workload::generate_corpus(cc));
}

void write_timeline_csv(const ReplayReport& r, std::ostream& out) {
  out << "tick,live,summaries,stash,pending\n";
  for (const auto& t : r.timeline) {
    out << t.tick << ',' << t.live << ',' << t.summaries << ',' << t.stash << ',' << t.pending << '\n';
  }
}

void write_recall_csv(const ReplayReport& r, std::ostream& out) {
  out << "tick,recall_sleepy,recall_eager\n";
  for (const auto& p : r.probes) out << p.tick << ',' << p.sleepy << ',' << p.eager << '\n';
}

}  // namespace opal::harness
