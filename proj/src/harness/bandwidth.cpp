#include "opal/harness/bandwidth.hpp"

#include <cmath>

#include "opal/harness/game.hpp"

namespace opal::harness {

const char* store_name(StoreKind s) {
  switch (s) {
    case StoreKind::Oram: return "opal";
    case StoreKind::Plaintext: return "plaintext";
    case StoreKind::InMemory: return "inmemory";
  }
  return "?";
}

namespace {

std::uint64_t access_bytes(const std::vector<TraceEvent>& ev) {
  std::uint64_t s = 0;
  for (const auto& e : ev) {
    if (e.kind == EventKind::OramAccess) s += e.byte_count;
  }
  return s;
}

}  // namespace

BandwidthRow measure_bandwidth(StoreKind store, int log_n, std::size_t queries, std::uint64_t seed) {
  const std::size_t N = std::size_t{1} << log_n;
  GameConfig g;
  g.dataset_size = N;
  g.steps = queries;
  g.query_fraction = 1.0;
  g.L = log_n - 1;
  g.n_target = N;
  g.dreaming = false;
  auto world = adversary_worlds(g, seed).first;

  ControllerConfig cc = game_controller_config(g);
  cc.store = store;
  cc.seed = seed;
  TraceRecorder trace;
  Controller ctl(cc, std::make_unique<TestEnclaves>(cc.ivf.dim, RuleExtractor(game_roster(), game_projects())),
                 &trace, crypto::ClientSecret::from_seed(seed));
  std::uint64_t ctr = 0;
  for (const auto& d : world.dataset) ctl.ingest(d, ++ctr);
  const auto fill = access_bytes(trace.events());
  const std::size_t mark = trace.size();
  for (const auto& op : world.script) ctl.query(op.query, ++ctr);
  const auto q = access_bytes(trace.events_since(mark));

  BandwidthRow row;
  row.N = N;
  row.L = g.L;
  row.store = store;
  row.per_query_bytes = static_cast<double>(q) / static_cast<double>(queries);
  row.per_ingest_bytes = static_cast<double>(fill) / static_cast<double>(N);
  return row;
}

BandwidthReport run_bandwidth(const BandwidthConfig& cfg) {
  const StoreKind stores[] = {StoreKind::Oram, StoreKind::InMemory, StoreKind::Plaintext};
  const int sizes = cfg.max_log - cfg.min_log + 1;
  BandwidthReport r;
  r.rows.resize(static_cast<std::size_t>(sizes) * 3);
  parallel_for(r.rows.size(), cfg.threads, [&](std::size_t i) {
    const int log_n = cfg.min_log + static_cast<int>(i / 3);
    r.rows[i] = measure_bandwidth(stores[i % 3], log_n, cfg.queries, cfg.seed + static_cast<std::uint64_t>(log_n));
  });

  std::vector<double> logn, n, opal, mem, plain;
  for (const auto& row : r.rows) {
    if (row.store == StoreKind::Oram) {
      logn.push_back(std::log2(static_cast<double>(row.N)));
      n.push_back(static_cast<double>(row.N));
      opal.push_back(row.per_query_bytes);
    } else if (row.store == StoreKind::InMemory) {
      mem.push_back(row.per_query_bytes);
    } else {
      plain.push_back(row.per_query_bytes);
    }
  }
  r.opal_log = fit_line(logn, opal);
  r.inmemory_lin = fit_line(n, mem);
  r.plaintext_lin = fit_line(n, plain);
  if (!opal.empty() && opal.back() > 0) r.ratio_at_max = mem.back() / opal.back();
  return r;
}

void write_bandwidth_csv(const BandwidthReport& r, std::ostream& out) {
  out << "N,L,store,per_query_bytes,per_ingest_bytes\n";
  for (const auto& row : r.rows) {
    out << row.N << ',' << row.L << ',' << store_name(row.store) << ',' << row.per_query_bytes << ','
        << row.per_ingest_bytes << '\n';
  }
}

}  // namespace opal::harness
