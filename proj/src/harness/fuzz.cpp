#include "opal/harness/fuzz.hpp"

#include <random>
#include <sstream>

#include "opal/controller.hpp"
#include "opal/harness/game.hpp"

namespace opal::harness {

namespace {

void flip_bit(Bytes& b, std::mt19937_64& rng) {
  const std::size_t pos = rng() % b.size();
  b[pos] ^= static_cast<std::uint8_t>(1u << (rng() % 8));
}

template <class Fn>
void expect_error(FuzzCount& c, Fn&& fn) {
  ++c.trials;
  try {
    fn();
  } catch (const Error& e) {
    ++c.detected;
    ++c.codes[e.code()];
  }
}

Controller small_controller(const FuzzConfig& cfg, TraceRecorder* trace) {
  GameConfig g;
  g.L = cfg.L;
  ControllerConfig cc = game_controller_config(g);
  cc.checkpoint_pad = cfg.checkpoint_pad;
  cc.seed = cfg.seed;
  return Controller(cc, std::make_unique<TestEnclaves>(cc.ivf.dim, RuleExtractor(game_roster(), game_projects())),
                    trace, crypto::ClientSecret::from_seed(cfg.seed));
}

// Drives a small controller through a random world.
std::uint64_t drive(Controller& ctl, const GameWorld& w, std::uint64_t ctr, std::size_t from, std::size_t to) {
  for (std::size_t i = from; i < to && i < w.script.size(); ++i) {
    const auto& op = w.script[i];
    if (op.type == OpType::Query) ctl.query(op.query, ++ctr);
    else ctl.ingest(op.ingest, ++ctr);
  }
  return ctr;
}

}  // namespace

FuzzCount fuzz_buckets(const FuzzConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  crypto::DerivedKeys keys = crypto::derive_keys(crypto::ClientSecret::from_seed(cfg.seed));
  OramConfig oc;
  oc.L = cfg.L;
  oc.block_size = 64;
  oc.seed = cfg.seed;
  MemoryStorage store(oc.tree, oc.geometry());
  OramClient client(oc, store, keys);
  Bytes payload(oc.block_size);
  for (std::size_t i = 0; i < cfg.items; ++i) {
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng());
    client.insert(i + 1, payload);
  }
  const Bytes image = store.snapshot();
  const Bytes state = client.serialize_state();
  const auto buckets = oc.num_buckets();

  FuzzCount c;
  for (std::size_t t = 0; t < cfg.bucket_trials; ++t) {
    const std::uint64_t idx = rng() % buckets;
    Bytes raw = store.peek_raw(idx);
    flip_bit(raw, rng);
    store.tamper_raw(idx, raw);
    int level = 0;
    while (((std::uint64_t{2} << level) - 1) <= idx) ++level;
    const std::uint64_t offset = idx - ((std::uint64_t{1} << level) - 1);
    const int below = cfg.L - level;
    const auto leaf = static_cast<std::uint32_t>((offset << below) | (below ? rng() % (std::uint64_t{1} << below) : 0));
    expect_error(c, [&] { client.evict_path(leaf); });
    store.restore_snapshot(image);
    client.load_state(state);
  }
  return c;
}

FuzzCount fuzz_records(const FuzzConfig& cfg) {
  std::mt19937_64 rng(cfg.seed + 1);
  auto keys = crypto::derive_keys(crypto::ClientSecret::from_seed(cfg.seed));
  crypto::Hash ra{}, rd{};
  for (auto& b : ra) b = static_cast<std::uint8_t>(rng());
  for (auto& b : rd) b = static_cast<std::uint8_t>(rng());
  const std::uint64_t ctr = 1000 + rng() % 1000;
  const Bytes good = crypto::make_rollback_record(keys, ctr, ra, rd).encode();
  FuzzCount c;
  for (std::size_t t = 0; t < cfg.record_trials; ++t) {
    Bytes b = good;
    flip_bit(b, rng);
    expect_error(c, [&] {
      auto rec = crypto::RollbackRecord::decode(b);
      crypto::verify_rollback_record(keys, rec, ctr, ra, rd);
    });
  }
  return c;
}

FuzzCount fuzz_checkpoints(const FuzzConfig& cfg) {
  std::mt19937_64 rng(cfg.seed + 2);
  Controller ctl = small_controller(cfg, nullptr);
  GameConfig g;
  g.steps = 60;
  auto worlds = adversary_worlds(g, cfg.seed);
  std::uint64_t ctr = 0;
  for (const auto& d : worlds.first.dataset) ctl.ingest(d, ++ctr);
  drive(ctl, worlds.first, ctr, 0, worlds.first.script.size());
  const auto cp = ctl.seal_and_evict();
  FuzzCount c;
  for (std::size_t t = 0; t < cfg.checkpoint_trials; ++t) {
    crypto::Checkpoint bad = cp;
    flip_bit(bad.bytes, rng);
    expect_error(c, [&] { crypto::open_checkpoint(ctl.keys(), bad, cfg.checkpoint_pad, ctl.config().instance_id); });
  }
  return c;
}

void fuzz_rollback(const FuzzConfig& cfg, FuzzCount& stale, FuzzCount& replay) {
  GameConfig g;
  g.steps = 40;
  for (std::size_t t = 0; t < cfg.rollback_trials; ++t) {
    FuzzConfig fc = cfg;
    fc.seed = cfg.seed + t;
    auto worlds = adversary_worlds(g, fc.seed);
    Controller ctl = small_controller(fc, nullptr);
    std::uint64_t ctr = 0;
    for (const auto& d : worlds.first.dataset) ctl.ingest(d, ++ctr);
    ctr = drive(ctl, worlds.first, ctr, 0, 20);

    const auto rec1 = ctl.record();
    const auto ctr1 = ctr;
    const auto cp1 = ctl.seal_and_evict();
    const Bytes img_ann = ctl.backend().storage(Tree::ANN)->snapshot();
    const Bytes img_data = ctl.backend().storage(Tree::Data)->snapshot();
    ctl.restore(cp1, rec1, ctr1);
    ctr = drive(ctl, worlds.first, ctr, 20, 40);
    const auto rec2 = ctl.record();
    const auto cp2 = ctl.seal_and_evict();

    // Old checkpoint with its own, older record.
    expect_error(stale, [&] { ctl.restore(cp1, rec1, ctr); });
    // Old checkpoint with the latest record.
    expect_error(stale, [&] { ctl.restore(cp1, rec2, ctr); });
    // Latest checkpoint and record over rolled-back storage.
    const Bytes cur_ann = ctl.backend().storage(Tree::ANN)->snapshot();
    const Bytes cur_data = ctl.backend().storage(Tree::Data)->snapshot();
    ctl.backend().storage(Tree::ANN)->restore_snapshot(img_ann);
    ctl.backend().storage(Tree::Data)->restore_snapshot(img_data);
    expect_error(stale, [&] { ctl.restore(cp2, rec2, ctr); });
    ctl.backend().storage(Tree::ANN)->restore_snapshot(cur_ann);
    ctl.backend().storage(Tree::Data)->restore_snapshot(cur_data);

    ctl.restore(cp2, rec2, ctr);
    QueryRequest q{"budget review", 0};
    expect_error(replay, [&] { ctl.query(q, ctr); });
    expect_error(replay, [&] { ctl.query(q, ctr1); });
    ctl.query(q, ++ctr);
  }
}

FuzzReport run_fuzz(const FuzzConfig& cfg) {
  FuzzReport r;
  r.bucket = fuzz_buckets(cfg);
  r.record = fuzz_records(cfg);
  r.checkpoint = fuzz_checkpoints(cfg);
  fuzz_rollback(cfg, r.stale, r.replay);
  return r;
}

std::string fuzz_summary(const FuzzReport& r) {
  std::ostringstream os;
  auto line = [&](const char* name, const FuzzCount& c) {
    os << name << ": " << c.detected << "/" << c.trials << " detected";
    for (const auto& [code, n] : c.codes) os << " " << errc_name(code) << "=" << n;
    os << "\n";
  };
  line("bucket", r.bucket);
  line("record", r.record);
  line("checkpoint", r.checkpoint);
  line("stale", r.stale);
  line("replay", r.replay);
  return os.str();
}

}  // namespace opal::harness
