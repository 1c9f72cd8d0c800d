// opal: workload generation, replay and the measurement harnesses.
//
// Exit codes: 0 ok, 1 a check failed, 2 usage or configuration error.

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "opal/config.hpp"
#include "opal/harness/bandwidth.hpp"
#include "opal/harness/fuzz.hpp"
#include "opal/harness/game.hpp"
#include "opal/harness/replay.hpp"
#include "opal/harness/uplift.hpp"
#include "opal/workload/corpus.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace opal;

namespace {

fs::path default_out() {
  if (const char* env = std::getenv("OPAL_OUT_DIR"); env && *env) return env;
  return "out";
}

std::ofstream open_out(const fs::path& dir, const std::string& name) {
  fs::create_directories(dir);
  std::ofstream f(dir / name);
  if (!f) throw Error(Errc::Io, "cannot write " + (dir / name).string());
  return f;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"opal private memory tools"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 7;
  fs::path out = default_out();
  unsigned threads = 0;
  std::string config_path;
  app.add_option("--seed", seed, "RNG seed");
  app.add_option("--out", out, "output directory (default $OPAL_OUT_DIR or ./out)");
  app.add_option("--threads", threads, "worker threads, 0 = all cores");
  app.add_option("--config", config_path, "controller config file (key = value)")->check(CLI::ExistingFile);

  double days = 30;
  auto* gen = app.add_subcommand("gen-workload", "generate corpus.jsonl and qa.jsonl");
  gen->add_option("--days", days, "simulated days");

  harness::ReplayConfig rc;
  fs::path corpus_dir;
  double ttl_years = 0;
  double span_years = 3;
  auto* replay = app.add_subcommand("replay", "replay a generated workload through the ORAM store");
  replay->add_option("--corpus", corpus_dir, "corpus directory from gen-workload (default: generate)")
      ->check(CLI::ExistingDirectory);
  replay->add_option("--days", rc.days, "simulated days when generating");
  auto* n_target_opt = replay->add_option("--n-target", rc.n_target, "retention target");
  auto* replay_l_opt = replay->add_option("--L", rc.L, "tree depth");
  replay->add_option("--ttl-years", ttl_years, "retention lifetime in years-equivalent; sets the target");
  replay->add_option("--years", span_years, "years-equivalent spanned by the corpus");
  replay->add_flag("!--no-eager", rc.eager_shadow, "skip the eager baseline");

  std::size_t pairs = 100;
  harness::GameConfig gc;
  auto* game = app.add_subcommand("game", "paired-script trace indistinguishability game");
  game->add_option("--pairs", pairs, "script pairs");
  game->add_option("--steps", gc.steps, "ops per script");
  game->add_option("--dataset", gc.dataset_size, "dataset size per world");
  auto* game_l_opt = game->add_option("--L", gc.L, "tree depth");

  harness::BandwidthConfig bc;
  auto* bw = app.add_subcommand("bench-bandwidth", "per-query bytes across store sizes");
  bw->add_option("--min-log", bc.min_log, "smallest log2 N");
  bw->add_option("--max-log", bc.max_log, "largest log2 N");
  bw->add_option("--queries", bc.queries, "queries per size");

  harness::FuzzConfig fc;
  std::size_t trials = 10000;
  auto* fuzz = app.add_subcommand("fuzz", "bit-flip and rollback detection");
  fuzz->add_option("--trials", trials, "flips per target");

  harness::UpliftConfig uc;
  auto* uplift = app.add_subcommand("uplift", "KG-filtered vs ANN-only retrieval");
  uplift->add_option("--days", uc.days, "simulated days");
  uplift->add_option("--questions", uc.questions, "questions to ask");

  auto* show = app.add_subcommand("show-config", "print the effective controller config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    ControllerConfig base;
    if (!config_path.empty()) base = load_config_file(config_path);

    if (*show) {
      validate_config(base);
      std::cout << format_config(base);
      return 0;
    }
    if (*gen) {
      workload::CorpusConfig cc;
      cc.days = days;
      cc.seed = seed;
      auto corpus = workload::generate_corpus(cc);
      workload::write_corpus(corpus, out);
      std::cout << "artifacts " << corpus.artifacts.size() << " chunks " << corpus.chunks.size() << " queries "
                << corpus.queries.size() << " -> " << out.string() << "\n";
      return 0;
    }
    if (*replay) {
      rc.seed = seed;
      if (!config_path.empty()) {
        if (!replay_l_opt->count()) rc.L = base.pub.L;
        if (!n_target_opt->count()) rc.n_target = base.retention.n_target;
        rc.dreaming = base.dreaming;
      }
      workload::Corpus corpus;
      if (!corpus_dir.empty()) {
        corpus = workload::read_corpus(corpus_dir);
      } else {
        workload::CorpusConfig cc;
        cc.days = rc.days;
        cc.seed = seed;
        corpus = workload::generate_corpus(cc);
      }
      if (ttl_years > 0) {
        // Lifetime in ticks is the same fraction of the replay as ttl_years
        // is of the span; the target follows from live = rate * lifetime.
        const double ticks = static_cast<double>(corpus.chunks.size() + corpus.chunks.size() / 5 + corpus.queries.size());
        const double w = corpus.write_ratio(5);
        rc.n_target = static_cast<std::size_t>(std::llround(ticks * ttl_years / span_years * w * rc.c));
      }
      auto r = harness::run_replay(rc, corpus);
      auto tl = open_out(out, "timeline.csv");
      harness::write_timeline_csv(r, tl);
      auto rec = open_out(out, "recall.csv");
      harness::write_recall_csv(r, rec);
      json j = {{"w", r.w},
                {"ttl", r.ttl},
                {"ticks", r.ticks},
                {"chunks", r.chunks},
                {"steady_live", r.steady_live},
                {"n_target", rc.n_target},
                {"stash_max", r.stash_max},
                {"expired", r.expired},
                {"lifetime_mean", r.lifetime_mean},
                {"lifetime_std", r.lifetime_std},
                {"lifetime_target", r.lifetime_target},
                {"recall_sleepy", r.recall_sleepy},
                {"recall_eager", r.recall_eager},
                {"change_fraction", r.change_fraction},
                {"summary_store_share", r.summary_store_share},
                {"summary_topk_share", r.summary_topk_share}};
      open_out(out, "replay.json") << j.dump(2) << "\n";
      std::cout << j.dump(2) << "\n";
      return 0;
    }
    if (*game) {
      if (!config_path.empty()) {
        if (!game_l_opt->count()) gc.L = base.pub.L;
        gc.n = base.pub.n;
        gc.K = base.pub.K;
        gc.T = base.pub.T;
        gc.dreaming = base.dreaming;
      }
      auto s = harness::run_game_suite(gc, pairs, seed, threads);
      for (std::size_t i = 0; i < s.verdicts.size(); ++i) {
        const auto& v = s.verdicts[i];
        if (!v.equivalent) std::cout << "pair " << i << ": " << v.detail << "\n";
      }
      std::cout << s.passed << "/" << s.pairs << " pairs equivalent\n";
      return s.passed == s.pairs ? 0 : 1;
    }
    if (*bw) {
      bc.seed = seed;
      bc.threads = threads;
      auto r = harness::run_bandwidth(bc);
      auto f = open_out(out, "bandwidth.csv");
      harness::write_bandwidth_csv(r, f);
      harness::write_bandwidth_csv(r, std::cout);
      std::cout << "opal log fit r2 " << r.opal_log.r2 << ", inmemory linear r2 " << r.inmemory_lin.r2
                << ", ratio at max " << r.ratio_at_max << "\n";
      return 0;
    }
    if (*fuzz) {
      fc.seed = seed;
      fc.bucket_trials = fc.record_trials = fc.checkpoint_trials = trials;
      auto r = harness::run_fuzz(fc);
      std::cout << harness::fuzz_summary(r);
      const bool all = r.bucket.rate() == 1 && r.record.rate() == 1 && r.checkpoint.rate() == 1 &&
                       r.stale.rate() == 1 && r.replay.rate() == 1;
      return all ? 0 : 1;
    }
    if (*uplift) {
      uc.seed = seed;
      uc.threads = threads;
      auto r = harness::run_uplift(uc);
      auto f = open_out(out, "uplift.csv");
      harness::write_uplift_csv(r, f);
      harness::write_uplift_csv(r, std::cout);
      std::cout << "uplift " << r.uplift_pp << " pp, soundness " << r.soundness << ", extractor exact "
                << r.extractor_exact << "\n";
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == Errc::ConfigInvalid || e.code() == Errc::DomainError ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
