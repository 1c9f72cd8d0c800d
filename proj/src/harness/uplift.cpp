#include "opal/harness/uplift.hpp"

#include <algorithm>
#include <random>

#include "opal/controller.hpp"
#include "opal/harness/common.hpp"

namespace opal::harness {

namespace {

ControllerConfig uplift_config(const workload::Corpus& c, RetrievalMode mode, std::uint64_t seed) {
  ControllerConfig cc;
  cc.store = StoreKind::Plaintext;
  cc.mode = mode;
  cc.dreaming = false;
  const std::size_t n = std::max<std::size_t>(c.chunks.size(), 1024);
  cc.retention = RetentionConfig{n, 1.0, 1.0, 10};
  cc.ivf.n_target = n;
  cc.seed = seed;
  return cc;
}

bool hit(const std::vector<ItemId>& top, const std::vector<ItemId>& gt) {
  return std::any_of(top.begin(), top.end(), [&](ItemId id) { return std::find(gt.begin(), gt.end(), id) != gt.end(); });
}

}  // namespace

UpliftReport run_uplift(const UpliftConfig& cfg, const workload::Corpus& corpus) {
  if (corpus.artifacts.empty()) throw Error(Errc::EmptyCorpus, "no artifacts to ask about");
  Controller kg(uplift_config(corpus, RetrievalMode::KgFiltered, cfg.seed), make_enclaves(corpus), nullptr,
                crypto::ClientSecret::from_seed(cfg.seed));
  Controller ann(uplift_config(corpus, RetrievalMode::AnnOnly, cfg.seed), make_enclaves(corpus), nullptr,
                 crypto::ClientSecret::from_seed(cfg.seed));
  Controller* both[] = {&kg, &ann};
  parallel_for(2, cfg.threads, [&](std::size_t i) {
    std::uint64_t ctr = 0;
    for (const auto& ch : corpus.chunks) both[i]->ingest(make_ingest(corpus, ch), ++ctr);
  });

  std::mt19937_64 rng(cfg.seed);
  workload::Hours t_end = 0;
  for (const auto& a : corpus.artifacts) t_end = std::max(t_end, a.t);
  t_end += 1e-3;
  std::vector<workload::Question> qs;
  for (std::size_t i = 0; i < cfg.questions; ++i) {
    auto cat = static_cast<workload::QuestionCategory>(i % workload::kNumCategories);
    qs.push_back(workload::sample_question(corpus.artifacts, t_end, cat, rng));
  }

  UpliftReport r;
  r.questions = qs.size();
  RuleExtractor extractor(corpus.persona.roster(), corpus.persona.projects);
  std::vector<std::array<bool, 2>> hits(qs.size());
  std::uint64_t ctr_kg = corpus.chunks.size(), ctr_ann = corpus.chunks.size();
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const auto& q = qs[i];
    const QueryRequest req{q.text, q.asked_at};
    hits[i][0] = hit(kg.query(req, ++ctr_kg).top_k, q.gt_chunks);
    hits[i][1] = hit(ann.query(req, ++ctr_ann).top_k, q.gt_chunks);

    const auto adm = kg.graph().traverse(q.filters, 0).admissible;
    const bool sound = std::all_of(q.gt_chunks.begin(), q.gt_chunks.end(), [&](ItemId id) { return adm.contains(id); });
    r.soundness += sound;
    r.extractor_exact += extractor.extract(q.text, q.asked_at) == q.filters;

    auto& cr = r.by_category[static_cast<std::size_t>(q.category)];
    ++cr.asked;
    cr.kg_hits += hits[i][0];
    cr.ann_hits += hits[i][1];
    r.kg_rate += hits[i][0];
    r.ann_rate += hits[i][1];
  }
  const double n = static_cast<double>(std::max<std::size_t>(qs.size(), 1));
  r.kg_rate /= n;
  r.ann_rate /= n;
  r.soundness /= n;
  r.extractor_exact /= n;
  r.uplift_pp = 100.0 * (r.kg_rate - r.ann_rate);
  return r;
}

UpliftReport run_uplift(const UpliftConfig& cfg) {
  workload::CorpusConfig cc;
  cc.days = cfg.days;
  cc.seed = cfg.seed;
  return run_uplift(cfg, workload::generate_corpus(cc));
}

void write_uplift_csv(const UpliftReport& r, std::ostream& out) {
  out << "category,asked,kg_rate,ann_rate\n";
  for (int c = 0; c < workload::kNumCategories; ++c) {
    const auto& cr = r.by_category[static_cast<std::size_t>(c)];
    const double n = static_cast<double>(std::max<std::size_t>(cr.asked, 1));
    out << workload::category_name(static_cast<workload::QuestionCategory>(c)) << ',' << cr.asked << ','
        << cr.kg_hits / n << ',' << cr.ann_hits / n << '\n';
  }
  out << "all," << r.questions << ',' << r.kg_rate << ',' << r.ann_rate << '\n';
}

}  // namespace opal::harness
