#include "opal/workload/corpus.hpp"

#include <fstream>
#include <json.hpp>
#include <map>

namespace opal::workload {

using nlohmann::json;

ChunkMeta Corpus::meta_of(const ChunkRecord& c) const {
  const Artifact& a = artifacts.at(c.artifact);
  ChunkMeta m;
  m.chunk_id = c.id;
  m.artifact_id = a.artifact_id;
  m.modality = a.modality;
  m.timestamp = a.timestamp;
  m.participants = a.participants;
  m.project = a.project;
  if (a.parent_artifact) m.source_links.push_back(*a.parent_artifact);
  return m;
}

double Corpus::write_ratio(std::size_t T) const {
  const double raw = static_cast<double>(chunks.size());
  const double ingests = raw + (T > 0 ? std::floor(raw / static_cast<double>(T)) : 0.0);
  const double total = ingests + static_cast<double>(queries.size());
  return total == 0 ? 1.0 : ingests / total;
}

Corpus generate_corpus(const CorpusConfig& cfg) {
  if (!(cfg.days > 0)) throw Error(Errc::ConfigInvalid, "days must be positive");
  const Hours horizon = cfg.days * 24.0;
  Corpus c;
  c.persona = make_persona(cfg.seed, cfg.close, cfg.regular, cfg.projects);
  c.scenarios = make_scenarios(c.persona, horizon, cfg.seed);
  const auto events = simulate(cfg.hawkes, horizon, cfg.seed);

  Realizer realizer(c.persona, c.scenarios, cfg.realize, cfg.seed);
  std::mt19937_64 qrng(cfg.seed ^ 0x9a11e57ULL);
  std::map<std::uint64_t, std::size_t> artifact_of_event;
  ItemId next_chunk = 1;
  for (const auto& e : events) {
    if (e.modality == Modality::Query) {
      QueryRecord q;
      q.event_id = e.id;
      q.t = e.t;
      q.timestamp = to_epoch(e.t);
      const auto cat = static_cast<QuestionCategory>(std::uniform_int_distribution<int>(0, kNumCategories - 1)(qrng));
      try {
        q.qa = sample_question(c.artifacts, e.t, cat, qrng);
        q.text = q.qa->text;
      } catch (const Error& err) {
        if (err.code() != Errc::EmptyCorpus) throw;
        q.text = "anything new";
      }
      c.ops.push_back({Op::Kind::Query, c.queries.size()});
      c.queries.push_back(std::move(q));
      continue;
    }
    const Artifact* parent = nullptr;
    if (e.parent) {
      auto it = artifact_of_event.find(*e.parent);
      if (it != artifact_of_event.end()) parent = &c.artifacts[it->second];
    }
    Artifact a = realizer.realize(e, parent);
    const std::size_t ai = c.artifacts.size();
    for (auto& text : chunk_text(a.text, cfg.realize.chunk_words, cfg.realize.chunk_stride)) {
      a.chunk_ids.push_back(next_chunk);
      c.ops.push_back({Op::Kind::Ingest, c.chunks.size()});
      c.chunks.push_back({next_chunk++, ai, std::move(text)});
    }
    artifact_of_event[e.id] = ai;
    c.artifacts.push_back(std::move(a));
  }
  return c;
}

std::string filters_to_json(const FilterSet& f) {
  json j = json::object();
  if (f.temporal) j["temporal"] = {f.temporal->lo, f.temporal->hi};
  if (!f.persons.empty()) j["persons"] = f.persons;
  if (f.modality) j["modality"] = modality_name(*f.modality);
  if (f.project) j["project"] = *f.project;
  return j.dump();
}

namespace {

FilterSet filters_from_json(const json& j) {
  FilterSet f;
  if (j.contains("temporal")) {
    f.temporal = TimeRange{j["temporal"][0].get<std::int64_t>(), j["temporal"][1].get<std::int64_t>()};
  }
  if (j.contains("persons")) {
    for (const auto& p : j["persons"]) f.persons.insert(p.get<std::string>());
  }
  if (j.contains("modality")) {
    auto m = parse_modality(j["modality"].get<std::string>());
    if (!m) throw Error(Errc::MalformedMetadata, "bad modality in filters");
    f.modality = *m;
  }
  if (j.contains("project")) f.project = j["project"].get<std::string>();
  return f;
}

template <class T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

void write_corpus(const Corpus& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / "corpus.jsonl");
  std::ofstream qa(dir / "qa.jsonl");
  if (!out || !qa) throw Error(Errc::Io, "cannot write corpus files in " + dir.string());
  out << json{{"type", "persona"},
              {"owner", c.persona.owner},
              {"close", c.persona.close},
              {"regular", c.persona.regular},
              {"projects", c.persona.projects}}
             .dump()
      << '\n';
  for (const auto& s : c.scenarios) {
    out << json{{"type", "scenario"}, {"id", s.id},     {"tag", s.tag},       {"project", s.project},
                {"people", s.people}, {"tokens", s.tokens}, {"start_h", s.start}, {"end_h", s.end}}
               .dump()
        << '\n';
  }
  // Artifacts and queries interleave in op order; an artifact is written at its first chunk.
  for (const auto& op : c.ops) {
    if (op.kind == Op::Kind::Query) {
      const auto& q = c.queries[op.index];
      out << json{{"type", "query"}, {"id", q.event_id}, {"t_h", q.t}, {"timestamp", q.timestamp}, {"text", q.text}}
                 .dump()
          << '\n';
      if (q.qa) {
        qa << json{{"query_id", q.event_id},
                   {"category", category_name(q.qa->category)},
                   {"question", q.qa->text},
                   {"filters", json::parse(filters_to_json(q.qa->filters))},
                   {"target_artifact", q.qa->target_artifact},
                   {"gt_chunks", q.qa->gt_chunks},
                   {"asked_at", q.qa->asked_at}}
                  .dump()
           << '\n';
      }
      continue;
    }
    const auto& ch = c.chunks[op.index];
    const auto& a = c.artifacts[ch.artifact];
    if (a.chunk_ids.front() != ch.id) continue;
    json chunks = json::array();
    // Chunks of one artifact are contiguous in op order.
    for (std::size_t k = 0; k < a.chunk_ids.size(); ++k) {
      chunks.push_back({{"id", a.chunk_ids[k]}, {"text", c.chunks[op.index + k].text}});
    }
    out << json{{"type", "artifact"},
                {"id", a.event_id},
                {"artifact_id", a.artifact_id},
                {"modality", modality_name(a.modality)},
                {"t_h", a.t},
                {"timestamp", a.timestamp},
                {"parent", opt(a.parent_event)},
                {"parent_artifact", opt(a.parent_artifact)},
                {"participants", a.participants},
                {"project", opt(a.project)},
                {"scenario", opt(a.scenario)},
                {"noise", a.noise},
                {"unique_tokens", a.unique_tokens},
                {"topic_tokens", a.topic_tokens},
                {"text", a.text},
                {"chunks", chunks}}
               .dump()
        << '\n';
  }
}

Corpus read_corpus(const std::filesystem::path& dir) {
  std::ifstream in(dir / "corpus.jsonl");
  if (!in) throw Error(Errc::Io, "cannot open " + (dir / "corpus.jsonl").string());
  Corpus c;
  std::map<std::uint64_t, Question> qas;
  if (std::ifstream qa(dir / "qa.jsonl"); qa) {
    std::string line;
    while (std::getline(qa, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      Question q;
      q.category = parse_category(j["category"].get<std::string>());
      q.text = j["question"].get<std::string>();
      q.filters = filters_from_json(j["filters"]);
      q.target_artifact = j["target_artifact"].get<std::string>();
      q.gt_chunks = j["gt_chunks"].get<std::vector<ItemId>>();
      q.asked_at = j["asked_at"].get<std::int64_t>();
      qas[j["query_id"].get<std::uint64_t>()] = std::move(q);
    }
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(Errc::MalformedMetadata, std::string("corpus line: ") + e.what());
    }
    const std::string type = j.at("type").get<std::string>();
    if (type == "persona") {
      c.persona.owner = j["owner"].get<std::string>();
      c.persona.close = j["close"].get<std::vector<std::string>>();
      c.persona.regular = j["regular"].get<std::vector<std::string>>();
      c.persona.projects = j["projects"].get<std::vector<std::string>>();
    } else if (type == "scenario") {
      Scenario s;
      s.id = j["id"].get<int>();
      s.tag = j["tag"].get<std::string>();
      s.project = j["project"].get<std::string>();
      s.people = j["people"].get<std::vector<std::string>>();
      s.tokens = j["tokens"].get<std::vector<std::string>>();
      s.start = j["start_h"].get<double>();
      s.end = j["end_h"].get<double>();
      c.scenarios.push_back(std::move(s));
    } else if (type == "query") {
      QueryRecord q;
      q.event_id = j["id"].get<std::uint64_t>();
      q.t = j["t_h"].get<double>();
      q.timestamp = j["timestamp"].get<std::int64_t>();
      q.text = j["text"].get<std::string>();
      if (auto it = qas.find(q.event_id); it != qas.end()) q.qa = it->second;
      c.ops.push_back({Op::Kind::Query, c.queries.size()});
      c.queries.push_back(std::move(q));
    } else if (type == "artifact") {
      Artifact a;
      a.event_id = j["id"].get<std::uint64_t>();
      a.artifact_id = j["artifact_id"].get<std::string>();
      auto m = parse_modality(j["modality"].get<std::string>());
      if (!m) throw Error(Errc::MalformedMetadata, "bad modality in corpus");
      a.modality = *m;
      a.t = j["t_h"].get<double>();
      a.timestamp = j["timestamp"].get<std::int64_t>();
      if (!j["parent"].is_null()) a.parent_event = j["parent"].get<std::uint64_t>();
      if (!j["parent_artifact"].is_null()) a.parent_artifact = j["parent_artifact"].get<std::string>();
      a.participants = j["participants"].get<std::vector<std::string>>();
      if (!j["project"].is_null()) a.project = j["project"].get<std::string>();
      if (!j["scenario"].is_null()) a.scenario = j["scenario"].get<int>();
      a.noise = j["noise"].get<bool>();
      a.unique_tokens = j["unique_tokens"].get<std::vector<std::string>>();
      a.topic_tokens = j["topic_tokens"].get<std::vector<std::string>>();
      a.text = j["text"].get<std::string>();
      const std::size_t ai = c.artifacts.size();
      for (const auto& ch : j["chunks"]) {
        ItemId id = ch["id"].get<ItemId>();
        a.chunk_ids.push_back(id);
        c.ops.push_back({Op::Kind::Ingest, c.chunks.size()});
        c.chunks.push_back({id, ai, ch["text"].get<std::string>()});
      }
      c.artifacts.push_back(std::move(a));
    } else {
      throw Error(Errc::MalformedMetadata, "unknown corpus line type '" + type + "'");
    }
  }
  return c;
}

}  // namespace opal::workload
