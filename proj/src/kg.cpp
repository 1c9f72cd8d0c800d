#include "opal/kg.hpp"

#include <algorithm>
#include <cctype>
#include <json.hpp>

#include "opal/codec.hpp"

namespace opal {

namespace {
constexpr std::int64_t kDay = 86400;
constexpr std::size_t kRecentCap = 4096;
}  // namespace

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Email: return "email";
    case Modality::Meeting: return "meeting";
    case Modality::Document: return "document";
    case Modality::Query: return "query";
    case Modality::Message: return "message";
    case Modality::Ambient: return "ambient";
  }
  return "unknown";
}

std::optional<Modality> parse_modality(std::string_view s) {
  for (int i = 0; i < kNumModalities; ++i) {
    auto m = static_cast<Modality>(i);
    if (s == modality_name(m)) return m;
  }
  return std::nullopt;
}

std::string canonical_person(std::string_view name) {
  std::string out;
  bool space = false;
  for (char ch : name) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back('_');
    space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

void KnowledgeGraph::update(const ChunkMeta& meta) {
  if (contains(meta.chunk_id)) throw Error(Errc::DuplicateId, "chunk " + std::to_string(meta.chunk_id));
  if (meta.summary) {
    if (meta.summarized.empty()) throw Error(Errc::MalformedMetadata, "summary links no chunks");
    std::set<std::string> arts;
    for (ItemId c : meta.summarized) {
      auto it = chunk_artifact_.find(c);
      if (it != chunk_artifact_.end()) arts.insert(it->second);
    }
    if (arts.empty()) throw Error(Errc::MalformedMetadata, "summary covers no live chunk");
    summaries_[meta.chunk_id] = std::move(arts);
    return;
  }
  if (meta.artifact_id.empty()) throw Error(Errc::MalformedMetadata, "chunk without artifact id");
  Artifact& a = artifacts_[meta.artifact_id];
  if (a.chunks.empty()) {
    a.modality = meta.modality;
    a.timestamp = meta.timestamp;
  } else if (a.modality != meta.modality) {
    throw Error(Errc::MalformedMetadata, "artifact " + meta.artifact_id + " changes modality");
  }
  for (const auto& p : meta.participants) {
    std::string id = canonical_person(p);
    if (id.empty()) throw Error(Errc::MalformedMetadata, "empty participant name");
    persons_.try_emplace(id, p);
    a.persons.insert(id);
  }
  if (meta.project && !meta.project->empty()) {
    projects_.insert(*meta.project);
    a.project = meta.project;
  }
  for (const auto& l : meta.source_links) {
    if (l == meta.artifact_id) continue;
    a.links.insert(l);
    links_[meta.artifact_id].insert(l);
    links_[l].insert(meta.artifact_id);
  }
  a.chunks.insert(meta.chunk_id);
  chunk_artifact_[meta.chunk_id] = meta.artifact_id;
  recent_.push_back(meta.chunk_id);
  if (recent_.size() > kRecentCap) recent_.pop_front();
}

void KnowledgeGraph::remove(ItemId chunk_id) {
  if (summaries_.erase(chunk_id) > 0) return;
  auto it = chunk_artifact_.find(chunk_id);
  if (it == chunk_artifact_.end()) return;
  const std::string art = it->second;
  chunk_artifact_.erase(it);
  auto ait = artifacts_.find(art);
  ait->second.chunks.erase(chunk_id);
  // Source-link edges are kept by id; a later artifact may still link here.
  if (ait->second.chunks.empty()) {
    artifacts_.erase(ait);
  }
}

bool KnowledgeGraph::matches(const Artifact& a, const FilterSet& f, const State& s) const {
  if (s.temporal && !s.temporal->contains(a.timestamp)) return false;
  if (s.use_modality && a.modality != *f.modality) return false;
  if (s.use_project && a.project != f.project) return false;
  if (s.use_persons) {
    for (const auto& p : f.persons) {
      if (!a.persons.contains(p)) return false;
    }
  }
  return true;
}

void KnowledgeGraph::add_summary_and_chunks(const std::set<std::string>& artifacts,
                                            std::unordered_set<ItemId>& out) const {
  for (const auto& id : artifacts) {
    auto it = artifacts_.find(id);
    if (it == artifacts_.end()) continue;
    out.insert(it->second.chunks.begin(), it->second.chunks.end());
  }
  for (const auto& [sid, arts] : summaries_) {
    for (const auto& a : arts) {
      if (artifacts.contains(a)) {
        out.insert(sid);
        break;
      }
    }
  }
}

std::unordered_set<ItemId> KnowledgeGraph::evaluate(const FilterSet& f, const State& s,
                                                    std::set<std::string>* admitted) const {
  std::unordered_set<ItemId> out;
  const bool any = s.temporal || s.use_persons || s.use_modality || s.use_project;
  if (!any) {
    for (const auto& [c, a] : chunk_artifact_) out.insert(c);
    for (const auto& [sid, arts] : summaries_) out.insert(sid);
    if (admitted) {
      for (const auto& [id, a] : artifacts_) admitted->insert(id);
    }
    return out;
  }
  std::set<std::string> arts;
  for (const auto& [id, a] : artifacts_) {
    if (matches(a, f, s)) arts.insert(id);
  }
  add_summary_and_chunks(arts, out);
  if (admitted) *admitted = std::move(arts);
  return out;
}

std::vector<KnowledgeGraph::State> KnowledgeGraph::cascade(const FilterSet& f) const {
  State s;
  if (f.temporal) {
    TimeRange t = *f.temporal;
    if (t.lo > t.hi) throw Error(Errc::MalformedMetadata, "temporal filter has lo > hi");
    if (f.temporal_conf == Confidence::Low) {
      std::int64_t half = std::max<std::int64_t>((t.hi - t.lo) / 2, kDay / 2);
      t.lo -= half;
      t.hi += half;
    }
    s.temporal = t;
  }
  s.use_persons = !f.persons.empty() && f.person_conf == Confidence::High;
  s.use_modality = f.modality.has_value() && f.modality_conf == Confidence::High;
  s.use_project = f.project.has_value() && f.project_conf == Confidence::High;

  std::vector<State> out{s};
  auto push_if = [&](bool changed) {
    if (changed) out.push_back(s);
  };
  push_if(std::exchange(s.use_persons, false));
  push_if(std::exchange(s.use_project, false));
  push_if(std::exchange(s.use_modality, false));
  for (int i = 0; i < 3 && s.temporal; ++i) {
    TimeRange& t = *s.temporal;
    std::int64_t width = std::max<std::int64_t>(t.hi - t.lo, kDay);
    std::int64_t grow = width / 2 + (t.hi - t.lo < kDay ? (kDay - (t.hi - t.lo)) / 2 : 0);
    t.lo -= grow;
    t.hi += grow;
    out.push_back(s);
  }
  if (s.temporal) {
    s.temporal.reset();
    out.push_back(s);
  }
  return out;
}

std::vector<std::size_t> KnowledgeGraph::cascade_sizes(const FilterSet& filters) const {
  std::vector<std::size_t> sizes;
  for (const auto& s : cascade(filters)) sizes.push_back(evaluate(filters, s, nullptr).size());
  return sizes;
}

TraverseResult KnowledgeGraph::traverse(const FilterSet& filters, std::size_t min_candidates) const {
  TraverseResult r;
  auto states = cascade(filters);
  std::set<std::string> admitted;
  std::size_t level = 0;
  for (; level < states.size(); ++level) {
    admitted.clear();
    r.admissible = evaluate(filters, states[level], &admitted);
    if (r.admissible.size() >= min_candidates) break;
  }
  if (level == states.size()) level = states.size() - 1;
  r.relaxation_level = static_cast<int>(level);
  r.before_percolation = r.admissible.size();
  if (states[level].use_modality) r.admissible = percolate(r.admissible);
  return r;
}

std::unordered_set<ItemId> KnowledgeGraph::percolate(const std::unordered_set<ItemId>& set) const {
  std::set<std::string> extra;
  for (ItemId c : set) {
    auto it = chunk_artifact_.find(c);
    if (it == chunk_artifact_.end()) continue;
    auto lit = links_.find(it->second);
    if (lit == links_.end()) continue;
    for (const auto& other : lit->second) {
      if (artifacts_.contains(other)) extra.insert(other);
    }
  }
  std::unordered_set<ItemId> out = set;
  add_summary_and_chunks(extra, out);
  return out;
}

std::vector<ItemId> KnowledgeGraph::recent(std::size_t window) const {
  std::vector<ItemId> out;
  for (auto it = recent_.rbegin(); it != recent_.rend() && out.size() < window; ++it) {
    if (chunk_artifact_.contains(*it)) out.push_back(*it);
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::size_t KnowledgeGraph::person_edges(const std::string& artifact_id) const {
  auto it = artifacts_.find(artifact_id);
  return it == artifacts_.end() ? 0 : it->second.persons.size();
}

std::vector<ItemId> KnowledgeGraph::chunks_of(const std::string& artifact_id) const {
  auto it = artifacts_.find(artifact_id);
  if (it == artifacts_.end()) return {};
  return {it->second.chunks.begin(), it->second.chunks.end()};
}

std::optional<std::string> KnowledgeGraph::artifact_of(ItemId chunk_id) const {
  auto it = chunk_artifact_.find(chunk_id);
  if (it == chunk_artifact_.end()) return std::nullopt;
  return it->second;
}

Bytes KnowledgeGraph::serialize() const {
  ByteWriter w;
  w.u64(artifacts_.size());
  for (const auto& [id, a] : artifacts_) {
    w.str(id);
    w.u8(static_cast<std::uint8_t>(a.modality));
    w.i64(a.timestamp);
    w.u64(a.persons.size());
    for (const auto& p : a.persons) w.str(p);
    w.u8(a.project ? 1 : 0);
    if (a.project) w.str(*a.project);
    w.u64(a.chunks.size());
    for (ItemId c : a.chunks) w.u64(c);
    w.u64(a.links.size());
    for (const auto& l : a.links) w.str(l);
  }
  std::vector<ItemId> sids;
  for (const auto& [sid, arts] : summaries_) sids.push_back(sid);
  std::sort(sids.begin(), sids.end());
  w.u64(sids.size());
  for (ItemId sid : sids) {
    w.u64(sid);
    const auto& arts = summaries_.at(sid);
    w.u64(arts.size());
    for (const auto& a : arts) w.str(a);
  }
  w.u64(persons_.size());
  for (const auto& [id, display] : persons_) {
    w.str(id);
    w.str(display);
  }
  w.u64(projects_.size());
  for (const auto& p : projects_) w.str(p);
  w.u64(links_.size());
  for (const auto& [a, set] : links_) {
    w.str(a);
    w.u64(set.size());
    for (const auto& b : set) w.str(b);
  }
  w.u64(recent_.size());
  for (ItemId c : recent_) w.u64(c);
  return std::move(w).take();
}

void KnowledgeGraph::deserialize(std::span<const std::uint8_t> bytes) {
  *this = KnowledgeGraph{};
  ByteReader r(bytes);
  for (auto n = r.u64(); n > 0; --n) {
    std::string id = r.str();
    Artifact a;
    a.modality = static_cast<Modality>(r.u8());
    a.timestamp = r.i64();
    for (auto k = r.u64(); k > 0; --k) a.persons.insert(r.str());
    if (r.u8()) a.project = r.str();
    for (auto k = r.u64(); k > 0; --k) {
      ItemId c = r.u64();
      a.chunks.insert(c);
      chunk_artifact_[c] = id;
    }
    for (auto k = r.u64(); k > 0; --k) a.links.insert(r.str());
    artifacts_[id] = std::move(a);
  }
  for (auto n = r.u64(); n > 0; --n) {
    ItemId sid = r.u64();
    auto& arts = summaries_[sid];
    for (auto k = r.u64(); k > 0; --k) arts.insert(r.str());
  }
  for (auto n = r.u64(); n > 0; --n) {
    std::string id = r.str();
    persons_[id] = r.str();
  }
  for (auto n = r.u64(); n > 0; --n) projects_.insert(r.str());
  for (auto n = r.u64(); n > 0; --n) {
    std::string a = r.str();
    auto& set = links_[a];
    for (auto k = r.u64(); k > 0; --k) set.insert(r.str());
  }
  for (auto n = r.u64(); n > 0; --n) recent_.push_back(r.u64());
  if (!r.done()) throw Error(Errc::MalformedMetadata, "trailing bytes in KG state");
}

std::string KnowledgeGraph::debug_json() const {
  nlohmann::json j;
  j["artifacts"] = artifacts_.size();
  j["chunks"] = chunk_artifact_.size();
  j["summaries"] = summaries_.size();
  j["persons"] = persons_.size();
  j["projects"] = projects_.size();
  std::size_t edges = 0;
  for (const auto& [id, set] : links_) edges += set.size();
  j["source_link_edges"] = edges / 2;
  return j.dump();
}

}  // namespace opal
