#include "opal/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace opal {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad(std::string_view key, std::string_view value) {
  throw Error(Errc::ConfigInvalid, "bad value '" + std::string(value) + "' for " + std::string(key));
}

template <class T>
T as_int(std::string_view key, std::string_view v) {
  T out{};
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || p != v.data() + v.size()) bad(key, v);
  return out;
}

double as_double(std::string_view key, std::string_view v) {
  try {
    std::size_t used = 0;
    double d = std::stod(std::string(v), &used);
    if (used != v.size()) bad(key, v);
    return d;
  } catch (const std::logic_error&) {
    bad(key, v);
  }
}

bool as_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad(key, v);
}

const char* store_name(StoreKind s) {
  switch (s) {
    case StoreKind::Oram: return "oram";
    case StoreKind::Plaintext: return "plaintext";
    case StoreKind::InMemory: return "inmemory";
  }
  return "?";
}

}  // namespace

void apply_config_entry(ControllerConfig& c, std::string_view key, std::string_view v) {
  using Z = std::size_t;
  if (key == "n") c.pub.n = as_int<Z>(key, v);
  else if (key == "K") c.pub.K = as_int<Z>(key, v), c.retention.K = static_cast<int>(c.pub.K);
  else if (key == "T") c.pub.T = as_int<Z>(key, v);
  else if (key == "L") c.pub.L = as_int<int>(key, v);
  else if (key == "Z") c.pub.Z = as_int<int>(key, v);
  else if (key == "S") c.S = as_int<int>(key, v);
  else if (key == "A") c.A = as_int<int>(key, v);
  else if (key == "data_block") c.data_block = as_int<Z>(key, v);
  else if (key == "stash_limit") c.stash_limit = as_int<Z>(key, v);
  else if (key == "seed") c.seed = as_int<std::uint64_t>(key, v);
  else if (key == "instance_id") c.instance_id = as_int<std::uint64_t>(key, v);
  else if (key == "min_candidates") c.min_candidates = as_int<Z>(key, v);
  else if (key == "retention.n_target") c.retention.n_target = as_int<Z>(key, v), c.ivf.n_target = c.retention.n_target;
  else if (key == "retention.w") c.retention.w = as_double(key, v);
  else if (key == "retention.c") c.retention.c = as_double(key, v);
  else if (key == "dreaming") c.dreaming = as_bool(key, v);
  else if (key == "pad.traverse") c.pads.traverse = as_int<Z>(key, v);
  else if (key == "pad.embed") c.pads.embed = as_int<Z>(key, v);
  else if (key == "pad.synthesize") c.pads.synthesize = as_int<Z>(key, v);
  else if (key == "pad.summarize") c.pads.summarize = as_int<Z>(key, v);
  else if (key == "checkpoint_pad") c.checkpoint_pad = as_int<Z>(key, v);
  else if (key == "ivf.dim") c.ivf.dim = as_int<int>(key, v);
  else if (key == "ivf.m") c.ivf.m = as_int<int>(key, v);
  else if (key == "ivf.nbits") c.ivf.nbits = as_int<int>(key, v);
  else if (key == "ivf.warmup") c.ivf.warmup = as_int<Z>(key, v);
  else if (key == "ivf.split_factor") c.ivf.split_factor = as_double(key, v);
  else if (key == "ivf.merge_factor") c.ivf.merge_factor = as_double(key, v);
  else if (key == "ivf.margin") c.ivf.margin = as_double(key, v);
  else if (key == "ivf.neighbor_clusters") c.ivf.neighbor_clusters = as_int<int>(key, v);
  else if (key == "ivf.kmeans_iters") c.ivf.kmeans_iters = as_int<int>(key, v);
  else if (key == "ivf.seed") c.ivf.seed = as_int<std::uint64_t>(key, v);
  else if (key == "store") {
    if (v == "oram") c.store = StoreKind::Oram;
    else if (v == "plaintext") c.store = StoreKind::Plaintext;
    else if (v == "inmemory") c.store = StoreKind::InMemory;
    else bad(key, v);
  } else if (key == "mode") {
    if (v == "kg") c.mode = RetrievalMode::KgFiltered;
    else if (v == "ann") c.mode = RetrievalMode::AnnOnly;
    else bad(key, v);
  } else if (key == "backend") {
    if (v != "memory" && v != "file") bad(key, v);
    c.backend = std::string(v);
  } else if (key == "dir") {
    c.dir = std::string(v);
  } else {
    throw Error(Errc::ConfigInvalid, "unknown config key '" + std::string(key) + "'");
  }
}

ControllerConfig parse_config(std::string_view text, ControllerConfig base) {
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view s = line;
    if (auto h = s.find('#'); h != std::string_view::npos) s = s.substr(0, h);
    s = trim(s);
    if (s.empty()) continue;
    auto eq = s.find('=');
    if (eq == std::string_view::npos) {
      throw Error(Errc::ConfigInvalid, "line " + std::to_string(lineno) + ": expected key = value");
    }
    apply_config_entry(base, trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
  validate_config(base);
  return base;
}

ControllerConfig load_config_file(const std::filesystem::path& path, ControllerConfig base) {
  std::ifstream f(path);
  if (!f) throw Error(Errc::Io, "cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string format_config(const ControllerConfig& c) {
  std::ostringstream o;
  o.precision(17);
  o << "n = " << c.pub.n << "\nK = " << c.pub.K << "\nT = " << c.pub.T << "\nL = " << c.pub.L
    << "\nZ = " << c.pub.Z << "\nS = " << c.S << "\nA = " << c.A << "\ndata_block = " << c.data_block
    << "\nstash_limit = " << c.stash_limit << "\nseed = " << c.seed << "\ninstance_id = " << c.instance_id << '\n';
  if (c.min_candidates) o << "min_candidates = " << *c.min_candidates << '\n';
  o << "retention.n_target = " << c.retention.n_target << "\nretention.w = " << c.retention.w
    << "\nretention.c = " << c.retention.c << "\ndreaming = " << (c.dreaming ? "true" : "false")
    << "\npad.traverse = " << c.pads.traverse << "\npad.embed = " << c.pads.embed
    << "\npad.synthesize = " << c.pads.synthesize << "\npad.summarize = " << c.pads.summarize
    << "\ncheckpoint_pad = " << c.checkpoint_pad << "\nivf.dim = " << c.ivf.dim << "\nivf.m = " << c.ivf.m
    << "\nivf.nbits = " << c.ivf.nbits << "\nivf.warmup = " << c.ivf.warmup
    << "\nivf.split_factor = " << c.ivf.split_factor << "\nivf.merge_factor = " << c.ivf.merge_factor
    << "\nivf.margin = " << c.ivf.margin << "\nivf.neighbor_clusters = " << c.ivf.neighbor_clusters
    << "\nivf.kmeans_iters = " << c.ivf.kmeans_iters << "\nivf.seed = " << c.ivf.seed
    << "\nstore = " << store_name(c.store) << "\nmode = " << (c.mode == RetrievalMode::KgFiltered ? "kg" : "ann")
    << "\nbackend = " << c.backend << '\n';
  if (!c.dir.empty()) o << "dir = " << c.dir.string() << '\n';
  o << "# derived: ttl = " << compute_ttl(c.retention) << '\n';
  return o.str();
}

void validate_config(const ControllerConfig& c) {
  auto fail = [](const std::string& m) { throw Error(Errc::ConfigInvalid, m); };
  if (c.pub.K == 0 || c.pub.n < c.pub.K) fail("need 0 < K <= n");
  if (c.pub.T == 0) fail("T must be positive");
  if (c.pub.L < 1 || c.pub.L > 24) fail("L must be in [1, 24]");
  if (c.pub.Z < 1 || c.S < 1 || c.A < 1) fail("Z, S, A must be positive");
  if (c.data_block < 3 || c.data_block > 65537) fail("data_block must be in [3, 65537]");
  if (c.checkpoint_pad > (std::size_t{64} << 20)) fail("checkpoint_pad above 64 MiB");
  if (c.ivf.dim <= 0 || c.ivf.m <= 0 || c.ivf.dim % c.ivf.m != 0) fail("ivf.dim must be a positive multiple of ivf.m");
  if (c.ivf.nbits < 1 || c.ivf.nbits > 8) fail("ivf.nbits must be in [1, 8]");
  if (c.backend == "file" && c.dir.empty()) fail("file backend needs dir");
  if (static_cast<std::size_t>(c.retention.K) != c.pub.K) fail("retention.K must equal K");
  try {
    compute_ttl(c.retention);
  } catch (const Error& e) {
    fail(e.what());
  }
}

}  // namespace opal
