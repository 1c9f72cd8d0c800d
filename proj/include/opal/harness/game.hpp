#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "opal/controller.hpp"

namespace opal::harness {

enum class OpType : std::uint8_t { Query, Ingest };

struct GameConfig {
  std::size_t steps = 200;
  int L = 10;
  std::size_t n = 200;
  std::size_t K = 10;
  std::size_t T = 5;
  std::size_t dataset_size = 32;
  double query_fraction = 0.3;
  bool dreaming = true;
  // Small enough that dreaming deletes during a game.
  std::size_t n_target = 64;
};

struct GameOp {
  OpType type = OpType::Query;
  IngestRequest ingest;
  QueryRequest query;
};

// One adversary-chosen world: an initial dataset and an op script.
struct GameWorld {
  std::vector<IngestRequest> dataset;
  std::vector<GameOp> script;
};

struct GameVerdict {
  bool rejected = false;    // challenger aborted: scripts not leakage-equal
  bool equivalent = false;  // traces structurally equivalent
  std::optional<std::size_t> divergence;
  std::size_t events = 0;
  std::string detail;
};

ControllerConfig game_controller_config(const GameConfig& cfg);
std::vector<std::string> game_roster();
std::vector<std::string> game_projects();

// Equal-size random datasets and scripts with the same op-type sequence but
// independently random content.
std::pair<GameWorld, GameWorld> adversary_worlds(const GameConfig& cfg, std::uint64_t seed);

// Runs both worlds and compares traces. Rejects (without running) when
// |D0| != |D1| or the op types differ at any step.
GameVerdict play(const GameConfig& cfg, const GameWorld& w0, const GameWorld& w1, std::uint64_t seed);

GameVerdict run_security_game(const GameConfig& cfg, std::uint64_t seed);

struct GameSuite {
  std::size_t pairs = 0;
  std::size_t passed = 0;
  std::size_t rejected = 0;
  std::vector<GameVerdict> verdicts;
};
GameSuite run_game_suite(const GameConfig& cfg, std::size_t pairs, std::uint64_t seed, unsigned threads = 1);

// Trace of one world; used for dream on/off comparisons.
std::vector<TraceEvent> run_world(const GameConfig& cfg, const GameWorld& w, std::uint64_t seed);

// Same world with dreaming on and off: index of the first position where
// kind, store or batch size differ, if any.
std::optional<std::size_t> dream_divergence(const GameConfig& cfg, std::uint64_t seed);

}  // namespace opal::harness
