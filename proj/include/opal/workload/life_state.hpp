#pragma once

#include <array>
#include <cstdint>

#include "opal/kg.hpp"

namespace opal::workload {

enum class LifeState : std::uint8_t { Asleep, Commuting, Focus, FreeEvening, Weekend, Work };
inline constexpr int kNumStates = 6;
const char* life_state_name(LifeState s);

// Hours since the simulation origin, which is a Monday 00:00 UTC.
using Hours = double;

inline constexpr std::int64_t kBaseEpoch = 1736121600;  // 2025-01-06, a Monday
inline std::int64_t to_epoch(Hours t) { return kBaseEpoch + static_cast<std::int64_t>(t * 3600.0); }

// Deterministic weekly schedule. Weekdays: 0-7 asleep, 7-8 free, 8-9
// commute, 9-11 focus, 11-13 work, 13-15 focus, 15-17 work, 17-18 commute,
// 18-23 free, 23-24 asleep. Weekends: 0-8 asleep, 8-23 weekend, 23-24 asleep.
class LifeSchedule {
 public:
  using Table = std::array<std::array<double, kNumModalities>, kNumStates>;

  // Default multipliers, normalized so each modality averages 1 over a week.
  LifeSchedule();
  explicit LifeSchedule(const Table& raw, bool normalize = true);
  // Every multiplier 1 in every state (pure Poisson baseline).
  static LifeSchedule flat();

  static LifeState state_at(Hours t);
  // First hour boundary strictly after t at which the state may change.
  static Hours next_boundary(Hours t);

  double multiplier(Modality m, LifeState s) const { return table_[idx(s)][static_cast<int>(m)]; }
  double multiplier_at(Modality m, Hours t) const { return multiplier(m, state_at(t)); }
  bool gated(Modality m, Hours t) const { return multiplier_at(m, t) <= 0.0; }
  // Mean multiplier over one week of hours.
  double weekly_average(Modality m) const;
  // Mean multiplier over one calendar day (day 0 = Monday).
  double daily_average(Modality m, int day) const;
  const Table& table() const { return table_; }

  static Table default_raw();

 private:
  static int idx(LifeState s) { return static_cast<int>(s); }
  Table table_{};
};

}  // namespace opal::workload
