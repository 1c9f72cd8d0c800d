#include "opal/workload/life_state.hpp"

#include <cmath>

namespace opal::workload {

const char* life_state_name(LifeState s) {
  switch (s) {
    case LifeState::Asleep: return "asleep";
    case LifeState::Commuting: return "commuting";
    case LifeState::Focus: return "focus";
    case LifeState::FreeEvening: return "free_evening";
    case LifeState::Weekend: return "weekend";
    case LifeState::Work: return "work";
  }
  return "?";
}

namespace {

constexpr int kQuery = static_cast<int>(Modality::Query);

LifeState weekday_state(int h) {
  if (h < 7 || h >= 23) return LifeState::Asleep;
  if (h == 7 || (h >= 18 && h < 23)) return LifeState::FreeEvening;
  if (h == 8 || h == 17) return LifeState::Commuting;
  if ((h >= 9 && h < 11) || (h >= 13 && h < 15)) return LifeState::Focus;
  return LifeState::Work;
}

LifeState weekend_state(int h) { return (h < 8 || h >= 23) ? LifeState::Asleep : LifeState::Weekend; }

LifeState state_of_hour(int hour_of_week) {
  const int day = hour_of_week / 24;
  const int h = hour_of_week % 24;
  return day < 5 ? weekday_state(h) : weekend_state(h);
}

}  // namespace

LifeSchedule::Table LifeSchedule::default_raw() {
  Table t{};
  auto row = [&](LifeState s) -> std::array<double, kNumModalities>& { return t[static_cast<int>(s)]; };
  //                     email meeting doc  query  msg  ambient
  row(LifeState::Asleep) = {0.0, 0.0, 0.0, 0.0, 0.0, 0.3};
  row(LifeState::Commuting) = {0.6, 0.0, 0.0, 0.6, 0.6, 2.0};
  row(LifeState::Focus) = {0.5, 0.0, 2.0, 1.5, 0.3, 0.5};
  row(LifeState::FreeEvening) = {0.4, 0.0, 0.2, 1.0, 1.5, 1.5};
  row(LifeState::Weekend) = {0.2, 0.0, 0.2, 0.0, 1.2, 1.5};
  row(LifeState::Work) = {1.5, 2.5, 1.0, 1.0, 1.2, 0.5};

  // Weekend query rate is set to 2/3 of the weekday daily mean.
  double weekday = 0.0;
  int weekend_hours = 0;
  for (int h = 0; h < 24; ++h) {
    weekday += t[static_cast<int>(weekday_state(h))][kQuery];
    if (weekend_state(h) == LifeState::Weekend) ++weekend_hours;
  }
  row(LifeState::Weekend)[kQuery] = (2.0 / 3.0) * weekday / weekend_hours;
  return t;
}

LifeSchedule::LifeSchedule() : LifeSchedule(default_raw(), true) {}

LifeSchedule::LifeSchedule(const Table& raw, bool normalize) : table_(raw) {
  if (!normalize) return;
  for (int m = 0; m < kNumModalities; ++m) {
    double avg = weekly_average(static_cast<Modality>(m));
    if (avg <= 0.0) continue;
    for (auto& r : table_) r[m] /= avg;
  }
}

LifeSchedule LifeSchedule::flat() {
  Table t{};
  for (auto& r : t) r.fill(1.0);
  return LifeSchedule(t, false);
}

LifeState LifeSchedule::state_at(Hours t) {
  const double week = 168.0;
  double w = std::fmod(t, week);
  if (w < 0) w += week;
  return state_of_hour(static_cast<int>(std::floor(w)) % 168);
}

Hours LifeSchedule::next_boundary(Hours t) { return std::floor(t) + 1.0; }

double LifeSchedule::weekly_average(Modality m) const {
  double s = 0.0;
  for (int h = 0; h < 168; ++h) s += multiplier(m, state_of_hour(h));
  return s / 168.0;
}

double LifeSchedule::daily_average(Modality m, int day) const {
  double s = 0.0;
  for (int h = 0; h < 24; ++h) s += multiplier(m, state_of_hour((day % 7) * 24 + h));
  return s / 24.0;
}

}  // namespace opal::workload
