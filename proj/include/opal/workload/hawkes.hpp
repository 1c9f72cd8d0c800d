#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "opal/kg.hpp"
#include "opal/workload/life_state.hpp"

namespace opal::workload {

using ModalVec = Eigen::Matrix<double, kNumModalities, 1>;
using ModalMat = Eigen::Matrix<double, kNumModalities, kNumModalities>;

// Multivariate exponential-kernel Hawkes process:
//   lambda_m(t) = gamma_m(s(t)) mu_m + 1[gamma_m(s(t)) > 0] sum_i alpha(m_i, m) beta_m exp(-beta_m (t - t_i))
// Time in hours. alpha(src, dst) is the expected number of dst events
// triggered by one src event.
struct HawkesConfig {
  ModalVec mu = ModalVec::Zero();
  ModalMat alpha = ModalMat::Zero();
  ModalVec beta = ModalVec::Ones();
  LifeSchedule schedule;

  // Calibrated defaults: self-excitation 0.40 (email) and 0.60 (message),
  // small cross terms, mu solved from daily volume targets.
  static HawkesConfig defaults();
  // alpha = 0 and a flat schedule: a homogeneous Poisson process.
  static HawkesConfig poisson(const ModalVec& mu_per_hour);

  double spectral_radius() const;
  // Throws SupercriticalConfig when the spectral radius is >= 1, and
  // ConfigInvalid for negative entries or non-sink document/query/ambient rows.
  void validate() const;
  // Stationary mean rates ignoring gating: (I - alpha^T)^-1 mu.
  ModalVec mean_rates() const;
  // mu = (I - alpha^T) target, per hour.
  void calibrate(const ModalVec& target_per_hour);
};

// Daily volume targets used by defaults(): per calendar day.
ModalVec default_daily_targets();

struct HawkesEvent {
  std::uint64_t id = 0;
  Hours t = 0;
  Modality modality = Modality::Email;
  std::optional<std::uint64_t> parent;
};

// Ogata thinning. The bound is recomputed at each hour boundary (where the
// life state may change) and after each event; kernel sums decay in O(1).
std::vector<HawkesEvent> simulate(const HawkesConfig& cfg, Hours horizon, std::uint64_t seed);

// Fraction: (# dst events whose parent is a src event) / (# src events).
double branching_ratio(const std::vector<HawkesEvent>& events, Modality src, Modality dst);

// Gating-aware estimator: (# dst children of src events) divided by the summed
// kernel mass of src events that falls in time where dst is not gated and
// before the horizon. Recovers alpha(src, dst) without the gating loss that
// biases the plain ratio low.
double branching_estimate(const std::vector<HawkesEvent>& events, const HawkesConfig& cfg, Modality src,
                          Modality dst, Hours horizon);

std::array<std::size_t, kNumModalities> count_by_modality(const std::vector<HawkesEvent>& events);

}  // namespace opal::workload
