#pragma once

// Hybrid-trial data generation: design derivation from borrowing
// assumptions, deterministic linear accrual, exponential event and
// loss-to-follow-up times, and event-driven administrative censoring.

#include <cstddef>
#include <limits>
#include <vector>

#include "hybridsim/random.hpp"
#include "hybridsim/survival.hpp"

namespace hybridsim {

struct DesignInputs {
  std::size_t n_experimental = 450;   // planned experimental patients
  std::size_t n_control = 450;        // originally planned control patients
  double randomization_ratio = 2.0;   // experimental : control after borrowing
  double expected_downweight = 0.6;   // expected weight of an external patient
  double accrual_rate = 34.0;         // trial patients / month
  double baseline_hazard = 0.043;     // per month
  double p_lost = 0.05;               // probability of loss to follow-up
  double target_events = 655.0;       // weighted events triggering the cutoff
  double hr_experimental = 0.78;
  double hr_external = 1.0;           // residual bias, external vs trial control

  // Throws DomainError on out-of-range values.
  void validate() const;
};

struct TrialDesign {
  std::size_t n_experimental = 0;
  std::size_t n_control_hybrid = 0;
  std::size_t n_external = 0;
  double rate_experimental = 0.0;
  double rate_control = 0.0;
  double rate_external = 0.0;
  double enrollment_months = 0.0;
};

struct AccrualSchedule {
  std::vector<double> experimental;
  std::vector<double> control;
  std::vector<double> external;
};

struct CensoringOutcome {
  SurvivalDataset data;
  double cutoff_time = std::numeric_limits<double>::infinity();
  bool under_target = false;  // target never reached; data returned unchanged
  std::size_t dropped = 0;    // subjects accrued after the cutoff
};

// Nearest-integer rounding with halves rounded up.
std::size_t round_count(double x);

// Throws InfeasibleDesignError when the hybrid design would need more trial
// controls than originally planned.
TrialDesign derive_hybrid_design(const DesignInputs& inputs);

// u_i = i / rate for i = 1..n in each arm.
AccrualSchedule generate_accrual(const TrialDesign& design);

// Draws event and loss-to-follow-up times for every subject, arms in the
// order experimental, control, external and subjects in accrual order; each
// subject consumes exactly two uniforms (event, then censoring).
SurvivalDataset simulate_outcomes(const TrialDesign& design, const DesignInputs& inputs, Rng& rng);

// Censors follow-up at the calendar time when the weighted event count
// (trial events 1, external events `external_weight`) first reaches
// `target_events`; subjects accrued after that time are dropped.
CensoringOutcome apply_administrative_censoring(SurvivalDataset data, double target_events,
                                                double external_weight);

// Weighted event count with trial events at weight 1 and external events at
// `external_weight`.
double weighted_event_count(const SurvivalDataset& data, double external_weight);

}  // namespace hybridsim
