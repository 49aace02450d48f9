#pragma once

// Deterministic design projection for a trial whose control arm is
// augmented with historical and concurrent external patients: randomization
// ratio and arm accrual rates, expected event curves, clinical cutoff time
// and the benefit relative to a design without external data.

#include <cstddef>
#include <vector>

namespace hybridsim {

struct PlannerInputs {
  std::size_t n_experimental = 450;
  std::size_t n_control = 450;
  double accrual_rate = 34.0;           // trial patients / month
  double external_rate = 11.3;          // effective (post-downweighting) external patients / month
  double historic_months = 0.0;         // months of historical external accrual
  double baseline_hazard = 0.043;
  double hr_experimental = 0.78;
  double p_lost = 0.05;
  double target_events = 655.0;
  double initial_ratio = 1.0;

  void validate() const;
  double historical_external() const noexcept { return historic_months * external_rate; }
};

struct ExpectedEvents {
  double experimental = 0.0;
  double trial_control = 0.0;
  double external = 0.0;
  double total() const noexcept { return experimental + trial_control + external; }
};

struct PlannerOutputs {
  double initial_ratio = 1.0;
  double ratio_after_historical = 1.0;  // before the concurrent-accrual solve
  double final_ratio = 1.0;             // s_E / s_C
  double rate_experimental = 0.0;
  double rate_control = 0.0;
  double rate_external = 0.0;
  double enrollment_months = 0.0;
  double n_external_historical = 0.0;
  double n_external_concurrent = 0.0;
  std::size_t n_trial_control = 0;      // round(s_C * enrollment)
  std::size_t n_experimental = 0;
  double cutoff_months = 0.0;           // set by solve_cutoff
  ExpectedEvents events_at_cutoff;

  std::size_t randomized() const noexcept { return n_experimental + n_trial_control; }
};

// Throws InfeasibleDesignError when no positive rate split exists.
PlannerOutputs update_design_for_external(const PlannerInputs& inputs);

// Linear accrual times per arm; historical external patients sit at
// 0, -1/s, ..., -(N0 - 1)/s and concurrent ones at 1/s, 2/s, ...
struct PlannedAccrual {
  std::vector<double> experimental;
  std::vector<double> trial_control;
  std::vector<double> external;
};

PlannedAccrual planned_accrual(const PlannerOutputs& outputs);

// Expected cumulative events by month t. External follow-up is capped at t,
// so historical patients contribute no events before the trial starts.
ExpectedEvents project_events(const PlannerOutputs& outputs, const PlannerInputs& inputs, double t);

// Smallest t (bisection, 0.01-month tolerance) with expected total events
// reaching the target. Throws InfeasibleDesignError when unreachable.
double solve_cutoff(const PlannerOutputs& outputs, const PlannerInputs& inputs);

// update_design_for_external followed by solve_cutoff.
PlannerOutputs plan_design(const PlannerInputs& inputs);

struct EventCurveRow {
  double t_months = 0.0;
  ExpectedEvents events;
};

std::vector<EventCurveRow> event_curve(const PlannerOutputs& outputs, const PlannerInputs& inputs, double step_months,
                                       double horizon_months);

struct BenefitReport {
  double enrollment_months_saved = 0.0;
  double cutoff_months_saved = 0.0;
  long randomized_patients_saved = 0;
  ExpectedEvents original_events_at_cutoff;
  ExpectedEvents hybrid_events_at_cutoff;
};

BenefitReport summarize_benefits(const PlannerOutputs& original, const PlannerOutputs& hybrid);

}  // namespace hybridsim
