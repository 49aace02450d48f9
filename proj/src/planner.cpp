#include "hybridsim/planner.hpp"

#include <algorithm>
#include <cmath>

#include "hybridsim/datagen.hpp"
#include "hybridsim/errors.hpp"
#include "hybridsim/survival.hpp"

namespace hybridsim {

namespace {

constexpr double kCutoffTolerance = 0.01;

void require(bool ok, const char* message) {
  if (!ok) throw DomainError(message);
}

std::vector<double> linear_times(std::size_t n, double rate) {
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = static_cast<double>(i + 1) / rate;
  return u;
}

double expected_arm_events(const std::vector<double>& accrual, double hazard, double retained, double t,
                           bool cap_followup) {
  double sum = 0.0;
  for (double u : accrual) {
    if (u > t) continue;
    const double followup = cap_followup ? std::min(t - u, t) : t - u;
    sum += exp_cdf(followup, hazard);
  }
  return retained * sum;
}

}  // namespace

void PlannerInputs::validate() const {
  require(n_experimental > 0, "planner: n_experimental must be positive");
  require(n_control > 0, "planner: n_control must be positive");
  require(std::isfinite(accrual_rate) && accrual_rate > 0.0, "planner: accrual_rate must be positive");
  require(std::isfinite(external_rate) && external_rate >= 0.0, "planner: external_rate must be non-negative");
  require(std::isfinite(historic_months) && historic_months >= 0.0, "planner: historic_months must be non-negative");
  require(std::isfinite(baseline_hazard) && baseline_hazard > 0.0, "planner: baseline_hazard must be positive");
  require(std::isfinite(hr_experimental) && hr_experimental > 0.0, "planner: hr_experimental must be positive");
  require(p_lost >= 0.0 && p_lost < 1.0, "planner: p_lost must lie in [0, 1)");
  require(std::isfinite(target_events) && target_events >= 0.0, "planner: target_events must be non-negative");
  require(std::isfinite(initial_ratio) && initial_ratio > 0.0, "planner: initial_ratio must be positive");
}

PlannerOutputs update_design_for_external(const PlannerInputs& inputs) {
  inputs.validate();
  PlannerOutputs out;
  const double n_e = static_cast<double>(inputs.n_experimental);
  const double historical = inputs.historical_external();
  const double controls_left = static_cast<double>(inputs.n_control) - historical;
  if (!(controls_left > 0.0)) {
    throw InfeasibleDesignError("historical external patients already cover the planned control arm");
  }
  const double s = inputs.accrual_rate;

  out.initial_ratio = inputs.initial_ratio;
  out.ratio_after_historical = n_e / controls_left;

  // s_C + s_E = s and s_E / n_E - s_C / m = s_RWD / m, with m the controls
  // still needed after historical accrual.
  const double rate_c = (s / n_e - inputs.external_rate / controls_left) / (1.0 / n_e + 1.0 / controls_left);
  const double rate_e = s - rate_c;
  if (!(rate_c > 0.0) || !(rate_e > 0.0)) {
    throw InfeasibleDesignError("external accrual fills the control arm faster than the trial can randomize");
  }
  out.rate_control = rate_c;
  out.rate_experimental = rate_e;
  out.rate_external = inputs.external_rate;
  out.final_ratio = rate_e / rate_c;
  out.enrollment_months = n_e / rate_e;
  out.n_external_historical = historical;
  out.n_external_concurrent = inputs.external_rate * out.enrollment_months;
  out.n_trial_control = round_count(rate_c * out.enrollment_months);
  out.n_experimental = inputs.n_experimental;
  return out;
}

PlannedAccrual planned_accrual(const PlannerOutputs& outputs) {
  PlannedAccrual a;
  a.experimental = linear_times(outputs.n_experimental, outputs.rate_experimental);
  a.trial_control = linear_times(outputs.n_trial_control, outputs.rate_control);
  if (outputs.rate_external > 0.0) {
    const std::size_t n_hist = round_count(outputs.n_external_historical);
    const std::size_t n_conc = round_count(outputs.n_external_concurrent);
    a.external.reserve(n_hist + n_conc);
    for (std::size_t k = n_hist; k-- > 0;) a.external.push_back(-static_cast<double>(k) / outputs.rate_external);
    for (std::size_t i = 1; i <= n_conc; ++i) a.external.push_back(static_cast<double>(i) / outputs.rate_external);
  }
  return a;
}

ExpectedEvents project_events(const PlannerOutputs& outputs, const PlannerInputs& inputs, double t) {
  if (!(t >= 0.0)) throw DomainError("project_events: time must be non-negative");
  const PlannedAccrual a = planned_accrual(outputs);
  const double retained = 1.0 - inputs.p_lost;
  const double lambda0 = inputs.baseline_hazard;
  ExpectedEvents e;
  e.experimental = expected_arm_events(a.experimental, lambda0 * inputs.hr_experimental, retained, t, false);
  e.trial_control = expected_arm_events(a.trial_control, lambda0, retained, t, false);
  e.external = expected_arm_events(a.external, lambda0, retained, t, true);
  return e;
}

double solve_cutoff(const PlannerOutputs& outputs, const PlannerInputs& inputs) {
  const double target = inputs.target_events;
  if (target <= 0.0) return 0.0;
  const PlannedAccrual a = planned_accrual(outputs);
  const double ceiling = (1.0 - inputs.p_lost) *
                         static_cast<double>(a.experimental.size() + a.trial_control.size() + a.external.size());
  if (!(ceiling > target)) {
    throw InfeasibleDesignError("target events exceed the expected events of the whole enrolled population");
  }
  double lo = 0.0;
  double hi = std::max(1.0, outputs.enrollment_months);
  while (project_events(outputs, inputs, hi).total() < target) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e6) throw InfeasibleDesignError("target events not reached within a million months");
  }
  while (hi - lo > kCutoffTolerance) {
    const double mid = 0.5 * (lo + hi);
    if (project_events(outputs, inputs, mid).total() >= target) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

PlannerOutputs plan_design(const PlannerInputs& inputs) {
  PlannerOutputs out = update_design_for_external(inputs);
  out.cutoff_months = solve_cutoff(out, inputs);
  out.events_at_cutoff = project_events(out, inputs, out.cutoff_months);
  return out;
}

std::vector<EventCurveRow> event_curve(const PlannerOutputs& outputs, const PlannerInputs& inputs, double step_months,
                                       double horizon_months) {
  if (!(step_months > 0.0)) throw DomainError("event_curve: step must be positive");
  if (!(horizon_months >= 0.0)) throw DomainError("event_curve: horizon must be non-negative");
  std::vector<EventCurveRow> rows;
  const auto n = static_cast<std::size_t>(std::floor(horizon_months / step_months + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) * step_months;
    rows.push_back({t, project_events(outputs, inputs, t)});
  }
  return rows;
}

BenefitReport summarize_benefits(const PlannerOutputs& original, const PlannerOutputs& hybrid) {
  BenefitReport r;
  r.enrollment_months_saved = original.enrollment_months - hybrid.enrollment_months;
  r.cutoff_months_saved = original.cutoff_months - hybrid.cutoff_months;
  r.randomized_patients_saved =
      static_cast<long>(original.randomized()) - static_cast<long>(hybrid.randomized());
  r.original_events_at_cutoff = original.events_at_cutoff;
  r.hybrid_events_at_cutoff = hybrid.events_at_cutoff;
  return r;
}

}  // namespace hybridsim
