#include "hybridsim/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hybridsim/errors.hpp"

namespace hybridsim {

namespace {

// Guards the weighted running sum against accumulated rounding when the
// target is an exact multiple of the external weight.
constexpr double kTargetSlack = 1e-9;

void require(bool ok, const char* message) {
  if (!ok) throw DomainError(message);
}

}  // namespace

void DesignInputs::validate() const {
  require(n_experimental > 0, "n_experimental must be positive");
  require(n_control > 0, "n_control must be positive");
  require(std::isfinite(randomization_ratio) && randomization_ratio > 0.0, "randomization_ratio must be positive");
  require(expected_downweight > 0.0 && expected_downweight <= 1.0, "expected_downweight must lie in (0, 1]");
  require(std::isfinite(accrual_rate) && accrual_rate > 0.0, "accrual_rate must be positive");
  require(std::isfinite(baseline_hazard) && baseline_hazard > 0.0, "baseline_hazard must be positive");
  require(p_lost >= 0.0 && p_lost < 1.0, "p_lost must lie in [0, 1)");
  require(std::isfinite(target_events) && target_events > 0.0, "target_events must be positive");
  require(std::isfinite(hr_experimental) && hr_experimental > 0.0, "hr_experimental must be positive");
  require(std::isfinite(hr_external) && hr_external > 0.0, "hr_external must be positive");
}

std::size_t round_count(double x) {
  if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("round_count: negative or non-finite count");
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

TrialDesign derive_hybrid_design(const DesignInputs& inputs) {
  inputs.validate();
  TrialDesign d;
  const double r = inputs.randomization_ratio;
  d.n_experimental = inputs.n_experimental;
  d.n_control_hybrid = round_count(static_cast<double>(inputs.n_experimental) / r);
  if (d.n_control_hybrid > inputs.n_control) {
    throw InfeasibleDesignError("hybrid design needs " + std::to_string(d.n_control_hybrid) +
                                " trial controls but only " + std::to_string(inputs.n_control) + " were planned");
  }
  if (d.n_control_hybrid == 0) throw InfeasibleDesignError("hybrid design has no trial controls");
  d.n_external = round_count(static_cast<double>(inputs.n_control - d.n_control_hybrid) / inputs.expected_downweight);
  d.rate_experimental = inputs.accrual_rate * r / (r + 1.0);
  d.rate_control = inputs.accrual_rate / (r + 1.0);
  d.enrollment_months = static_cast<double>(d.n_experimental) / d.rate_experimental;
  d.rate_external = static_cast<double>(d.n_external) / d.enrollment_months;
  return d;
}

AccrualSchedule generate_accrual(const TrialDesign& design) {
  auto linear = [](std::size_t n, double rate) {
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = static_cast<double>(i + 1) / rate;
    return u;
  };
  AccrualSchedule s;
  s.experimental = linear(design.n_experimental, design.rate_experimental);
  s.control = linear(design.n_control_hybrid, design.rate_control);
  if (design.n_external > 0) s.external = linear(design.n_external, design.rate_external);
  return s;
}

SurvivalDataset simulate_outcomes(const TrialDesign& design, const DesignInputs& inputs, Rng& rng) {
  inputs.validate();
  const AccrualSchedule accrual = generate_accrual(design);
  const double loss_factor = inputs.p_lost / (1.0 - inputs.p_lost);

  std::vector<Subject> subjects;
  subjects.reserve(accrual.experimental.size() + accrual.control.size() + accrual.external.size());
  auto draw_arm = [&](const std::vector<double>& times, Arm arm, double hazard) {
    const double censor_hazard = hazard * loss_factor;
    for (double u : times) {
      const double event_time = rng.exponential(hazard);
      const double censor_time = rng.exponential(censor_hazard);
      Subject s;
      s.accrual_time = u;
      s.arm = arm;
      s.event = event_time <= censor_time;
      s.observed_time = s.event ? event_time : censor_time;
      s.weight = 1.0;
      subjects.push_back(s);
    }
  };
  const double lambda0 = inputs.baseline_hazard;
  draw_arm(accrual.experimental, Arm::TrialExperimental, lambda0 * inputs.hr_experimental);
  draw_arm(accrual.control, Arm::TrialControl, lambda0);
  draw_arm(accrual.external, Arm::ExternalControl, lambda0 * inputs.hr_external);
  return SurvivalDataset(std::move(subjects), "simulated");
}

double weighted_event_count(const SurvivalDataset& data, double external_weight) {
  double total = 0.0;
  for (const Subject& s : data.subjects()) {
    if (s.event) total += is_trial(s.arm) ? 1.0 : external_weight;
  }
  return total;
}

CensoringOutcome apply_administrative_censoring(SurvivalDataset data, double target_events, double external_weight) {
  if (!(target_events > 0.0) || !std::isfinite(target_events)) throw DomainError("target_events must be positive");
  if (!(external_weight >= 0.0 && external_weight <= 1.0)) throw DomainError("external_weight must lie in [0, 1]");

  const auto& subjects = data.subjects();
  std::vector<std::size_t> event_order;
  event_order.reserve(subjects.size());
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    if (subjects[i].event) event_order.push_back(i);
  }
  std::sort(event_order.begin(), event_order.end(), [&](std::size_t a, std::size_t b) {
    const double ta = subjects[a].calendar_time();
    const double tb = subjects[b].calendar_time();
    return ta < tb || (ta == tb && a < b);
  });

  CensoringOutcome out;
  double running = 0.0;
  for (std::size_t idx : event_order) {
    running += is_trial(subjects[idx].arm) ? 1.0 : external_weight;
    if (running >= target_events - kTargetSlack) {
      out.cutoff_time = subjects[idx].calendar_time();
      break;
    }
  }
  if (!std::isfinite(out.cutoff_time)) {
    out.under_target = true;
    out.data = std::move(data);
    return out;
  }

  const double cutoff = out.cutoff_time;
  std::vector<Subject> kept;
  kept.reserve(subjects.size());
  for (Subject s : subjects) {
    if (s.calendar_time() > cutoff) {
      s.observed_time = cutoff - s.accrual_time;
      s.event = false;
    }
    if (s.observed_time < 0.0) {
      ++out.dropped;
      continue;
    }
    kept.push_back(s);
  }
  out.data = SurvivalDataset(std::move(kept), data.label());
  return out;
}

}  // namespace hybridsim
