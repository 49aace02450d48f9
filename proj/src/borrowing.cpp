#include "hybridsim/borrowing.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>

#include "hybridsim/errors.hpp"

namespace hybridsim {

namespace {

constexpr double kUnreliableRhat = 1.1;

const ArmStats& arm(const std::array<ArmStats, kArmCount>& stats, Arm a) { return stats[arm_index(a)]; }

void require_trial_events(const std::array<ArmStats, kArmCount>& stats) {
  if (!(arm(stats, Arm::TrialControl).weighted_events > 0.0) ||
      !(arm(stats, Arm::TrialExperimental).weighted_events > 0.0)) {
    throw DegenerateFitError("trial arms must each have at least one event");
  }
}

AnalysisResult frequentist_result(Method method, const ExpFit& fit, double alpha) {
  AnalysisResult r;
  r.method = method;
  r.log_hr_hat = fit.log_hazard_ratio;
  r.se_or_posterior_sd = fit.se_log_hr;
  r.upper_bound = fit.log_hazard_ratio + critical_value(alpha) * fit.se_log_hr;
  r.reject = r.upper_bound < 0.0;
  return r;
}

void fill_bayesian(AnalysisResult& r, const SampleResult& samples, std::size_t log_hr_index, double alpha) {
  const PosteriorSummary post = summarize(samples.draws);
  r.log_hr_hat = post.mean(log_hr_index);
  r.posterior_variance = post.variance(log_hr_index);
  r.se_or_posterior_sd = std::sqrt(post.variance(log_hr_index));
  r.upper_bound = post.quantile(log_hr_index, 1.0 - alpha);
  r.reject = r.upper_bound < 0.0;

  SamplerDiagnostics diag;
  diag.max_split_rhat = post.max_split_rhat();
  diag.min_acceptance = *std::min_element(samples.acceptance_rate.begin(), samples.acceptance_rate.end());
  diag.stuck = samples.stuck;
  diag.warnings = samples.warnings;
  r.unreliable = samples.stuck || (diag.max_split_rhat && *diag.max_split_rhat > kUnreliableRhat);
  r.warnings.insert(r.warnings.end(), samples.warnings.begin(), samples.warnings.end());
  r.diagnostics = std::move(diag);
}

void check_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
}

}  // namespace

std::string_view method_name(Method method) noexcept {
  switch (method) {
    case Method::NoBorrow: return "no_borrow";
    case Method::TestThenPool: return "test_then_pool";
    case Method::TwoStep: return "two_step";
    case Method::PowerPrior: return "power_prior";
    case Method::Commensurate: return "commensurate";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) noexcept {
  for (Method m : kAllMethods) {
    if (method_name(m) == name) return m;
  }
  if (name == "two-step") return Method::TwoStep;
  if (name == "test-then-pool") return Method::TestThenPool;
  if (name == "no-borrow") return Method::NoBorrow;
  if (name == "power-prior") return Method::PowerPrior;
  return std::nullopt;
}

std::string_view commensurate_scale_name(CommensurateScale scale) noexcept {
  switch (scale) {
    case CommensurateScale::VarianceInverseTau: return "variance_inverse_tau";
    case CommensurateScale::VarianceInverseTauSquared: return "variance_inverse_tau_squared";
    case CommensurateScale::StdDevTau: return "sd_tau";
  }
  return "unknown";
}

std::optional<CommensurateScale> parse_commensurate_scale(std::string_view name) noexcept {
  if (name == "variance_inverse_tau") return CommensurateScale::VarianceInverseTau;
  if (name == "variance_inverse_tau_squared") return CommensurateScale::VarianceInverseTauSquared;
  if (name == "sd_tau") return CommensurateScale::StdDevTau;
  return std::nullopt;
}

void TuningParameters::validate() const {
  if (!(alpha_pool > 0.0 && alpha_pool < 1.0)) throw DomainError("alpha_pool must lie in (0, 1)");
  if (!(decay_c > 0.0) || !std::isfinite(decay_c)) throw DomainError("decay_c must be positive");
  if (!(power_a >= 0.0 && power_a <= 1.0)) throw DomainError("power_a must lie in [0, 1]");
  if (!(cauchy_scale_v > 0.0) || !std::isfinite(cauchy_scale_v)) throw DomainError("cauchy_scale_v must be positive");
}

double TuningParameters::value_for(Method method) const noexcept {
  switch (method) {
    case Method::TestThenPool: return alpha_pool;
    case Method::TwoStep: return decay_c;
    case Method::PowerPrior: return power_a;
    case Method::Commensurate: return cauchy_scale_v;
    case Method::NoBorrow: break;
  }
  return std::nan("");
}

TuningParameters TuningParameters::with_value(Method method, double value) const {
  TuningParameters t = *this;
  switch (method) {
    case Method::TestThenPool: t.alpha_pool = value; break;
    case Method::TwoStep: t.decay_c = value; break;
    case Method::PowerPrior: t.power_a = value; break;
    case Method::Commensurate: t.cauchy_scale_v = value; break;
    case Method::NoBorrow: throw DomainError("no_borrow has no tuning parameter");
  }
  t.validate();
  return t;
}

double critical_value(double alpha) {
  check_alpha(alpha);
  return boost::math::quantile(boost::math::complement(boost::math::normal_distribution<double>(), alpha));
}

double two_step_weight(double log_hr, double decay) {
  if (!(decay > 0.0)) throw DomainError("two-step decay must be positive");
  if (std::isnan(log_hr)) throw DomainError("two-step weight of NaN log hazard ratio");
  return std::exp(-decay * std::abs(log_hr));
}

ControlArms::ControlArms(const SurvivalDataset& data) {
  for (const Subject& s : data.subjects()) {
    if (s.arm == Arm::TrialControl) trial_control_.push_back(s);
    if (s.arm == Arm::ExternalControl) external_.push_back(s);
  }
}

SurvivalDataset ControlArms::as_dataset() const {
  std::vector<Subject> all(trial_control_);
  all.insert(all.end(), external_.begin(), external_.end());
  return SurvivalDataset(std::move(all), "controls");
}

PoolingDecision pooling_decision(const ControlArms& controls, double alpha_pool) {
  if (controls.trial_control().empty() || controls.external().empty()) {
    throw DomainError("test-then-pool needs nonempty trial-control and external arms");
  }
  PoolingDecision d;
  d.test = logrank_test(controls.external(), controls.trial_control());
  d.pool = d.test.p_value > alpha_pool;
  return d;
}

TwoStepWeight two_step_weight_from_controls(const ControlArms& controls, double decay) {
  TwoStepWeight out;
  try {
    const ExpFit fit = fit_weighted_exponential(controls.as_dataset(), Contrast::external_vs_control());
    out.log_hr_external = fit.log_hazard_ratio;
    out.weight = two_step_weight(fit.log_hazard_ratio, decay);
  } catch (const DomainError& e) {
    out.weight = 0.0;
    out.warning = std::string("two-step step 1 degenerate, no borrowing: ") + e.what();
  }
  return out;
}

AnalysisResult analyze_no_borrowing(const SurvivalDataset& data, double alpha) {
  check_alpha(alpha);
  const auto stats = data.stats_by_arm();
  AnalysisResult r = frequentist_result(Method::NoBorrow, fit_weighted_exponential(stats, Contrast::trial_treatment()),
                                        alpha);
  r.external_events = arm(stats, Arm::ExternalControl).events;
  r.effective_events = 0.0;
  return r;
}

AnalysisResult analyze_test_then_pool(const SurvivalDataset& data, const TuningParameters& tuning, double alpha) {
  check_alpha(alpha);
  const PoolingDecision decision = pooling_decision(ControlArms(data), tuning.alpha_pool);
  const auto stats = data.stats_by_arm();
  const Contrast contrast = decision.pool ? Contrast::treatment(1.0) : Contrast::trial_treatment();
  AnalysisResult r = frequentist_result(Method::TestThenPool, fit_weighted_exponential(stats, contrast), alpha);
  r.external_events = arm(stats, Arm::ExternalControl).events;
  r.borrow_weight = decision.pool ? 1.0 : 0.0;
  r.effective_events = decision.pool ? static_cast<double>(r.external_events) : 0.0;
  return r;
}

AnalysisResult analyze_two_step(const SurvivalDataset& data, const TuningParameters& tuning, double alpha) {
  check_alpha(alpha);
  const TwoStepWeight step1 = two_step_weight_from_controls(ControlArms(data), tuning.decay_c);
  const auto stats = data.stats_by_arm();
  AnalysisResult r = frequentist_result(
      Method::TwoStep, fit_weighted_exponential(stats, Contrast::treatment(step1.weight)), alpha);
  r.external_events = arm(stats, Arm::ExternalControl).events;
  r.borrow_weight = step1.weight;
  r.effective_events = step1.weight * static_cast<double>(r.external_events);
  if (step1.warning) r.warnings.push_back(*step1.warning);
  return r;
}

SampleResult sample_power_prior(const std::array<ArmStats, kArmCount>& stats, double power_a,
                                const SamplerConfig& sampler) {
  require_trial_events(stats);
  const ArmStats& c = arm(stats, Arm::TrialControl);
  const ArmStats& e = arm(stats, Arm::TrialExperimental);
  const ArmStats& x = arm(stats, Arm::ExternalControl);
  // l = A0 b0 + De b1 - exp(b0) E0 - exp(b0 + b1) Ye
  const double a0 = c.weighted_events + e.weighted_events + power_a * x.weighted_events;
  const double e0 = c.weighted_exposure + power_a * x.weighted_exposure;
  const double de = e.weighted_events;
  const double ye = e.weighted_exposure;
  LogDensity lp = [=](std::span<const double> b) {
    const double rate0 = std::exp(b[0]);
    return a0 * b[0] + de * b[1] - rate0 * e0 - rate0 * std::exp(b[1]) * ye;
  };
  const double control_events = c.weighted_events + power_a * x.weighted_events;
  const double beta0 = std::log(control_events / e0);
  const std::array<double, 2> init{beta0, std::log(de / ye) - beta0};
  const std::array<double, 2> scale{2.4 / std::sqrt(a0), 2.4 / std::sqrt(de)};
  return sample(lp, init, sampler, scale);
}

namespace {

double log_commensurate_prior(double diff, double tau, CommensurateScale scale) {
  switch (scale) {
    case CommensurateScale::VarianceInverseTau: return 0.5 * std::log(tau) - 0.5 * tau * diff * diff;
    case CommensurateScale::VarianceInverseTauSquared: return std::log(tau) - 0.5 * tau * tau * diff * diff;
    case CommensurateScale::StdDevTau: return -std::log(tau) - 0.5 * diff * diff / (tau * tau);
  }
  return std::nan("");
}

struct CommensurateStats {
  double dc, yc, de, ye, dx, yx;
};

CommensurateStats commensurate_stats(const std::array<ArmStats, kArmCount>& stats) {
  require_trial_events(stats);
  const ArmStats& c = arm(stats, Arm::TrialControl);
  const ArmStats& e = arm(stats, Arm::TrialExperimental);
  const ArmStats& x = arm(stats, Arm::ExternalControl);
  if (!(x.weighted_events > 0.0)) throw DegenerateFitError("commensurate model needs at least one external event");
  return {c.weighted_events, c.weighted_exposure, e.weighted_events, e.weighted_exposure, x.weighted_events,
          x.weighted_exposure};
}

double commensurate_likelihood(const CommensurateStats& s, double b0t, double b0x, double b1) {
  const double rate_c = std::exp(b0t);
  return (s.dc + s.de) * b0t + s.de * b1 - rate_c * s.yc - rate_c * std::exp(b1) * s.ye + s.dx * b0x -
         std::exp(b0x) * s.yx;
}

}  // namespace

SampleResult sample_commensurate(const std::array<ArmStats, kArmCount>& stats, double cauchy_scale,
                                 CommensurateScale scale, const SamplerConfig& sampler) {
  if (!(cauchy_scale > 0.0)) throw DomainError("Half-Cauchy scale must be positive");
  const CommensurateStats s = commensurate_stats(stats);
  const double inv_v2 = 1.0 / (cauchy_scale * cauchy_scale);
  // Parameters: beta0_trial, beta0_external, beta1, log tau. The log tau
  // term adds the Jacobian of the tau -> log tau change of variables.
  LogDensity lp = [=](std::span<const double> p) {
    const double log_tau = p[3];
    const double tau = std::exp(log_tau);
    if (!std::isfinite(tau) || tau <= 0.0) return -std::numeric_limits<double>::infinity();
    return commensurate_likelihood(s, p[0], p[1], p[2]) + log_commensurate_prior(p[0] - p[1], tau, scale) -
           std::log1p(tau * tau * inv_v2) + log_tau;
  };
  const double b0t = std::log(s.dc / s.yc);
  const std::array<double, 4> init{b0t, std::log(s.dx / s.yx), std::log(s.de / s.ye) - b0t, 0.0};
  const std::array<double, 4> step{2.4 / std::sqrt(s.dc + s.de), 2.4 / std::sqrt(s.dx), 2.4 / std::sqrt(s.de), 2.0};
  return sample(lp, init, sampler, step);
}

SampleResult sample_commensurate_fixed_tau(const std::array<ArmStats, kArmCount>& stats, double tau,
                                           CommensurateScale scale, const SamplerConfig& sampler) {
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  const CommensurateStats s = commensurate_stats(stats);
  LogDensity lp = [=](std::span<const double> p) {
    return commensurate_likelihood(s, p[0], p[1], p[2]) + log_commensurate_prior(p[0] - p[1], tau, scale);
  };
  const double b0t = std::log(s.dc / s.yc);
  const std::array<double, 3> init{b0t, std::log(s.dx / s.yx), std::log(s.de / s.ye) - b0t};
  const std::array<double, 3> step{2.4 / std::sqrt(s.dc + s.de), 2.4 / std::sqrt(s.dx), 2.4 / std::sqrt(s.de)};
  return sample(lp, init, sampler, step);
}

AnalysisResult analyze_power_prior(const SurvivalDataset& data, const TuningParameters& tuning, double alpha,
                                   const SamplerConfig& sampler) {
  check_alpha(alpha);
  const auto stats = data.stats_by_arm();
  AnalysisResult r;
  r.method = Method::PowerPrior;
  fill_bayesian(r, sample_power_prior(stats, tuning.power_a, sampler), kLogHrIndexPowerPrior, alpha);
  r.external_events = arm(stats, Arm::ExternalControl).events;
  r.borrow_weight = tuning.power_a;
  r.effective_events = tuning.power_a * static_cast<double>(r.external_events);
  return r;
}

AnalysisResult analyze_commensurate(const SurvivalDataset& data, const TuningParameters& tuning, double alpha,
                                    const SamplerConfig& sampler) {
  check_alpha(alpha);
  const auto stats = data.stats_by_arm();
  AnalysisResult r;
  r.method = Method::Commensurate;
  fill_bayesian(r, sample_commensurate(stats, tuning.cauchy_scale_v, tuning.commensurate_scale, sampler),
                kLogHrIndexCommensurate, alpha);
  r.external_events = arm(stats, Arm::ExternalControl).events;
  return r;
}

PosteriorSummary bayes_trial_only(const SurvivalDataset& data, const SamplerConfig& sampler) {
  auto stats = data.stats_by_arm();
  stats[arm_index(Arm::ExternalControl)] = ArmStats{};
  return summarize(sample_power_prior(stats, 0.0, sampler).draws);
}

}  // namespace hybridsim
