#pragma once

// Analysis strategies for a hybrid control arm. Each maps one dataset to a
// log hazard ratio estimate for the experimental arm, a one-sided upper
// decision bound, and the number of external events effectively borrowed.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hybridsim/mcmc.hpp"
#include "hybridsim/survival.hpp"

namespace hybridsim {

enum class Method { NoBorrow = 0, TestThenPool = 1, TwoStep = 2, PowerPrior = 3, Commensurate = 4 };

inline constexpr std::array<Method, 5> kAllMethods{Method::NoBorrow, Method::TestThenPool, Method::TwoStep,
                                                   Method::PowerPrior, Method::Commensurate};

std::string_view method_name(Method method) noexcept;
std::optional<Method> parse_method(std::string_view name) noexcept;

// How the commensurate prior's second argument relates to tau.
enum class CommensurateScale {
  VarianceInverseTau,         // beta0_trial ~ N(beta0_ext, variance 1/tau)
  VarianceInverseTauSquared,  // beta0_trial ~ N(beta0_ext, sd 1/tau), precision tau^2
  StdDevTau,                  // beta0_trial ~ N(beta0_ext, sd tau)
};

std::string_view commensurate_scale_name(CommensurateScale scale) noexcept;
std::optional<CommensurateScale> parse_commensurate_scale(std::string_view name) noexcept;

struct TuningParameters {
  double alpha_pool = 0.15;       // test-then-pool significance level
  double decay_c = 8.25;          // two-step weight decay
  double power_a = 0.6;           // static power prior
  double cauchy_scale_v = 0.035;  // commensurate Half-Cauchy scale
  CommensurateScale commensurate_scale = CommensurateScale::StdDevTau;

  void validate() const;
  // The tuning value that applies to `method`; NaN for NoBorrow.
  double value_for(Method method) const noexcept;
  // Copy with the tuning value for `method` replaced.
  TuningParameters with_value(Method method, double value) const;
};

struct SamplerDiagnostics {
  std::optional<double> max_split_rhat;
  double min_acceptance = 0.0;
  bool stuck = false;
  std::vector<std::string> warnings;
};

struct AnalysisResult {
  Method method = Method::NoBorrow;
  double log_hr_hat = 0.0;
  double se_or_posterior_sd = 0.0;
  double upper_bound = 0.0;
  bool reject = false;                  // upper_bound < 0
  std::optional<double> borrow_weight;  // w, a, or 0/1 for pooling
  double effective_events = 0.0;
  std::size_t external_events = 0;
  std::optional<double> posterior_variance;  // Bayesian methods, log HR
  std::optional<SamplerDiagnostics> diagnostics;
  bool unreliable = false;  // sampler diagnostics failed
  std::vector<std::string> warnings;
};

// Standard-normal upper-alpha critical value, e.g. 1.959964 at 0.025.
double critical_value(double alpha);

// w = exp(-decay * |log HR|).
double two_step_weight(double log_hr, double decay);

// Trial-control and external subjects only. Borrowing decisions built on
// this type cannot read experimental-arm outcomes.
class ControlArms {
 public:
  explicit ControlArms(const SurvivalDataset& data);

  std::span<const Subject> trial_control() const noexcept { return trial_control_; }
  std::span<const Subject> external() const noexcept { return external_; }
  SurvivalDataset as_dataset() const;

 private:
  std::vector<Subject> trial_control_;
  std::vector<Subject> external_;
};

struct PoolingDecision {
  LogrankResult test;
  bool pool = false;  // p strictly greater than alpha_pool
};

PoolingDecision pooling_decision(const ControlArms& controls, double alpha_pool);

struct TwoStepWeight {
  double weight = 0.0;
  std::optional<double> log_hr_external;  // empty when step 1 was degenerate
  std::optional<std::string> warning;
};

TwoStepWeight two_step_weight_from_controls(const ControlArms& controls, double decay);

AnalysisResult analyze_no_borrowing(const SurvivalDataset& data, double alpha);
AnalysisResult analyze_test_then_pool(const SurvivalDataset& data, const TuningParameters& tuning, double alpha);
AnalysisResult analyze_two_step(const SurvivalDataset& data, const TuningParameters& tuning, double alpha);
AnalysisResult analyze_power_prior(const SurvivalDataset& data, const TuningParameters& tuning, double alpha,
                                   const SamplerConfig& sampler);
// effective_events is left at 0; see commensurate_effective_events().
AnalysisResult analyze_commensurate(const SurvivalDataset& data, const TuningParameters& tuning, double alpha,
                                    const SamplerConfig& sampler);

// Flat-prior posterior over (log baseline hazard, log HR) from trial
// subjects only.
PosteriorSummary bayes_trial_only(const SurvivalDataset& data, const SamplerConfig& sampler);

// Posterior draws underlying the Bayesian analyses, for diagnostics and
// tests. Parameter order: power prior (beta0, beta1); commensurate
// (beta0_trial, beta0_external, beta1, log tau).
SampleResult sample_power_prior(const std::array<ArmStats, kArmCount>& stats, double power_a,
                                const SamplerConfig& sampler);
SampleResult sample_commensurate(const std::array<ArmStats, kArmCount>& stats, double cauchy_scale,
                                 CommensurateScale scale, const SamplerConfig& sampler);

// Commensurate log posterior with the precision hyperparameter fixed at
// `tau` (no hyperprior); parameters (beta0_trial, beta0_external, beta1).
SampleResult sample_commensurate_fixed_tau(const std::array<ArmStats, kArmCount>& stats, double tau,
                                           CommensurateScale scale, const SamplerConfig& sampler);

inline constexpr std::size_t kLogHrIndexPowerPrior = 1;
inline constexpr std::size_t kLogHrIndexCommensurate = 2;

}  // namespace hybridsim
