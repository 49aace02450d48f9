#pragma once

// Operating characteristics across Monte Carlo replicates.

#include <cstddef>
#include <optional>
#include <span>
#include <string>

#include "hybridsim/borrowing.hpp"

namespace hybridsim {

// Outcome of one method on one replicate; `result` is empty when the
// analysis threw, with the message kept in `error`.
struct MethodOutcome {
  Method method = Method::NoBorrow;
  std::optional<AnalysisResult> result;
  std::string error;
};

struct OperatingCharacteristics {
  Method method = Method::NoBorrow;
  std::size_t n_replicates = 0;  // replicates that produced a result
  std::size_t n_excluded = 0;    // replicates whose analysis errored
  std::size_t n_unreliable = 0;  // results flagged by sampler diagnostics
  double rejection_rate = 0.0;
  double rejection_mc_se = 0.0;  // sqrt(p (1 - p) / n)
  double mse_log_hr = 0.0;
  double bias_log_hr = 0.0;
  double mean_effective_events = 0.0;
  std::optional<double> sd_effective_events;  // n - 1 denominator; empty when n < 2
  double mean_effective_events_mc_se() const;
};

// max{0, d (var_trial / var_hybrid - 1)}.
double commensurate_effective_events(double trial_only_variance, double hybrid_variance, double trial_events);
double commensurate_effective_events(const PosteriorSummary& trial_only, const PosteriorSummary& hybrid,
                                     std::size_t log_hr_index_trial, std::size_t log_hr_index_hybrid,
                                     double trial_events);

// Throws DomainError on empty input or mixed methods.
OperatingCharacteristics aggregate(std::span<const MethodOutcome> outcomes, double true_log_hr);
OperatingCharacteristics aggregate(std::span<const AnalysisResult> results, double true_log_hr);

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x) noexcept;
  double value() const noexcept { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

}  // namespace hybridsim
