#include "hybridsim/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "hybridsim/errors.hpp"

namespace hybridsim {

void CompensatedSum::add(double x) noexcept {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    compensation_ += (sum_ - t) + x;
  } else {
    compensation_ += (x - t) + sum_;
  }
  sum_ = t;
}

double OperatingCharacteristics::mean_effective_events_mc_se() const {
  if (!sd_effective_events || n_replicates == 0) return std::nan("");
  return *sd_effective_events / std::sqrt(static_cast<double>(n_replicates));
}

double commensurate_effective_events(double trial_only_variance, double hybrid_variance, double trial_events) {
  if (!(hybrid_variance > 0.0)) throw DomainError("hybrid posterior variance must be positive");
  if (!(trial_only_variance > 0.0)) throw DomainError("trial-only posterior variance must be positive");
  if (!(trial_events >= 0.0)) throw DomainError("trial event count must be non-negative");
  return std::max(0.0, trial_events * (trial_only_variance / hybrid_variance - 1.0));
}

double commensurate_effective_events(const PosteriorSummary& trial_only, const PosteriorSummary& hybrid,
                                     std::size_t log_hr_index_trial, std::size_t log_hr_index_hybrid,
                                     double trial_events) {
  return commensurate_effective_events(trial_only.variance(log_hr_index_trial),
                                       hybrid.variance(log_hr_index_hybrid), trial_events);
}

OperatingCharacteristics aggregate(std::span<const MethodOutcome> outcomes, double true_log_hr) {
  if (outcomes.empty()) throw DomainError("aggregate: no replicates");
  const Method method = outcomes.front().method;
  OperatingCharacteristics oc;
  oc.method = method;

  CompensatedSum rejections, estimate_sum, sq_error_sum, eff_sum;
  std::vector<double> effective;
  effective.reserve(outcomes.size());
  for (const MethodOutcome& o : outcomes) {
    if (o.method != method) throw DomainError("aggregate: outcomes mix methods");
    if (!o.result) {
      ++oc.n_excluded;
      continue;
    }
    const AnalysisResult& r = *o.result;
    if (r.method != method) throw DomainError("aggregate: outcomes mix methods");
    ++oc.n_replicates;
    if (r.unreliable) ++oc.n_unreliable;
    rejections.add(r.reject ? 1.0 : 0.0);
    estimate_sum.add(r.log_hr_hat);
    const double err = r.log_hr_hat - true_log_hr;
    sq_error_sum.add(err * err);
    eff_sum.add(r.effective_events);
    effective.push_back(r.effective_events);
  }
  if (oc.n_replicates == 0) {
    const double nan = std::nan("");
    oc.rejection_rate = oc.rejection_mc_se = oc.mse_log_hr = oc.bias_log_hr = oc.mean_effective_events = nan;
    return oc;
  }
  const double n = static_cast<double>(oc.n_replicates);
  oc.rejection_rate = rejections.value() / n;
  oc.rejection_mc_se = std::sqrt(oc.rejection_rate * (1.0 - oc.rejection_rate) / n);
  oc.bias_log_hr = estimate_sum.value() / n - true_log_hr;
  oc.mse_log_hr = sq_error_sum.value() / n;
  oc.mean_effective_events = eff_sum.value() / n;
  if (oc.n_replicates > 1) {
    CompensatedSum dev;
    for (double e : effective) dev.add((e - oc.mean_effective_events) * (e - oc.mean_effective_events));
    oc.sd_effective_events = std::sqrt(dev.value() / (n - 1.0));
  }
  return oc;
}

OperatingCharacteristics aggregate(std::span<const AnalysisResult> results, double true_log_hr) {
  std::vector<MethodOutcome> outcomes;
  outcomes.reserve(results.size());
  for (const AnalysisResult& r : results) outcomes.push_back({r.method, r, {}});
  return aggregate(std::span<const MethodOutcome>(outcomes), true_log_hr);
}

}  // namespace hybridsim
