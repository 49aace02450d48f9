#pragma once

// Censored exponential survival primitives: distribution functions,
// closed-form weighted maximum likelihood for two-group exponential
// proportional-hazards models, and the two-sample log-rank test.

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hybridsim {

enum class Arm : std::uint8_t { TrialControl = 0, TrialExperimental = 1, ExternalControl = 2 };

inline constexpr std::size_t kArmCount = 3;

constexpr std::size_t arm_index(Arm arm) noexcept { return static_cast<std::size_t>(arm); }
constexpr bool is_trial(Arm arm) noexcept { return arm != Arm::ExternalControl; }
std::string_view arm_name(Arm arm) noexcept;

struct Subject {
  double accrual_time = 0.0;   // months since first enrolment
  double observed_time = 0.0;  // follow-up from accrual, months
  bool event = false;
  Arm arm = Arm::TrialControl;
  double weight = 1.0;

  double calendar_time() const noexcept { return accrual_time + observed_time; }
};

// Unweighted counts and weighted sufficient statistics for one arm.
struct ArmStats {
  std::size_t n = 0;
  std::size_t events = 0;
  double weighted_events = 0.0;
  double weighted_exposure = 0.0;
};

class SurvivalDataset {
 public:
  SurvivalDataset() = default;
  explicit SurvivalDataset(std::vector<Subject> subjects, std::string label = {});

  const std::vector<Subject>& subjects() const noexcept { return subjects_; }
  std::vector<Subject>& subjects() noexcept { return subjects_; }
  const std::string& label() const noexcept { return label_; }
  void set_label(std::string label) { label_ = std::move(label); }

  std::size_t size() const noexcept { return subjects_.size(); }
  bool empty() const noexcept { return subjects_.empty(); }

  std::size_t count(Arm arm) const noexcept;
  std::size_t events(Arm arm) const noexcept;
  ArmStats stats(Arm arm) const noexcept;
  std::array<ArmStats, kArmCount> stats_by_arm() const noexcept;

  // True when any of the three arms has no subjects.
  bool has_empty_arm() const noexcept;

  // Subjects of the listed arms only, in original order.
  SurvivalDataset filter(std::initializer_list<Arm> arms) const;

  // Order-sensitive 64-bit digest of every subject field.
  std::uint64_t digest() const noexcept;

 private:
  std::vector<Subject> subjects_;
  std::string label_;
};

// Assignment of arms to the reference group (0), the contrast group (1) or
// exclusion, with a per-arm multiplier applied on top of subject weights.
class Contrast {
 public:
  static constexpr int kExcluded = -1;

  Contrast& assign(Arm arm, int group, double weight_scale = 1.0);
  int group(Arm arm) const noexcept { return groups_[arm_index(arm)]; }
  double weight_scale(Arm arm) const noexcept { return scales_[arm_index(arm)]; }

  // Trial control (+ external at `external_weight`) versus trial experimental.
  static Contrast treatment(double external_weight);
  // Trial control versus trial experimental, external excluded.
  static Contrast trial_treatment();
  // Trial control versus external control, experimental excluded.
  static Contrast external_vs_control();

 private:
  std::array<int, kArmCount> groups_{kExcluded, kExcluded, kExcluded};
  std::array<double, kArmCount> scales_{1.0, 1.0, 1.0};
};

struct ExpFit {
  double log_baseline_hazard = 0.0;  // log rate in group 0
  double log_hazard_ratio = 0.0;     // log(rate1 / rate0)
  double se_log_hr = 0.0;
  std::array<double, 2> weighted_events{};
  std::array<double, 2> weighted_exposure{};
};

struct RateFit {
  double log_rate = 0.0;
  double se_log_rate = 0.0;  // 1 / sqrt(weighted events)
};

// 1 - exp(-lambda * t).
double exp_cdf(double t, double lambda);

// Closed-form weighted MLE: rate_g = sum(w * event) / sum(w * time) per
// group; se = sqrt(1/D0 + 1/D1) from the weighted event counts.
ExpFit fit_weighted_exponential(const SurvivalDataset& data, const Contrast& contrast);

// Same fit from precomputed per-arm statistics.
ExpFit fit_weighted_exponential(const std::array<ArmStats, kArmCount>& stats,
                                const Contrast& contrast);

// Single-group weighted MLE of an exponential rate.
RateFit fit_exponential_rate(std::span<const Subject> subjects);

struct LogrankResult {
  double statistic = 0.0;
  double p_value = 1.0;
  double observed_minus_expected = 0.0;  // for group 0
  double variance = 0.0;
};

// Unweighted two-sample log-rank test. Ties are grouped at identical times;
// subjects censored at an event time remain in that time's risk set.
LogrankResult logrank_test(std::span<const Subject> group0, std::span<const Subject> group1);
LogrankResult logrank_test(const SurvivalDataset& group0, const SurvivalDataset& group1);

// Upper tail of the chi-squared distribution with one degree of freedom.
double chisq1_upper_tail(double x);

}  // namespace hybridsim
