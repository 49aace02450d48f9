#include "hybridsim/survival.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "hybridsim/errors.hpp"

namespace hybridsim {

std::string_view arm_name(Arm arm) noexcept {
  switch (arm) {
    case Arm::TrialControl: return "trial_control";
    case Arm::TrialExperimental: return "trial_experimental";
    case Arm::ExternalControl: return "external_control";
  }
  return "unknown";
}

SurvivalDataset::SurvivalDataset(std::vector<Subject> subjects, std::string label)
    : subjects_(std::move(subjects)), label_(std::move(label)) {}

std::size_t SurvivalDataset::count(Arm arm) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(subjects_.begin(), subjects_.end(), [arm](const Subject& s) { return s.arm == arm; }));
}

std::size_t SurvivalDataset::events(Arm arm) const noexcept {
  return static_cast<std::size_t>(std::count_if(subjects_.begin(), subjects_.end(), [arm](const Subject& s) {
    return s.arm == arm && s.event;
  }));
}

ArmStats SurvivalDataset::stats(Arm arm) const noexcept { return stats_by_arm()[arm_index(arm)]; }

std::array<ArmStats, kArmCount> SurvivalDataset::stats_by_arm() const noexcept {
  std::array<ArmStats, kArmCount> out{};
  for (const Subject& s : subjects_) {
    ArmStats& a = out[arm_index(s.arm)];
    ++a.n;
    if (s.event) {
      ++a.events;
      a.weighted_events += s.weight;
    }
    a.weighted_exposure += s.weight * s.observed_time;
  }
  return out;
}

bool SurvivalDataset::has_empty_arm() const noexcept {
  const auto st = stats_by_arm();
  return std::any_of(st.begin(), st.end(), [](const ArmStats& a) { return a.n == 0; });
}

SurvivalDataset SurvivalDataset::filter(std::initializer_list<Arm> arms) const {
  std::vector<Subject> kept;
  kept.reserve(subjects_.size());
  for (const Subject& s : subjects_) {
    if (std::find(arms.begin(), arms.end(), s.arm) != arms.end()) kept.push_back(s);
  }
  return SurvivalDataset(std::move(kept), label_);
}

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

void fnv_mix(std::uint64_t& h, std::uint64_t word) {
  for (int i = 0; i < 8; ++i) {
    h ^= (word >> (8 * i)) & 0xffU;
    h *= kFnvPrime;
  }
}

}  // namespace

std::uint64_t SurvivalDataset::digest() const noexcept {
  std::uint64_t h = kFnvOffset;
  for (const Subject& s : subjects_) {
    fnv_mix(h, std::bit_cast<std::uint64_t>(s.accrual_time));
    fnv_mix(h, std::bit_cast<std::uint64_t>(s.observed_time));
    fnv_mix(h, static_cast<std::uint64_t>(s.event) | (static_cast<std::uint64_t>(s.arm) << 8));
    fnv_mix(h, std::bit_cast<std::uint64_t>(s.weight));
  }
  return h;
}

Contrast& Contrast::assign(Arm arm, int group, double weight_scale) {
  if (group != kExcluded && group != 0 && group != 1) throw DomainError("contrast group must be 0, 1 or excluded");
  if (!(weight_scale >= 0.0) || !std::isfinite(weight_scale)) {
    throw DomainError("contrast weight scale must be finite and non-negative");
  }
  groups_[arm_index(arm)] = group;
  scales_[arm_index(arm)] = weight_scale;
  return *this;
}

Contrast Contrast::treatment(double external_weight) {
  Contrast c;
  c.assign(Arm::TrialControl, 0).assign(Arm::ExternalControl, 0, external_weight).assign(Arm::TrialExperimental, 1);
  return c;
}

Contrast Contrast::trial_treatment() {
  Contrast c;
  c.assign(Arm::TrialControl, 0).assign(Arm::TrialExperimental, 1);
  return c;
}

Contrast Contrast::external_vs_control() {
  Contrast c;
  c.assign(Arm::TrialControl, 0).assign(Arm::ExternalControl, 1);
  return c;
}

double exp_cdf(double t, double lambda) {
  if (!std::isfinite(lambda) || lambda <= 0.0) throw DomainError("exp_cdf: rate must be finite and positive");
  if (!(t >= 0.0)) throw DomainError("exp_cdf: time must be non-negative");
  return -std::expm1(-lambda * t);
}

ExpFit fit_weighted_exponential(const std::array<ArmStats, kArmCount>& stats, const Contrast& contrast) {
  std::array<double, 2> events{};
  std::array<double, 2> exposure{};
  std::array<std::size_t, 2> members{};
  for (std::size_t a = 0; a < kArmCount; ++a) {
    const Arm arm = static_cast<Arm>(a);
    const int g = contrast.group(arm);
    if (g == Contrast::kExcluded) continue;
    const double scale = contrast.weight_scale(arm);
    members[g] += stats[a].n;
    events[g] += scale * stats[a].weighted_events;
    exposure[g] += scale * stats[a].weighted_exposure;
  }
  for (int g = 0; g < 2; ++g) {
    if (members[g] == 0) throw DomainError("exponential fit: group " + std::to_string(g) + " is empty");
    if (!(exposure[g] > 0.0)) {
      throw DomainError("exponential fit: group " + std::to_string(g) + " has no weighted follow-up");
    }
    if (!(events[g] > 0.0)) {
      throw DegenerateFitError("exponential fit: group " + std::to_string(g) + " has zero weighted events");
    }
  }
  ExpFit fit;
  const double log_rate0 = std::log(events[0] / exposure[0]);
  const double log_rate1 = std::log(events[1] / exposure[1]);
  fit.log_baseline_hazard = log_rate0;
  fit.log_hazard_ratio = log_rate1 - log_rate0;
  fit.se_log_hr = std::sqrt(1.0 / events[0] + 1.0 / events[1]);
  fit.weighted_events = events;
  fit.weighted_exposure = exposure;
  return fit;
}

ExpFit fit_weighted_exponential(const SurvivalDataset& data, const Contrast& contrast) {
  return fit_weighted_exponential(data.stats_by_arm(), contrast);
}

RateFit fit_exponential_rate(std::span<const Subject> subjects) {
  if (subjects.empty()) throw DomainError("rate fit: no subjects");
  double events = 0.0;
  double exposure = 0.0;
  for (const Subject& s : subjects) {
    if (s.event) events += s.weight;
    exposure += s.weight * s.observed_time;
  }
  if (!(exposure > 0.0)) throw DomainError("rate fit: no weighted follow-up");
  if (!(events > 0.0)) throw DegenerateFitError("rate fit: zero weighted events");
  return {std::log(events / exposure), 1.0 / std::sqrt(events)};
}

double chisq1_upper_tail(double x) {
  if (!(x >= 0.0)) throw DomainError("chi-squared statistic must be non-negative");
  return std::erfc(std::sqrt(0.5 * x));
}

LogrankResult logrank_test(std::span<const Subject> group0, std::span<const Subject> group1) {
  struct Obs {
    double time;
    bool event;
    int group;
  };
  std::vector<Obs> obs;
  obs.reserve(group0.size() + group1.size());
  for (const Subject& s : group0) obs.push_back({s.observed_time, s.event, 0});
  for (const Subject& s : group1) obs.push_back({s.observed_time, s.event, 1});
  std::sort(obs.begin(), obs.end(), [](const Obs& a, const Obs& b) { return a.time < b.time; });

  double at_risk0 = static_cast<double>(group0.size());
  double at_risk1 = static_cast<double>(group1.size());
  double o_minus_e = 0.0;
  double variance = 0.0;
  bool any_event = false;

  std::size_t i = 0;
  while (i < obs.size()) {
    const double t = obs[i].time;
    double deaths0 = 0.0;
    double deaths = 0.0;
    double leaving0 = 0.0;
    double leaving1 = 0.0;
    std::size_t j = i;
    for (; j < obs.size() && obs[j].time == t; ++j) {
      if (obs[j].event) {
        deaths += 1.0;
        if (obs[j].group == 0) deaths0 += 1.0;
      }
      (obs[j].group == 0 ? leaving0 : leaving1) += 1.0;
    }
    if (deaths > 0.0) {
      any_event = true;
      const double n = at_risk0 + at_risk1;
      o_minus_e += deaths0 - deaths * at_risk0 / n;
      if (n > 1.0) variance += deaths * (at_risk0 / n) * (at_risk1 / n) * (n - deaths) / (n - 1.0);
    }
    at_risk0 -= leaving0;
    at_risk1 -= leaving1;
    i = j;
  }
  if (!any_event) throw TestUndefinedError("log-rank test: no events in either group");
  if (!(variance > 0.0)) throw TestUndefinedError("log-rank test: zero variance");

  LogrankResult out;
  out.observed_minus_expected = o_minus_e;
  out.variance = variance;
  out.statistic = o_minus_e * o_minus_e / variance;
  out.p_value = chisq1_upper_tail(out.statistic);
  return out;
}

LogrankResult logrank_test(const SurvivalDataset& group0, const SurvivalDataset& group1) {
  return logrank_test(std::span<const Subject>(group0.subjects()), std::span<const Subject>(group1.subjects()));
}

}  // namespace hybridsim
