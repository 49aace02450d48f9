#pragma once

// Shared helpers for the test suites: subject builders, random dataset
// generators for property tests, and independent reference computations.

#include <algorithm>
#include <array>
#include <cmath>
#include <vector>

#include "hybridsim/random.hpp"
#include "hybridsim/survival.hpp"

namespace hybridsim::testing {

inline Subject subject(double time, bool event, Arm arm = Arm::TrialControl, double weight = 1.0,
                       double accrual = 0.0) {
  Subject s;
  s.accrual_time = accrual;
  s.observed_time = time;
  s.event = event;
  s.arm = arm;
  s.weight = weight;
  return s;
}

inline std::vector<Subject> group(std::initializer_list<std::pair<double, bool>> items, Arm arm = Arm::TrialControl) {
  std::vector<Subject> out;
  for (const auto& [t, e] : items) out.push_back(subject(t, e, arm));
  return out;
}

// Random dataset with 2..max_n subjects over the three arms, positive
// weights, and at least one event in each trial arm.
inline SurvivalDataset random_dataset(Rng& rng, std::size_t max_n = 20, bool with_weights = true) {
  const std::size_t n = 4 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(max_n - 3));
  std::vector<Subject> subjects;
  for (std::size_t i = 0; i < std::min(n, max_n); ++i) {
    Arm arm = Arm::TrialControl;
    if (i == 1) {
      arm = Arm::TrialExperimental;
    } else if (i > 1) {
      const double u = rng.uniform();
      arm = u < 0.4 ? Arm::TrialControl : (u < 0.8 ? Arm::TrialExperimental : Arm::ExternalControl);
    }
    const bool event = i < 2 || rng.uniform() < 0.7;
    const double weight = with_weights ? 0.2 + 1.8 * rng.uniform() : 1.0;
    subjects.push_back(subject(0.05 + 30.0 * rng.uniform(), event, arm, weight, 10.0 * rng.uniform()));
  }
  return SurvivalDataset(std::move(subjects));
}

// Weighted exponential log likelihood for (b0, b1) over the two groups of
// the trial-treatment contrast, summed subject by subject.
struct LikelihoodDerivatives {
  double value = 0.0;
  std::array<double, 2> gradient{};
  std::array<std::array<double, 2>, 2> hessian{};
};

inline LikelihoodDerivatives trial_log_likelihood(const SurvivalDataset& data, double b0, double b1) {
  LikelihoodDerivatives d;
  for (const Subject& s : data.subjects()) {
    if (s.arm == Arm::ExternalControl) continue;
    const double g = s.arm == Arm::TrialExperimental ? 1.0 : 0.0;
    const double eta = b0 + b1 * g;
    const double mu = s.weight * s.observed_time * std::exp(eta);
    const double dw = s.event ? s.weight : 0.0;
    d.value += dw * eta - mu;
    d.gradient[0] += dw - mu;
    d.gradient[1] += g * (dw - mu);
    d.hessian[0][0] -= mu;
    d.hessian[0][1] -= g * mu;
    d.hessian[1][1] -= g * mu;
  }
  d.hessian[1][0] = d.hessian[0][1];
  return d;
}

struct BruteForceFit {
  double b0 = 0.0;
  double b1 = 0.0;
  double se_b1 = 0.0;
  int iterations = 0;
};

// Damped Newton ascent from (0, 0); se from the inverse observed information.
inline BruteForceFit brute_force_trial_mle(const SurvivalDataset& data) {
  BruteForceFit f;
  for (f.iterations = 0; f.iterations < 500; ++f.iterations) {
    const auto d = trial_log_likelihood(data, f.b0, f.b1);
    const double det = d.hessian[0][0] * d.hessian[1][1] - d.hessian[0][1] * d.hessian[1][0];
    const double step0 = -(d.hessian[1][1] * d.gradient[0] - d.hessian[0][1] * d.gradient[1]) / det;
    const double step1 = -(-d.hessian[1][0] * d.gradient[0] + d.hessian[0][0] * d.gradient[1]) / det;
    double t = 1.0;
    while (t > 1e-8 && !(trial_log_likelihood(data, f.b0 + t * step0, f.b1 + t * step1).value >= d.value - 1e-12)) {
      t *= 0.5;
    }
    f.b0 += t * step0;
    f.b1 += t * step1;
    if (std::abs(step0) + std::abs(step1) < 1e-14) break;
  }
  const auto d = trial_log_likelihood(data, f.b0, f.b1);
  const double det = d.hessian[0][0] * d.hessian[1][1] - d.hessian[0][1] * d.hessian[1][0];
  f.se_b1 = std::sqrt(-d.hessian[0][0] / det);
  return f;
}

// Batch-means Monte Carlo standard error of the mean of `x`, which holds
// `n_chains` equal-length chains back to back.
inline double batch_means_se(const std::vector<double>& x, std::size_t n_chains, std::size_t batches_per_chain = 20) {
  const std::size_t per_chain = x.size() / n_chains;
  const std::size_t len = per_chain / batches_per_chain;
  std::vector<double> means;
  for (std::size_t c = 0; c < n_chains; ++c) {
    for (std::size_t b = 0; b < batches_per_chain; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < len; ++i) s += x[c * per_chain + b * len + i];
      means.push_back(s / static_cast<double>(len));
    }
  }
  double m = 0.0;
  for (double v : means) m += v;
  m /= static_cast<double>(means.size());
  double ss = 0.0;
  for (double v : means) ss += (v - m) * (v - m);
  const double var_batch = ss / static_cast<double>(means.size() - 1);
  return std::sqrt(var_batch / static_cast<double>(means.size()));
}

inline double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

}  // namespace hybridsim::testing
