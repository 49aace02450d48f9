#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "hybridsim/datagen.hpp"
#include "hybridsim/errors.hpp"
#include "hybridsim/random.hpp"
#include "support.hpp"

using namespace hybridsim;
using hybridsim::testing::subject;

TEST_CASE("seed derivation") {
  CHECK(derive_seed(1, {0, 0, 0}) == derive_seed(1, {0, 0, 0}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 4; ++i) {
    for (std::uint64_t j = 0; j < 16; ++j) {
      for (std::uint64_t k = 0; k < 50; ++k) seen.insert(derive_seed(20211, {i, j, k, 1}));
    }
  }
  CHECK(seen.size() == 4 * 16 * 50);
  CHECK(derive_seed(1, {1, 2}) != derive_seed(1, {2, 1}));
  CHECK(derive_seed(1, {1}) != derive_seed(2, {1}));
}

TEST_CASE("rng transforms") {
  Rng rng(42);
  double sum = 0.0;
  double sum_exp = 0.0;
  double sum_norm = 0.0;
  double sum_norm2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK_FALSE((u < 0.0 || u >= 1.0));
    sum += u;
    sum_exp += rng.exponential(2.0);
    const double z = rng.normal();
    sum_norm += z;
    sum_norm2 += z * z;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(sum_exp / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sum_norm / n) < 0.01);
  CHECK(sum_norm2 / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(std::isinf(rng.exponential(0.0)));

  Rng a(7);
  Rng b(7);
  for (int i = 0; i < 100; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("hybrid design derivation") {
  DesignInputs in;
  const TrialDesign d = derive_hybrid_design(in);
  CHECK(d.n_control_hybrid == 225);
  CHECK(d.n_external == 375);
  CHECK(d.rate_experimental == doctest::Approx(22.6667).epsilon(1e-5));
  CHECK(d.rate_control == doctest::Approx(11.3333).epsilon(1e-5));
  CHECK(d.enrollment_months == doctest::Approx(19.853).epsilon(1e-4));
  CHECK(d.rate_external == doctest::Approx(18.889).epsilon(1e-4));

  DesignInputs balanced;
  balanced.randomization_ratio = 1.0;
  balanced.expected_downweight = 1.0;
  const TrialDesign b = derive_hybrid_design(balanced);
  CHECK(b.n_control_hybrid == 450);
  CHECK(b.n_external == 0);
  CHECK(b.rate_experimental == doctest::Approx(17.0));
  CHECK(b.rate_control == doctest::Approx(17.0));
  CHECK(generate_accrual(b).external.empty());

  DesignInputs over;
  over.randomization_ratio = 0.5;
  CHECK_THROWS_AS(derive_hybrid_design(over), InfeasibleDesignError);
  DesignInputs bad;
  bad.p_lost = 1.0;
  CHECK_THROWS_AS(derive_hybrid_design(bad), DomainError);
}

TEST_CASE("linear accrual") {
  TrialDesign d;
  d.n_experimental = 3;
  d.rate_experimental = 22.667;
  d.n_control_hybrid = 1;
  d.rate_control = 1.0;
  const AccrualSchedule s = generate_accrual(d);
  REQUIRE(s.experimental.size() == 3);
  CHECK(s.experimental[0] == doctest::Approx(0.04412).epsilon(1e-4));
  CHECK(s.experimental[1] == doctest::Approx(0.08824).epsilon(1e-4));
  CHECK(s.experimental[2] == doctest::Approx(0.13235).epsilon(1e-4));

  const TrialDesign full = derive_hybrid_design(DesignInputs{});
  const AccrualSchedule f = generate_accrual(full);
  CHECK(f.experimental.back() == doctest::Approx(full.enrollment_months));
  CHECK(f.control.back() == doctest::Approx(full.enrollment_months).epsilon(1e-3));
  CHECK(f.external.back() == doctest::Approx(full.enrollment_months));
}

TEST_CASE("outcome simulation: event fraction, arm hazards and determinism") {
  DesignInputs in;
  in.hr_experimental = 1.0;
  in.hr_external = 2.0;
  const TrialDesign d = derive_hybrid_design(in);
  std::size_t events = 0;
  std::size_t total = 0;
  std::vector<double> control_times;
  std::vector<double> external_times;
  for (std::uint64_t rep = 0; rep < 40; ++rep) {
    Rng rng(derive_seed(5, {rep}));
    const SurvivalDataset data = simulate_outcomes(d, in, rng);
    CHECK(data.size() == 450 + 225 + 375);
    for (const Subject& s : data.subjects()) {
      events += s.event;
      ++total;
      // min(T, C) is exponential with rate lambda / (1 - p_lost)
      if (s.arm == Arm::TrialControl) control_times.push_back(s.observed_time);
      if (s.arm == Arm::ExternalControl) external_times.push_back(s.observed_time);
    }
  }
  const double fraction = static_cast<double>(events) / static_cast<double>(total);
  CHECK(std::abs(fraction - 0.95) < 4.0 * std::sqrt(0.95 * 0.05 / static_cast<double>(total)));

  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  // observed-time medians scale with (1 - p_lost): 16.12 * 0.95 vs 8.06 * 0.95
  CHECK(median(control_times) == doctest::Approx(std::log(2.0) / 0.043 * 0.95).epsilon(0.05));
  CHECK(median(external_times) == doctest::Approx(std::log(2.0) / 0.086 * 0.95).epsilon(0.05));

  Rng a(derive_seed(9, {1}));
  Rng b(derive_seed(9, {1}));
  CHECK(simulate_outcomes(d, in, a).digest() == simulate_outcomes(d, in, b).digest());
}

TEST_CASE("administrative censoring examples") {
  SUBCASE("trial events at calendar times 5 and 9") {
    std::vector<Subject> s{subject(4.0, true, Arm::TrialControl, 1.0, 1.0),
                           subject(6.0, true, Arm::TrialExperimental, 1.0, 3.0)};
    const CensoringOutcome out = apply_administrative_censoring(SurvivalDataset(s), 1.0, 0.6);
    CHECK(out.cutoff_time == doctest::Approx(5.0));
    REQUIRE(out.data.size() == 2);
    CHECK(out.data.subjects()[0].event);
    CHECK_FALSE(out.data.subjects()[1].event);
    CHECK(out.data.subjects()[1].observed_time == doctest::Approx(2.0));
  }
  SUBCASE("external events reach the target at the second event") {
    std::vector<Subject> s{subject(1.0, true, Arm::ExternalControl, 1.0, 0.0),
                           subject(2.0, true, Arm::ExternalControl, 1.0, 0.0),
                           subject(3.0, true, Arm::ExternalControl, 1.0, 0.0)};
    const CensoringOutcome out = apply_administrative_censoring(SurvivalDataset(s), 1.0, 0.6);
    CHECK(out.cutoff_time == doctest::Approx(2.0));
    CHECK(weighted_event_count(out.data, 0.6) == doctest::Approx(1.2));
  }
  SUBCASE("unreachable target returns the data unchanged") {
    std::vector<Subject> s;
    for (int i = 0; i < 10; ++i) s.push_back(subject(1.0 + i, true));
    const SurvivalDataset data(s);
    const CensoringOutcome out = apply_administrative_censoring(data, 655.0, 0.6);
    CHECK(out.under_target);
    CHECK(out.data.digest() == data.digest());
  }
  SUBCASE("subjects accrued after the cutoff are dropped") {
    std::vector<Subject> s{subject(1.0, true, Arm::TrialControl, 1.0, 0.0),
                           subject(1.0, true, Arm::TrialControl, 1.0, 5.0)};
    const CensoringOutcome out = apply_administrative_censoring(SurvivalDataset(s), 1.0, 0.6);
    CHECK(out.dropped == 1);
    CHECK(out.data.size() == 1);
  }
}

TEST_CASE("property: censored data is consistent with the cutoff") {
  DesignInputs in;
  const TrialDesign d = derive_hybrid_design(in);
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    Rng rng(derive_seed(17, {rep}));
    const SurvivalDataset raw = simulate_outcomes(d, in, rng);
    const CensoringOutcome out = apply_administrative_censoring(raw, in.target_events, in.expected_downweight);
    REQUIRE_FALSE(out.under_target);
    const double weighted = weighted_event_count(out.data, in.expected_downweight);
    CHECK(weighted >= in.target_events - 1e-9);
    CHECK(weighted < in.target_events + 1.0);
    CHECK(out.data.size() + out.dropped == raw.size());
    for (const Subject& s : out.data.subjects()) {
      CHECK(s.observed_time >= 0.0);
      CHECK(s.calendar_time() <= out.cutoff_time + 1e-9);
    }
  }
}
