// Acceptance run: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (0 when all pass).
//
//   acceptance            paper scale (1000 replicates, 4 x 10000 iterations)
//   acceptance --desk     desk scale for criterion 1 (500 replicates,
//                         4 x 5000 iterations, tolerance 0.04)

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "hybridsim/borrowing.hpp"
#include "hybridsim/config.hpp"
#include "hybridsim/planner.hpp"
#include "hybridsim/report.hpp"
#include "hybridsim/runner.hpp"
#include "support.hpp"

using namespace hybridsim;

namespace {

struct Outcome {
  bool pass = true;
  std::vector<std::string> notes;

  void check(bool ok, const std::string& what) {
    notes.push_back(std::string(ok ? "ok   " : "FAIL ") + what);
    pass = pass && ok;
  }
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string fmt(const char* f, double a, double b) {
  char buf[160];
  std::snprintf(buf, sizeof buf, f, a, b);
  return buf;
}

std::string fmt(const char* f, double a, double b, double c) {
  char buf[200];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

int report(int id, const char* title, const Outcome& o, double seconds) {
  for (const std::string& n : o.notes) std::printf("    %s\n", n.c_str());
  std::printf("%s criterion %d: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, title, seconds);
  std::fflush(stdout);
  return o.pass ? 0 : 1;
}

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

const std::vector<double> kPaperExp{0.70, 0.78, 0.85, 1.00};
const std::vector<double> kPaperRwd{0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0};

// Cell with the indices it has in the paper-preset grid, so results here
// coincide with the matching rows of a full `simulate --preset paper` run.
Cell paper_cell(double hr_exp, double hr_rwd) {
  auto index = [](const std::vector<double>& grid, double v) {
    return static_cast<std::size_t>(
        std::find_if(grid.begin(), grid.end(), [&](double g) { return std::abs(g - v) < 1e-9; }) - grid.begin());
  };
  return {index(kPaperExp, hr_exp), index(kPaperRwd, hr_rwd), hr_exp, hr_rwd};
}

const OCRow& row_of(const OCGrid& g, double hr_exp, double hr_rwd, Method m) {
  const OCRow* r = g.find(hr_exp, hr_rwd, m);
  if (!r) throw std::runtime_error("missing grid row");
  return *r;
}

// ---------------------------------------------------------------------------

struct PaperRuns {
  ScenarioConfig config;
  GridRun main;    // 0.78 x 1.0 and 1.0 x {1.0, ..., 2.0}, all methods
  GridRun taper;   // 0.78 x {0.6, 1.8}, two-step and power prior
};

PaperRuns run_paper_scenarios(std::size_t threads) {
  PaperRuns p;
  RunConfig rc = default_config();
  apply_preset(rc, Preset::Paper);
  p.config = rc.scenario;
  std::vector<Cell> cells{paper_cell(0.78, 1.0)};
  for (double h : {1.0, 1.1, 1.2, 1.3, 1.5, 2.0}) cells.push_back(paper_cell(1.0, h));
  RunOptions keep;
  keep.threads = threads;
  keep.keep_records = true;
  p.main = run_cells(p.config, cells, keep);

  ScenarioConfig taper = p.config;
  taper.methods = {Method::TwoStep, Method::PowerPrior};
  p.taper = run_cells(taper, {paper_cell(0.78, 0.6), paper_cell(0.78, 1.8)}, keep);
  return p;
}

Outcome criterion_power(const OCGrid& g, double tolerance) {
  Outcome o;
  const std::map<Method, double> target{{Method::Commensurate, 0.885},
                                        {Method::TestThenPool, 0.886},
                                        {Method::TwoStep, 0.885},
                                        {Method::PowerPrior, 0.902},
                                        {Method::NoBorrow, 0.741}};
  for (const auto& [m, t] : target) {
    const OCRow& r = row_of(g, 0.78, 1.0, m);
    o.check(std::abs(r.oc.rejection_rate - t) <= tolerance,
            std::string(method_name(m)) + fmt(": power %.4f (MC SE %.4f) vs %.3f", r.oc.rejection_rate,
                                              r.oc.rejection_mc_se, t) +
                fmt(" +/- %.3f", tolerance));
  }
  return o;
}

// Normal-approximation power implied by the simulated event counts, for
// no borrowing and for the power prior at its configured a. Printed only.
void print_expected_power(const ScenarioConfig& config) {
  const boost::math::normal z;
  const double crit = quantile(z, 1.0 - config.alpha);
  const double a = config.tuning.power_a;
  double no_borrow = 0.0;
  double power_prior = 0.0;
  const Cell cell = paper_cell(0.78, 1.0);
  for (std::size_t k = 0; k < config.n_replicates; ++k) {
    const auto st = simulate_replicate(config, cell, k).data.stats_by_arm();
    const double de = static_cast<double>(st[arm_index(Arm::TrialExperimental)].events);
    const double dc = static_cast<double>(st[arm_index(Arm::TrialControl)].events);
    const double dx = static_cast<double>(st[arm_index(Arm::ExternalControl)].events);
    const double effect = -std::log(cell.hr_exp);
    no_borrow += cdf(z, effect / std::sqrt(1.0 / de + 1.0 / dc) - crit);
    power_prior += cdf(z, effect / std::sqrt(1.0 / de + 1.0 / (dc + a * dx)) - crit);
  }
  const double n = static_cast<double>(config.n_replicates);
  std::printf("    info normal-approximation power from simulated event counts: no_borrow %.4f, power_prior %.4f\n",
              no_borrow / n, power_prior / n);
}

Outcome criterion_type1(const OCGrid& g) {
  Outcome o;
  const std::vector<double> rwd{1.0, 1.1, 1.2, 1.3, 1.5, 2.0};
  const std::map<Method, double> target{{Method::TestThenPool, 0.13}, {Method::Commensurate, 0.12},
                                        {Method::TwoStep, 0.097}};
  for (const auto& [m, t] : target) {
    double max_rate = -1.0;
    double argmax = 0.0;
    std::string series;
    for (double h : rwd) {
      const double rate = row_of(g, 1.0, h, m).oc.rejection_rate;
      series += fmt(" %.3f", rate);
      if (rate > max_rate) {
        max_rate = rate;
        argmax = h;
      }
    }
    const double at_two = row_of(g, 1.0, 2.0, m).oc.rejection_rate;
    o.check(std::abs(max_rate - t) <= 0.03,
            std::string(method_name(m)) + fmt(": max type I %.4f at hr_rwd %.1f vs %.3f +/- 0.03", max_rate, argmax, t) +
                " [" + series + " ]");
    o.check(at_two < max_rate, std::string(method_name(m)) + fmt(": taper, %.4f at hr_rwd 2.0 < %.4f", at_two, max_rate));
  }
  return o;
}

Outcome criterion_static_power_prior(const OCGrid& g) {
  Outcome o;
  const OCRow& pp = row_of(g, 1.0, 2.0, Method::PowerPrior);
  o.check(pp.oc.rejection_rate > 0.15, fmt("power_prior type I at hr_rwd 2.0: %.4f > 0.15", pp.oc.rejection_rate));
  for (Method m : {Method::TestThenPool, Method::TwoStep, Method::Commensurate}) {
    const OCRow& d = row_of(g, 1.0, 2.0, m);
    const double se = std::hypot(pp.oc.rejection_mc_se, d.oc.rejection_mc_se);
    const double gap = pp.oc.rejection_rate - d.oc.rejection_rate;
    o.check(gap >= 3.0 * se, std::string("vs ") + std::string(method_name(m)) +
                                 fmt(": gap %.4f >= 3 x %.4f (dynamic rate %.4f)", gap, se, d.oc.rejection_rate));
  }
  return o;
}

Outcome criterion_effective_events(const PaperRuns& p) {
  Outcome o;
  const OCRow& center = row_of(p.main.grid, 0.78, 1.0, Method::TwoStep);
  for (double h : {0.6, 1.8}) {
    const OCRow& side = row_of(p.taper.grid, 0.78, h, Method::TwoStep);
    const double se = std::hypot(center.oc.mean_effective_events_mc_se(), side.oc.mean_effective_events_mc_se());
    const double gap = center.oc.mean_effective_events - side.oc.mean_effective_events;
    o.check(gap >= 3.0 * se, fmt("two_step eff. events %.2f at 1.0 vs %.2f", center.oc.mean_effective_events,
                                 side.oc.mean_effective_events) +
                                 fmt(" at %.1f: gap %.2f", h, gap) + fmt(" >= 3 x %.3f", se));
  }
  std::size_t checked = 0;
  std::size_t mismatched = 0;
  auto audit = [&](const GridRun& run, const std::vector<Method>& methods) {
    const auto pos = std::find(methods.begin(), methods.end(), Method::PowerPrior) - methods.begin();
    for (const auto& cell : run.records) {
      for (const ReplicateRecord& r : cell) {
        const MethodOutcome& out = r.outcomes[static_cast<std::size_t>(pos)];
        if (!out.result) continue;
        ++checked;
        if (out.result->effective_events != 0.6 * static_cast<double>(r.external_events)) ++mismatched;
      }
    }
  };
  audit(p.main, p.config.methods);
  audit(p.taper, {Method::TwoStep, Method::PowerPrior});
  o.check(mismatched == 0 && checked > 0,
          fmt("power_prior eff. events == 0.6 x external events on %.0f of %.0f replicates",
              static_cast<double>(checked - mismatched), static_cast<double>(checked)));
  return o;
}

Outcome criterion_planner() {
  Outcome o;
  const RunConfig rc = default_config();
  const double start = now_seconds();
  const PlannerOutputs hybrid = plan_design(rc.plan.hybrid);
  const PlannerOutputs original = plan_design(rc.plan.original);
  const BenefitReport b = summarize_benefits(original, hybrid);
  const double elapsed = now_seconds() - start;
  o.check(std::abs(hybrid.final_ratio - 2.0) <= 0.05, fmt("hybrid ratio %.4f vs 2 +/- 0.05", hybrid.final_ratio));
  o.check(std::abs(hybrid.enrollment_months - 19.9) <= 0.5,
          fmt("hybrid enrollment %.3f vs 19.9 +/- 0.5", hybrid.enrollment_months));
  o.check(std::abs(hybrid.cutoff_months - 49.0) <= 1.0, fmt("hybrid cutoff %.3f vs 49 +/- 1", hybrid.cutoff_months));
  o.check(b.randomized_patients_saved == 225,
          fmt("randomized patients saved %.0f vs 225", static_cast<double>(b.randomized_patients_saved)));
  o.check(std::abs(original.enrollment_months - 26.5) <= 0.5,
          fmt("original enrollment %.3f vs 26.5 +/- 0.5", original.enrollment_months));
  o.check(std::abs(original.cutoff_months - 53.0) <= 1.0, fmt("original cutoff %.3f vs 53 +/- 1", original.cutoff_months));
  const ExpectedEvents& e = hybrid.events_at_cutoff;
  o.check(std::abs(e.experimental - 310.0) <= 5.0, fmt("experimental events %.2f vs 310 +/- 5", e.experimental));
  o.check(std::abs(e.trial_control + e.external - 345.0) <= 5.0,
          fmt("control events %.2f vs 345 +/- 5", e.trial_control + e.external));
  o.check(std::abs(e.trial_control - 173.0) <= 5.0, fmt("trial-control events %.2f vs 173 +/- 5", e.trial_control));
  o.check(std::abs(e.external - 172.0) <= 5.0, fmt("external events %.2f vs 172 +/- 5", e.external));
  o.check(elapsed < 1.0, fmt("planner runtime %.4f s < 1 s", elapsed));
  return o;
}

Outcome criterion_oracles() {
  Outcome o;
  {  // (a)
    Rng rng(derive_seed(2024, {1}));
    double worst = 0.0;
    for (int rep = 0; rep < 200; ++rep) {
      const SurvivalDataset d = hybridsim::testing::random_dataset(rng, 20);
      const ExpFit f = fit_weighted_exponential(d, Contrast::trial_treatment());
      const auto brute = hybridsim::testing::brute_force_trial_mle(d);
      worst = std::max({worst, std::abs(f.log_baseline_hazard - brute.b0), std::abs(f.log_hazard_ratio - brute.b1),
                        std::abs(f.se_log_hr - brute.se_b1)});
    }
    o.check(worst < 1e-8, fmt("(a) MLE vs Newton maximizer, 200 datasets, max abs diff %.2e < 1e-8", worst));
  }
  {  // (b)
    Rng rng(derive_seed(2024, {2}));
    int failures = 0;
    double worst_z = 0.0;
    for (std::uint64_t k = 0; k < 20; ++k) {
      const double d = 2.0 + std::floor(60.0 * rng.uniform());
      const double exposure = 5.0 + 500.0 * rng.uniform();
      const LogDensity lp = [=](std::span<const double> x) { return d * x[0] - exposure * std::exp(x[0]); };
      const std::vector<double> init{std::log(d / exposure) + 0.2 * rng.normal()};
      const std::vector<double> scale{2.4 / std::sqrt(d)};
      SamplerConfig sc;
      sc.seed = derive_seed(2024, {2, k});
      const SampleResult r = sample(lp, init, sc, scale);
      std::vector<double> x = r.draws.param(0);
      for (double& v : x) v = std::exp(v);
      const double mean = hybridsim::testing::mean_of(x);
      std::vector<double> sq;
      for (double v : x) sq.push_back((v - mean) * (v - mean));
      const double var = hybridsim::testing::mean_of(sq);
      const double z_mean =
          std::abs(mean - d / exposure) / hybridsim::testing::batch_means_se(x, r.draws.n_chains());
      const double z_var = std::abs(var - d / (exposure * exposure)) /
                           hybridsim::testing::batch_means_se(sq, r.draws.n_chains());
      worst_z = std::max({worst_z, z_mean, z_var});
      failures += (z_mean > 3.0) + (z_var > 3.0);
    }
    o.check(failures == 0, fmt("(b) Gamma(d, exposure) rate mean/variance, 20 cases, worst |z| %.2f <= 3", worst_z));
  }
  {  // (c)
    const auto g0 = hybridsim::testing::group({{1.0, true}});
    const auto g1 = hybridsim::testing::group({{2.0, true}});
    const LogrankResult r = logrank_test(g0, g1);
    o.check(std::abs(r.statistic - 1.0) < 1e-6 && std::abs(r.p_value - 0.31731) < 1e-5,
            fmt("(c) log-rank statistic %.8f, p %.8f", r.statistic, r.p_value));
  }
  {  // (d)
    bool ok = two_step_weight(0.0, 8.25) == 1.0;
    double prev = 1.0;
    for (int i = 1; i <= 1000; ++i) {
      const double hr = 1.0 + 0.005 * i;
      const double w = two_step_weight(std::log(hr), 8.25);
      const double inverse = two_step_weight(std::log(1.0 / hr), 8.25);
      ok = ok && std::abs(w - inverse) <= 1e-12 * w && w == two_step_weight(-std::log(hr), 8.25) && w < prev;
      prev = w;
    }
    o.check(ok, "(d) w(1) = 1, w(HR) = w(1/HR), strictly decreasing in |log HR|");
  }
  {  // (e)
    ScenarioConfig c;
    c.master_seed = 2024;
    const SurvivalDataset d = simulate_replicate(c, {0, 0, 0.78, 1.3}, 0).data;
    const auto st = d.stats_by_arm();
    const ArmStats& tc = st[arm_index(Arm::TrialControl)];
    const ArmStats& te = st[arm_index(Arm::TrialExperimental)];
    const ArmStats& tx = st[arm_index(Arm::ExternalControl)];
    bool ok = true;
    std::string detail;
    for (double a : {0.0, 1.0}) {
      SamplerConfig sc;
      sc.seed = derive_seed(2024, {5, static_cast<std::uint64_t>(a)});
      const SampleResult r = sample_power_prior(st, a, sc);
      const std::vector<double> x = r.draws.param(kLogHrIndexPowerPrior);
      const double mean = hybridsim::testing::mean_of(x);
      const double se = hybridsim::testing::batch_means_se(x, r.draws.n_chains());
      // Trial-only (a = 0) or pooled (a = 1) flat-prior posterior of log HR.
      const double d0 = tc.weighted_events + a * tx.weighted_events;
      const double y0 = tc.weighted_exposure + a * tx.weighted_exposure;
      const double exact = boost::math::digamma(te.weighted_events) - std::log(te.weighted_exposure) -
                           boost::math::digamma(d0) + std::log(y0);
      const ExpFit fit = fit_weighted_exponential(d, a == 0.0 ? Contrast::trial_treatment() : Contrast::treatment(1.0));
      ok = ok && std::abs(mean - exact) < 4.0 * se && std::abs(mean - fit.log_hazard_ratio) < 0.01;
      detail += fmt(" a=%.0f: mean %.5f exact %.5f", a, mean, exact) + fmt(" MLE %.5f;", fit.log_hazard_ratio);
    }
    o.check(ok, "(e) power prior limits:" + detail);
  }
  {  // (f)
    ScenarioConfig c;
    c.hr_exp_grid = {0.78, 1.0};
    c.hr_rwd_grid = {1.0, 1.8};
    c.n_replicates = 12;
    c.sampler.n_iter = 1000;
    c.sampler.n_burnin = 500;
    const std::string one = oc_grid_csv(run_grid(c, 1));
    const std::string four = oc_grid_csv(run_grid(c, 4));
    const std::string eight = oc_grid_csv(run_grid(c, 8));
    o.check(one == four && one == eight, fmt("(f) identical CSV bytes for 1, 4, 8 threads (%.0f bytes)",
                                             static_cast<double>(one.size())));
  }
  return o;
}

Outcome criterion_boundary(const PaperRuns& p) {
  Outcome o;
  const OCRow& nb = row_of(p.main.grid, 1.0, 1.0, Method::NoBorrow);
  o.check(std::abs(nb.oc.rejection_rate - 0.025) <= 0.012,
          fmt("no_borrow rejection at (1, 1): %.4f vs 0.025 +/- 0.012", nb.oc.rejection_rate));

  // DGP audit on the first 200 replicates of every simulated cell.
  const DesignInputs design = p.config.design;
  std::size_t audited = 0;
  std::size_t bad_fraction = 0;
  std::size_t bad_count = 0;
  double min_fraction = 1.0;
  double max_fraction = 0.0;
  double max_excess = 0.0;
  auto audit = [&](const GridRun& run) {
    for (const auto& cell : run.records) {
      for (std::size_t k = 0; k < std::min<std::size_t>(200, cell.size()); ++k) {
        const ReplicateRecord& r = cell[k];
        ++audited;
        const double f = r.raw_event_fraction();
        min_fraction = std::min(min_fraction, f);
        max_fraction = std::max(max_fraction, f);
        if (std::abs(f - (1.0 - design.p_lost)) > 0.03) ++bad_fraction;
        const double excess = r.weighted_events - design.target_events;
        max_excess = std::max(max_excess, excess);
        if (r.under_target || excess < -1e-9 || excess >= 1.0) ++bad_count;
      }
    }
  };
  audit(p.main);
  audit(p.taper);
  o.check(bad_fraction == 0, fmt("pre-cutoff event fraction in [%.4f, %.4f] on %.0f replicates (0.95 +/- 0.03)",
                                 min_fraction, max_fraction, static_cast<double>(audited)));
  o.check(bad_count == 0, fmt("weighted events in [d_target, d_target + 1): max excess %.3f, %.0f violations",
                              max_excess, static_cast<double>(bad_count)));
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  bool desk = false;
  std::size_t threads = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--desk") == 0) desk = true;
    if (std::strcmp(argv[i], "--threads") == 0 && i + 1 < argc) threads = std::stoul(argv[++i]);
  }
  if (threads == 0) threads = default_thread_count();
  std::printf("acceptance run: %s scale, %zu threads\n", desk ? "desk" : "paper", threads);
  int failures = 0;

  double t = now_seconds();
  Outcome planner = criterion_planner();
  const double planner_s = now_seconds() - t;

  t = now_seconds();
  Outcome oracles = criterion_oracles();
  const double oracle_s = now_seconds() - t;

  t = now_seconds();
  const PaperRuns runs = run_paper_scenarios(threads);
  const double sim_s = now_seconds() - t;
  std::printf("simulated %zu + %zu scenario cells at 1000 replicates in %.1f s\n", runs.main.cells.size(),
              runs.taper.cells.size(), sim_s);

  if (desk) {
    RunConfig rc = default_config();
    apply_preset(rc, Preset::Desk);
    t = now_seconds();
    const GridRun run = run_cells(rc.scenario, {paper_cell(0.78, 1.0)}, RunOptions{threads, false});
    failures += report(1, "headline power, desk preset (500 reps, +/- 0.04)", criterion_power(run.grid, 0.04),
                       now_seconds() - t);
  } else {
    print_expected_power(runs.config);
    failures += report(1, "headline power at hr_exp 0.78, hr_rwd 1.0 (1000 reps, +/- 0.025)",
                       criterion_power(runs.main.grid, 0.025), sim_s);
  }
  failures += report(2, "type I caps at hr_exp 1.0 and taper at hr_rwd 2.0", criterion_type1(runs.main.grid), 0.0);
  failures += report(3, "static power prior type I inflation at hr_rwd 2.0",
                     criterion_static_power_prior(runs.main.grid), 0.0);
  failures += report(4, "effective events taper and power prior accounting", criterion_effective_events(runs), 0.0);
  failures += report(5, "planner reproduction", planner, planner_s);
  failures += report(6, "oracle suites (a)-(f)", oracles, oracle_s);
  failures += report(7, "boundary behaviour and DGP audit", criterion_boundary(runs), 0.0);
  std::printf("%d of 7 criteria failed\n", failures);
  return failures;
}
