#pragma once

// Scenario grid execution and tuning-parameter calibration.
//
// Replicate k of grid cell (i, j) draws its data from the stream
// derive_seed(master_seed, {i, j, k, DataGeneration}) and the sampler of a
// Bayesian method from derive_seed(master_seed, {i, j, k, <method tag>}),
// where i and j index the hr_exp and hr_rwd grids. Every configured method
// analyses the same generated dataset. Results are written into
// preallocated slots and reduced in grid order, so output is identical for
// any worker count.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hybridsim/borrowing.hpp"
#include "hybridsim/datagen.hpp"
#include "hybridsim/mcmc.hpp"
#include "hybridsim/metrics.hpp"

namespace hybridsim {

struct ScenarioConfig {
  DesignInputs design;
  TuningParameters tuning;
  std::vector<Method> methods{kAllMethods.begin(), kAllMethods.end()};
  std::size_t n_replicates = 1000;
  std::uint64_t master_seed = 20211;
  double alpha = 0.025;
  SamplerConfig sampler;
  std::vector<double> hr_exp_grid{0.70, 0.78, 0.85, 1.00};
  std::vector<double> hr_rwd_grid{0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0};

  // Throws DomainError (or InfeasibleDesignError) before any work starts.
  void validate() const;
};

struct Cell {
  std::size_t hr_exp_index = 0;
  std::size_t hr_rwd_index = 0;
  double hr_exp = 1.0;
  double hr_rwd = 1.0;
};

std::vector<Cell> grid_cells(const ScenarioConfig& config);

struct ReplicateRecord {
  std::uint64_t dataset_digest = 0;
  bool under_target = false;
  double cutoff_time = 0.0;
  std::size_t n_subjects_generated = 0;
  std::size_t raw_events = 0;        // before administrative censoring
  double weighted_events = 0.0;      // after, external at the design weight
  std::size_t dropped = 0;
  std::size_t trial_events = 0;
  std::size_t external_events = 0;
  std::vector<MethodOutcome> outcomes;  // config.methods order

  double raw_event_fraction() const {
    return n_subjects_generated ? static_cast<double>(raw_events) / static_cast<double>(n_subjects_generated) : 0.0;
  }
};

struct SimulatedReplicate {
  SurvivalDataset data;  // after administrative censoring
  ReplicateRecord record;
};

// Generates one replicate's dataset for `cell`, without analysing it.
SimulatedReplicate simulate_replicate(const ScenarioConfig& config, const Cell& cell, std::size_t replicate);

// Generates and analyses one replicate with every configured method.
ReplicateRecord run_replicate(const ScenarioConfig& config, const Cell& cell, std::size_t replicate);

struct OCRow {
  double hr_exp = 1.0;
  double hr_rwd = 1.0;
  Method method = Method::NoBorrow;
  double tuning_value = 0.0;  // NaN for no_borrow
  OperatingCharacteristics oc;
  std::size_t under_target = 0;
};

struct OCGrid {
  std::vector<OCRow> rows;  // grid order, then method order

  const OCRow* find(double hr_exp, double hr_rwd, Method method) const;
  std::size_t total_excluded() const;
};

struct RunOptions {
  std::size_t threads = 0;     // 0: default_thread_count()
  bool keep_records = false;
};

struct GridRun {
  OCGrid grid;
  std::vector<Cell> cells;
  std::vector<std::vector<ReplicateRecord>> records;  // per cell, when kept
};

// HYBRIDSIM_THREADS if set and positive, else hardware concurrency.
std::size_t default_thread_count();

// Calls fn(i) for i in [0, n) on up to `threads` workers. The first
// exception thrown by any task is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

GridRun run_cells(const ScenarioConfig& config, const std::vector<Cell>& cells, const RunOptions& options = {});
OCGrid run_grid(const ScenarioConfig& config, std::size_t threads = 0);

struct CalibrationRequest {
  Method method = Method::TwoStep;
  std::vector<double> values;
  double target_power = 0.88;
  double power_hr_exp = 0.78;
  double power_hr_rwd = 1.0;
  std::vector<double> type1_hr_rwd{1.0, 1.1, 1.2, 1.3, 1.5, 2.0};  // at hr_exp = 1
};

struct CalibrationRow {
  double value = 0.0;
  double power = 0.0;
  double power_mc_se = 0.0;
  double max_type1 = 0.0;
  double max_type1_hr_rwd = 0.0;
  std::vector<double> type1;  // per request.type1_hr_rwd
  bool meets_target = false;
  std::size_t n_excluded = 0;
};

struct CalibrationReport {
  Method method = Method::TwoStep;
  std::vector<CalibrationRow> rows;
  std::size_t selected = 0;
  bool feasible = false;
  std::string rationale;

  double selected_value() const { return rows.at(selected).value; }
};

// For each candidate, power at the power scenario and the maximum type I
// error over the type I scenarios, all on shared datasets. Selects the
// candidate with the smallest maximum type I error among those reaching the
// target power (ties: higher power, then earlier in the grid). When none
// reaches it, returns the highest-power candidate with feasible = false.
CalibrationReport calibrate_tuning(const ScenarioConfig& config, const CalibrationRequest& request,
                                   std::size_t threads = 0);

// "start:stop:step" (inclusive of stop within 1e-9 step) or "v1,v2,...".
std::vector<double> parse_grid_spec(const std::string& spec);

}  // namespace hybridsim
