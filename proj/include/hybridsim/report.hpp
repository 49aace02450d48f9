#pragma once

// CSV and manifest writers. Numbers use 6 significant digits with a '.'
// decimal point regardless of locale; missing values print as NA.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybridsim/planner.hpp"
#include "hybridsim/runner.hpp"

namespace hybridsim {

inline constexpr const char* kArtifactVersion = "1.0.0";

std::string format_number(double value);
std::string format_digest(std::uint64_t digest);

// hr_exp, hr_rwd, method, tuning_value, n_reps, rejection_rate,
// rejection_mc_se, mse, bias, mean_eff_events, sd_eff_events, n_excluded
std::string oc_grid_csv(const OCGrid& grid);

// Long format: panel_hr_exp, x_hr_rwd, series_method, metric, value.
std::string oc_plot_csv(const OCGrid& grid);

std::string calibration_csv(const CalibrationReport& report, const std::vector<double>& type1_hr_rwd);

// One row per quantity: quantity, original, hybrid, difference.
std::string plan_report_csv(const PlannerOutputs& original, const PlannerOutputs& hybrid);

// t_months, e_events_experimental, e_events_trial_control, e_events_external
std::string event_curves_csv(const std::vector<EventCurveRow>& rows);

struct RunManifest {
  std::string command;
  std::uint64_t config_digest = 0;
  std::uint64_t master_seed = 0;
  std::string artifact_version = kArtifactVersion;
  double wall_clock_seconds = 0.0;
  std::vector<std::string> outputs;
  nlohmann::json config;
  nlohmann::json exclusions = nlohmann::json::object();
  nlohmann::json mc_standard_errors = nlohmann::json::array();
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
};

// Exclusion tallies and per-scenario MC standard errors for a grid.
void describe_grid(RunManifest& manifest, const OCGrid& grid);

// Writes through a temporary sibling file and renames it into place, so a
// reader never sees a partial file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace hybridsim
