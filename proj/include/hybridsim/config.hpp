#pragma once

// Run configuration: a JSON document with an explicit schema version.
// Every section is optional and falls back to the built-in defaults;
// unknown keys and ill-typed values are errors. The README lists the schema.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hybridsim/planner.hpp"
#include "hybridsim/runner.hpp"

namespace hybridsim {

inline constexpr int kConfigSchemaVersion = 1;

struct CalibrationSettings {
  double target_power = 0.88;
  double power_hr_exp = 0.78;
  double power_hr_rwd = 1.0;
  std::vector<double> type1_hr_rwd{1.0, 1.1, 1.2, 1.3, 1.5, 2.0};
};

struct PlanConfig {
  PlannerInputs original;
  PlannerInputs hybrid;
  double curve_step_months = 1.0;
  double curve_horizon_months = 60.0;
};

struct RunConfig {
  ScenarioConfig scenario;
  CalibrationSettings calibration;
  PlanConfig plan;
};

enum class Preset { Desk, Paper };

// Defaults: full grid, 1000 replicates, 4 x 10000 iterations (5000 burn-in),
// original plan without external data and hybrid plan at 11.3 effective
// external patients per month.
RunConfig default_config();

// desk: hr_exp {0.78, 1.0} x hr_rwd {0.6, 1.0, 1.1, 1.2, 1.3, 1.5, 1.8, 2.0},
//       500 replicates, 4 chains x 5000 iterations (2500 burn-in).
// paper: the full 4 x 16 grid, 1000 replicates, 4 x 10000 (5000 burn-in).
void apply_preset(RunConfig& config, Preset preset);
Preset parse_preset(const std::string& name);

// Overlays `doc` on `base`. Throws ConfigError naming the offending field.
RunConfig parse_config(const nlohmann::json& doc, RunConfig base);
RunConfig load_config(const std::filesystem::path& path, RunConfig base);

// Canonical JSON form of every field (used for digests and manifests).
nlohmann::json to_json(const RunConfig& config);

// FNV-1a 64 of the canonical JSON text.
std::uint64_t config_digest(const RunConfig& config);

}  // namespace hybridsim
