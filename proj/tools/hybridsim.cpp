// hybridsim: batch front end for the hybrid-control simulator.
//
//   hybridsim simulate  [--config F] --out DIR [--preset desk|paper] [--seed N] [--reps N] [--threads N]
//   hybridsim calibrate [--config F] --out DIR --method M --grid SPEC [--target-power P] ...
//   hybridsim plan      [--config F] --out DIR
//
// Exit status: 0 ok, 2 config error, 3 infeasible design or target, 4 runtime failure.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hybridsim/config.hpp"
#include "hybridsim/errors.hpp"
#include "hybridsim/planner.hpp"
#include "hybridsim/report.hpp"
#include "hybridsim/runner.hpp"

namespace fs = std::filesystem;
using namespace hybridsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitRuntime = 4;

struct CommonOptions {
  std::string config_path;
  std::string out_dir;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<std::size_t> threads;
  std::vector<std::string> methods;
};

void add_run_options(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--preset", o.preset, "Run scale preset (desk or paper)");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--reps", o.reps, "Replicates per scenario");
  cmd->add_option("--threads", o.threads, "Worker threads (default: HYBRIDSIM_THREADS or all cores)");
}

// defaults < preset < config file < command-line flags
RunConfig resolve_config(const CommonOptions& o) {
  RunConfig config = default_config();
  if (!o.preset.empty()) apply_preset(config, parse_preset(o.preset));
  if (!o.config_path.empty()) config = load_config(o.config_path, std::move(config));
  if (o.seed) config.scenario.master_seed = *o.seed;
  if (o.reps) {
    if (*o.reps == 0) throw ConfigError("reps", "must be positive");
    config.scenario.n_replicates = *o.reps;
  }
  if (!o.methods.empty()) {
    std::vector<Method> methods;
    for (const std::string& name : o.methods) {
      const auto m = parse_method(name);
      if (!m) throw ConfigError("method", "unknown method '" + name + "'");
      methods.push_back(*m);
    }
    config.scenario.methods = methods;
  }
  return config;
}

// Range errors in a resolved config are configuration errors, except a design
// that is well-formed but has no feasible arm sizes.
void validate_scenario(const ScenarioConfig& scenario) {
  try {
    scenario.validate();
  } catch (const InfeasibleDesignError&) {
    throw;
  } catch (const DomainError& e) {
    throw ConfigError("simulation", e.what());
  }
}

std::size_t thread_count(const CommonOptions& o) {
  if (o.threads) {
    if (*o.threads == 0) throw ConfigError("threads", "must be positive");
    return *o.threads;
  }
  return default_thread_count();
}

fs::path prepare_out_dir(const std::string& dir) {
  if (dir.empty()) throw ConfigError("out", "an output directory is required");
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

RunManifest start_manifest(const char* command, const RunConfig& config) {
  RunManifest m;
  m.command = command;
  m.config_digest = config_digest(config);
  m.master_seed = config.scenario.master_seed;
  m.config = to_json(config);
  return m;
}

int cmd_simulate(const CommonOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig config = resolve_config(o);
  validate_scenario(config.scenario);
  const std::size_t threads = thread_count(o);
  const fs::path out = prepare_out_dir(o.out_dir);

  const std::size_t n_cells = config.scenario.hr_exp_grid.size() * config.scenario.hr_rwd_grid.size();
  std::cerr << "simulate: " << n_cells << " scenarios x " << config.scenario.n_replicates << " replicates, "
            << config.scenario.methods.size() << " methods, " << threads << " threads\n";
  const OCGrid grid = run_grid(config.scenario, threads);

  RunManifest manifest = start_manifest("simulate", config);
  describe_grid(manifest, grid);
  manifest.outputs = {"oc_grid.csv", "oc_plot.csv"};
  manifest.wall_clock_seconds = seconds_since(start);
  write_file_atomic(out / "oc_grid.csv", oc_grid_csv(grid));
  write_file_atomic(out / "oc_plot.csv", oc_plot_csv(grid));
  write_file_atomic(out / "manifest.json", manifest.to_json().dump(2) + "\n");
  std::cerr << "simulate: wrote " << (out / "oc_grid.csv").string() << " in " << manifest.wall_clock_seconds
            << " s; " << grid.total_excluded() << " excluded analyses\n";
  return kExitOk;
}

int cmd_calibrate(const CommonOptions& o, const std::string& method_text, const std::string& grid_spec,
                  std::optional<double> target_power) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig config = resolve_config(o);
  const auto method = parse_method(method_text);
  if (!method) throw ConfigError("method", "unknown method '" + method_text + "'");
  if (*method == Method::NoBorrow) throw ConfigError("method", "no_borrow has no tuning parameter");
  const std::vector<double> values = parse_grid_spec(grid_spec);
  for (double v : values) {
    try {
      config.scenario.tuning.with_value(*method, v).validate();
    } catch (const DomainError& e) {
      throw ConfigError("grid", e.what());
    }
  }
  if (target_power) config.calibration.target_power = *target_power;
  if (!(config.calibration.target_power >= 0.0 && config.calibration.target_power <= 1.0)) {
    throw ConfigError("target_power", "must lie in [0, 1]");
  }
  validate_scenario(config.scenario);
  const std::size_t threads = thread_count(o);
  const fs::path out = prepare_out_dir(o.out_dir);

  CalibrationRequest request;
  request.method = *method;
  request.values = values;
  request.target_power = config.calibration.target_power;
  request.power_hr_exp = config.calibration.power_hr_exp;
  request.power_hr_rwd = config.calibration.power_hr_rwd;
  request.type1_hr_rwd = config.calibration.type1_hr_rwd;
  std::cerr << "calibrate: " << method_name(*method) << ", " << values.size() << " candidates x "
            << config.scenario.n_replicates << " replicates, " << threads << " threads\n";
  const CalibrationReport report = calibrate_tuning(config.scenario, request, threads);

  RunManifest manifest = start_manifest("calibrate", config);
  manifest.outputs = {"calibration_table.csv"};
  manifest.extra = {{"method", std::string(method_name(*method))},
                    {"grid", grid_spec},
                    {"selected_value", report.selected_value()},
                    {"feasible", report.feasible},
                    {"rationale", report.rationale}};
  std::size_t excluded = 0;
  nlohmann::json ses = nlohmann::json::array();
  for (const CalibrationRow& r : report.rows) {
    excluded += r.n_excluded;
    ses.push_back({{"value", r.value}, {"power_mc_se", r.power_mc_se}});
  }
  manifest.exclusions = {{"total_excluded", excluded}};
  manifest.mc_standard_errors = std::move(ses);
  manifest.wall_clock_seconds = seconds_since(start);
  write_file_atomic(out / "calibration_table.csv", calibration_csv(report, request.type1_hr_rwd));
  write_file_atomic(out / "manifest.json", manifest.to_json().dump(2) + "\n");
  std::cerr << "calibrate: selected " << format_number(report.selected_value()) << " (" << report.rationale << ")\n";
  return report.feasible ? kExitOk : kExitInfeasible;
}

int cmd_plan(const CommonOptions& o) {
  const auto start = std::chrono::steady_clock::now();
  RunConfig config = resolve_config(o);
  const PlanConfig& plan = config.plan;
  for (const PlannerInputs* in : {&plan.original, &plan.hybrid}) {
    try {
      in->validate();
    } catch (const DomainError& e) {
      throw ConfigError("plan", e.what());
    }
  }
  if (!(plan.curve_step_months > 0.0)) throw ConfigError("plan.curve_step_months", "must be positive");
  if (!(plan.curve_horizon_months >= 0.0)) throw ConfigError("plan.curve_horizon_months", "must be non-negative");
  const fs::path out = prepare_out_dir(o.out_dir);

  RunManifest manifest = start_manifest("plan", config);
  PlannerOutputs original;
  PlannerOutputs hybrid;
  try {
    original = plan_design(plan.original);
    hybrid = plan_design(plan.hybrid);
  } catch (const InfeasibleDesignError& e) {
    manifest.outputs = {};
    manifest.extra = {{"status", "infeasible"}, {"diagnostic", e.what()}};
    manifest.wall_clock_seconds = seconds_since(start);
    write_file_atomic(out / "manifest.json", manifest.to_json().dump(2) + "\n");
    throw;
  }
  const auto curve = event_curve(hybrid, plan.hybrid, plan.curve_step_months, plan.curve_horizon_months);
  const auto curve_original = event_curve(original, plan.original, plan.curve_step_months, plan.curve_horizon_months);
  const BenefitReport benefit = summarize_benefits(original, hybrid);

  manifest.outputs = {"plan_report.csv", "event_curves.csv", "event_curves_original.csv"};
  manifest.extra = {{"status", "ok"},
                    {"enrollment_months_saved", benefit.enrollment_months_saved},
                    {"cutoff_months_saved", benefit.cutoff_months_saved},
                    {"randomized_patients_saved", benefit.randomized_patients_saved}};
  manifest.wall_clock_seconds = seconds_since(start);
  write_file_atomic(out / "plan_report.csv", plan_report_csv(original, hybrid));
  write_file_atomic(out / "event_curves.csv", event_curves_csv(curve));
  write_file_atomic(out / "event_curves_original.csv", event_curves_csv(curve_original));
  write_file_atomic(out / "manifest.json", manifest.to_json().dump(2) + "\n");
  std::cerr << "plan: hybrid ratio " << format_number(hybrid.final_ratio) << ", enrollment "
            << format_number(hybrid.enrollment_months) << " months, cutoff " << format_number(hybrid.cutoff_months)
            << " months; " << benefit.randomized_patients_saved << " fewer randomized patients\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Operating characteristics and design planning for hybrid-control trials"};
  app.require_subcommand(1);
  CommonOptions opts;
  std::string method_text;
  std::string grid_spec;
  std::optional<double> target_power;

  auto* simulate = app.add_subcommand("simulate", "Run the scenario grid and write oc_grid.csv");
  simulate->add_option("--config", opts.config_path, "JSON config file");
  simulate->add_option("--out", opts.out_dir, "Output directory")->required();
  simulate->add_option("--method", opts.methods, "Restrict to these methods (repeatable)");
  add_run_options(simulate, opts);

  auto* calibrate = app.add_subcommand("calibrate", "Grid-search a tuning parameter");
  calibrate->add_option("--config", opts.config_path, "JSON config file");
  calibrate->add_option("--out", opts.out_dir, "Output directory")->required();
  calibrate->add_option("--method", method_text, "Method to tune")->required();
  calibrate->add_option("--grid", grid_spec, "start:stop:step or v1,v2,...")->required();
  calibrate->add_option("--target-power", target_power, "Power the selected value must reach");
  add_run_options(calibrate, opts);

  auto* plan = app.add_subcommand("plan", "Project the hybrid design against the original one");
  plan->add_option("--config", opts.config_path, "JSON config file");
  plan->add_option("--out", opts.out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(opts);
    if (*calibrate) return cmd_calibrate(opts, method_text, grid_spec, target_power);
    return cmd_plan(opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const InfeasibleDesignError& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
}
