#include "hybridsim/config.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

#include "hybridsim/errors.hpp"

namespace hybridsim {

using nlohmann::json;

namespace {

std::string join_path(const std::string& parent, const std::string& key) {
  return parent.empty() ? key : parent + "." + key;
}

// Rejects non-objects and keys outside `allowed`.
void check_object(const json& node, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!node.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected an object");
  const std::set<std::string> keys(allowed.begin(), allowed.end());
  for (const auto& item : node.items()) {
    if (!keys.count(item.key())) throw ConfigError(join_path(path, item.key()), "unknown key");
  }
}

double read_double(const json& node, const std::string& path) {
  if (!node.is_number()) throw ConfigError(path, "expected a number");
  return node.get<double>();
}

std::size_t read_count(const json& node, const std::string& path) {
  if (node.is_number_unsigned()) return node.get<std::size_t>();
  if (node.is_number_float()) {
    const double v = node.get<double>();
    if (v >= 0.0 && v == static_cast<double>(static_cast<std::size_t>(v))) return static_cast<std::size_t>(v);
  }
  throw ConfigError(path, "expected a non-negative integer");
}

std::uint64_t read_u64(const json& node, const std::string& path) {
  if (!node.is_number_unsigned()) throw ConfigError(path, "expected a non-negative integer");
  return node.get<std::uint64_t>();
}

std::string read_string(const json& node, const std::string& path) {
  if (!node.is_string()) throw ConfigError(path, "expected a string");
  return node.get<std::string>();
}

std::vector<double> read_double_list(const json& node, const std::string& path) {
  if (node.is_string()) {
    try {
      return parse_grid_spec(node.get<std::string>());
    } catch (const ConfigError& e) {
      throw ConfigError(path, e.what());
    }
  }
  if (!node.is_array()) throw ConfigError(path, "expected an array of numbers or a grid string");
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    out.push_back(read_double(node[i], path + "[" + std::to_string(i) + "]"));
  }
  if (out.empty()) throw ConfigError(path, "must not be empty");
  return out;
}

template <class F>
void with_key(const json& node, const char* key, const std::string& path, F&& apply) {
  const auto it = node.find(key);
  if (it != node.end()) apply(*it, join_path(path, key));
}

void parse_design(const json& node, const std::string& path, DesignInputs& d) {
  check_object(node, path,
               {"n_experimental", "n_control", "randomization_ratio", "expected_downweight", "accrual_rate",
                "baseline_hazard", "p_lost", "target_events"});
  with_key(node, "n_experimental", path, [&](const json& v, const std::string& p) { d.n_experimental = read_count(v, p); });
  with_key(node, "n_control", path, [&](const json& v, const std::string& p) { d.n_control = read_count(v, p); });
  with_key(node, "randomization_ratio", path,
           [&](const json& v, const std::string& p) { d.randomization_ratio = read_double(v, p); });
  with_key(node, "expected_downweight", path,
           [&](const json& v, const std::string& p) { d.expected_downweight = read_double(v, p); });
  with_key(node, "accrual_rate", path, [&](const json& v, const std::string& p) { d.accrual_rate = read_double(v, p); });
  with_key(node, "baseline_hazard", path,
           [&](const json& v, const std::string& p) { d.baseline_hazard = read_double(v, p); });
  with_key(node, "p_lost", path, [&](const json& v, const std::string& p) { d.p_lost = read_double(v, p); });
  with_key(node, "target_events", path,
           [&](const json& v, const std::string& p) { d.target_events = read_double(v, p); });
}

void parse_tuning(const json& node, const std::string& path, TuningParameters& t) {
  check_object(node, path, {"alpha_pool", "decay_c", "power_a", "cauchy_scale_v", "commensurate_scale"});
  with_key(node, "alpha_pool", path, [&](const json& v, const std::string& p) { t.alpha_pool = read_double(v, p); });
  with_key(node, "decay_c", path, [&](const json& v, const std::string& p) { t.decay_c = read_double(v, p); });
  with_key(node, "power_a", path, [&](const json& v, const std::string& p) { t.power_a = read_double(v, p); });
  with_key(node, "cauchy_scale_v", path,
           [&](const json& v, const std::string& p) { t.cauchy_scale_v = read_double(v, p); });
  with_key(node, "commensurate_scale", path, [&](const json& v, const std::string& p) {
    const auto scale = parse_commensurate_scale(read_string(v, p));
    if (!scale) throw ConfigError(p, "expected variance_inverse_tau, variance_inverse_tau_squared or sd_tau");
    t.commensurate_scale = *scale;
  });
}

void parse_sampler(const json& node, const std::string& path, SamplerConfig& s) {
  check_object(node, path, {"n_chains", "n_iter", "n_burnin", "target_acceptance"});
  with_key(node, "n_chains", path, [&](const json& v, const std::string& p) { s.n_chains = read_count(v, p); });
  with_key(node, "n_iter", path, [&](const json& v, const std::string& p) { s.n_iter = read_count(v, p); });
  with_key(node, "n_burnin", path, [&](const json& v, const std::string& p) { s.n_burnin = read_count(v, p); });
  with_key(node, "target_acceptance", path,
           [&](const json& v, const std::string& p) { s.target_acceptance = read_double(v, p); });
}

void parse_simulation(const json& node, const std::string& path, ScenarioConfig& c) {
  check_object(node, path,
               {"design", "tuning", "sampler", "methods", "n_replicates", "master_seed", "alpha", "hr_exp_grid",
                "hr_rwd_grid"});
  with_key(node, "design", path, [&](const json& v, const std::string& p) { parse_design(v, p, c.design); });
  with_key(node, "tuning", path, [&](const json& v, const std::string& p) { parse_tuning(v, p, c.tuning); });
  with_key(node, "sampler", path, [&](const json& v, const std::string& p) { parse_sampler(v, p, c.sampler); });
  with_key(node, "methods", path, [&](const json& v, const std::string& p) {
    if (!v.is_array() || v.empty()) throw ConfigError(p, "expected a non-empty array of method names");
    std::vector<Method> methods;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const std::string item_path = p + "[" + std::to_string(i) + "]";
      const auto m = parse_method(read_string(v[i], item_path));
      if (!m) throw ConfigError(item_path, "unknown method");
      for (Method seen : methods) {
        if (seen == *m) throw ConfigError(item_path, "duplicate method");
      }
      methods.push_back(*m);
    }
    c.methods = std::move(methods);
  });
  with_key(node, "n_replicates", path, [&](const json& v, const std::string& p) { c.n_replicates = read_count(v, p); });
  with_key(node, "master_seed", path, [&](const json& v, const std::string& p) { c.master_seed = read_u64(v, p); });
  with_key(node, "alpha", path, [&](const json& v, const std::string& p) { c.alpha = read_double(v, p); });
  with_key(node, "hr_exp_grid", path,
           [&](const json& v, const std::string& p) { c.hr_exp_grid = read_double_list(v, p); });
  with_key(node, "hr_rwd_grid", path,
           [&](const json& v, const std::string& p) { c.hr_rwd_grid = read_double_list(v, p); });
}

void parse_calibration(const json& node, const std::string& path, CalibrationSettings& c) {
  check_object(node, path, {"target_power", "power_hr_exp", "power_hr_rwd", "type1_hr_rwd"});
  with_key(node, "target_power", path, [&](const json& v, const std::string& p) { c.target_power = read_double(v, p); });
  with_key(node, "power_hr_exp", path, [&](const json& v, const std::string& p) { c.power_hr_exp = read_double(v, p); });
  with_key(node, "power_hr_rwd", path, [&](const json& v, const std::string& p) { c.power_hr_rwd = read_double(v, p); });
  with_key(node, "type1_hr_rwd", path,
           [&](const json& v, const std::string& p) { c.type1_hr_rwd = read_double_list(v, p); });
}

void parse_planner(const json& node, const std::string& path, PlannerInputs& in) {
  check_object(node, path,
               {"n_experimental", "n_control", "accrual_rate", "external_rate", "historic_months", "baseline_hazard",
                "hr_experimental", "p_lost", "target_events", "initial_ratio"});
  with_key(node, "n_experimental", path,
           [&](const json& v, const std::string& p) { in.n_experimental = read_count(v, p); });
  with_key(node, "n_control", path, [&](const json& v, const std::string& p) { in.n_control = read_count(v, p); });
  with_key(node, "accrual_rate", path, [&](const json& v, const std::string& p) { in.accrual_rate = read_double(v, p); });
  with_key(node, "external_rate", path,
           [&](const json& v, const std::string& p) { in.external_rate = read_double(v, p); });
  with_key(node, "historic_months", path,
           [&](const json& v, const std::string& p) { in.historic_months = read_double(v, p); });
  with_key(node, "baseline_hazard", path,
           [&](const json& v, const std::string& p) { in.baseline_hazard = read_double(v, p); });
  with_key(node, "hr_experimental", path,
           [&](const json& v, const std::string& p) { in.hr_experimental = read_double(v, p); });
  with_key(node, "p_lost", path, [&](const json& v, const std::string& p) { in.p_lost = read_double(v, p); });
  with_key(node, "target_events", path,
           [&](const json& v, const std::string& p) { in.target_events = read_double(v, p); });
  with_key(node, "initial_ratio", path,
           [&](const json& v, const std::string& p) { in.initial_ratio = read_double(v, p); });
}

void parse_plan(const json& node, const std::string& path, PlanConfig& plan) {
  check_object(node, path, {"original", "hybrid", "curve_step_months", "curve_horizon_months"});
  with_key(node, "original", path, [&](const json& v, const std::string& p) { parse_planner(v, p, plan.original); });
  with_key(node, "hybrid", path, [&](const json& v, const std::string& p) { parse_planner(v, p, plan.hybrid); });
  with_key(node, "curve_step_months", path,
           [&](const json& v, const std::string& p) { plan.curve_step_months = read_double(v, p); });
  with_key(node, "curve_horizon_months", path,
           [&](const json& v, const std::string& p) { plan.curve_horizon_months = read_double(v, p); });
}

json design_json(const DesignInputs& d) {
  return {{"n_experimental", d.n_experimental}, {"n_control", d.n_control},
          {"randomization_ratio", d.randomization_ratio}, {"expected_downweight", d.expected_downweight},
          {"accrual_rate", d.accrual_rate}, {"baseline_hazard", d.baseline_hazard},
          {"p_lost", d.p_lost}, {"target_events", d.target_events}};
}

json planner_json(const PlannerInputs& in) {
  return {{"n_experimental", in.n_experimental}, {"n_control", in.n_control},
          {"accrual_rate", in.accrual_rate}, {"external_rate", in.external_rate},
          {"historic_months", in.historic_months}, {"baseline_hazard", in.baseline_hazard},
          {"hr_experimental", in.hr_experimental}, {"p_lost", in.p_lost},
          {"target_events", in.target_events}, {"initial_ratio", in.initial_ratio}};
}

}  // namespace

RunConfig default_config() {
  RunConfig c;
  c.plan.original.external_rate = 0.0;
  c.plan.hybrid.external_rate = 11.3;
  return c;
}

void apply_preset(RunConfig& config, Preset preset) {
  ScenarioConfig& s = config.scenario;
  switch (preset) {
    case Preset::Desk:
      s.hr_exp_grid = {0.78, 1.0};
      s.hr_rwd_grid = {0.6, 1.0, 1.1, 1.2, 1.3, 1.5, 1.8, 2.0};
      s.n_replicates = 500;
      s.sampler.n_chains = 4;
      s.sampler.n_iter = 5000;
      s.sampler.n_burnin = 2500;
      break;
    case Preset::Paper:
      s.hr_exp_grid = {0.70, 0.78, 0.85, 1.00};
      s.hr_rwd_grid = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7, 1.8, 1.9, 2.0};
      s.n_replicates = 1000;
      s.sampler.n_chains = 4;
      s.sampler.n_iter = 10000;
      s.sampler.n_burnin = 5000;
      break;
  }
}

Preset parse_preset(const std::string& name) {
  if (name == "desk") return Preset::Desk;
  if (name == "paper") return Preset::Paper;
  throw ConfigError("preset", "expected desk or paper, got '" + name + "'");
}

RunConfig parse_config(const json& doc, RunConfig base) {
  check_object(doc, "", {"schema_version", "simulation", "calibration", "plan"});
  const auto version = doc.find("schema_version");
  if (version == doc.end()) throw ConfigError("schema_version", "missing");
  if (!version->is_number_integer() || version->get<long long>() != kConfigSchemaVersion) {
    throw ConfigError("schema_version", "unsupported version (expected " + std::to_string(kConfigSchemaVersion) + ")");
  }
  with_key(doc, "simulation", "", [&](const json& v, const std::string& p) { parse_simulation(v, p, base.scenario); });
  with_key(doc, "calibration", "",
           [&](const json& v, const std::string& p) { parse_calibration(v, p, base.calibration); });
  with_key(doc, "plan", "", [&](const json& v, const std::string& p) { parse_plan(v, p, base.plan); });
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, false);
  } catch (const json::parse_error& e) {
    throw ConfigError("config", std::string("parse error in ") + path.string() + ": " + e.what());
  }
  return parse_config(doc, std::move(base));
}

json to_json(const RunConfig& config) {
  const ScenarioConfig& s = config.scenario;
  json methods = json::array();
  for (Method m : s.methods) methods.push_back(std::string(method_name(m)));
  json doc;
  doc["schema_version"] = kConfigSchemaVersion;
  doc["simulation"] = {
      {"design", design_json(s.design)},
      {"tuning",
       {{"alpha_pool", s.tuning.alpha_pool},
        {"decay_c", s.tuning.decay_c},
        {"power_a", s.tuning.power_a},
        {"cauchy_scale_v", s.tuning.cauchy_scale_v},
        {"commensurate_scale", std::string(commensurate_scale_name(s.tuning.commensurate_scale))}}},
      {"sampler",
       {{"n_chains", s.sampler.n_chains},
        {"n_iter", s.sampler.n_iter},
        {"n_burnin", s.sampler.n_burnin},
        {"target_acceptance", s.sampler.target_acceptance}}},
      {"methods", methods},
      {"n_replicates", s.n_replicates},
      {"master_seed", s.master_seed},
      {"alpha", s.alpha},
      {"hr_exp_grid", s.hr_exp_grid},
      {"hr_rwd_grid", s.hr_rwd_grid}};
  doc["calibration"] = {{"target_power", config.calibration.target_power},
                        {"power_hr_exp", config.calibration.power_hr_exp},
                        {"power_hr_rwd", config.calibration.power_hr_rwd},
                        {"type1_hr_rwd", config.calibration.type1_hr_rwd}};
  doc["plan"] = {{"original", planner_json(config.plan.original)},
                 {"hybrid", planner_json(config.plan.hybrid)},
                 {"curve_step_months", config.plan.curve_step_months},
                 {"curve_horizon_months", config.plan.curve_horizon_months}};
  return doc;
}

std::uint64_t config_digest(const RunConfig& config) {
  const std::string text = to_json(config).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace hybridsim
