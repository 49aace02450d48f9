#include "hybridsim/report.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <system_error>

#include "hybridsim/errors.hpp"

namespace hybridsim {

using nlohmann::json;

namespace {

class CsvWriter {
 public:
  explicit CsvWriter(std::initializer_list<const char*> header) {
    bool first = true;
    for (const char* h : header) {
      if (!first) out_ += ',';
      out_ += h;
      first = false;
    }
    out_ += '\n';
  }

  CsvWriter& cell(const std::string& text) {
    if (!line_start_) out_ += ',';
    out_ += text;
    line_start_ = false;
    return *this;
  }
  CsvWriter& num(double v) { return cell(format_number(v)); }
  CsvWriter& count(std::size_t v) { return cell(std::to_string(v)); }
  void end_row() {
    out_ += '\n';
    line_start_ = true;
  }
  const std::string& str() const noexcept { return out_; }

 private:
  std::string out_;
  bool line_start_ = true;
};

json json_number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "NA";
  if (std::isinf(value)) return value > 0 ? "Inf" : "-Inf";
  if (value == 0.0) return "0";  // also folds -0
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 6);
  if (res.ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, res.ptr);
}

std::string format_digest(std::uint64_t digest) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(digest));
  return buf;
}

std::string oc_grid_csv(const OCGrid& grid) {
  CsvWriter w({"hr_exp", "hr_rwd", "method", "tuning_value", "n_reps", "rejection_rate", "rejection_mc_se", "mse",
               "bias", "mean_eff_events", "sd_eff_events", "n_excluded"});
  for (const OCRow& r : grid.rows) {
    w.num(r.hr_exp).num(r.hr_rwd).cell(std::string(method_name(r.method))).num(r.tuning_value);
    w.count(r.oc.n_replicates).num(r.oc.rejection_rate).num(r.oc.rejection_mc_se).num(r.oc.mse_log_hr);
    w.num(r.oc.bias_log_hr).num(r.oc.mean_effective_events);
    w.num(r.oc.sd_effective_events.value_or(std::nan(""))).count(r.oc.n_excluded);
    w.end_row();
  }
  return w.str();
}

std::string oc_plot_csv(const OCGrid& grid) {
  CsvWriter w({"panel_hr_exp", "x_hr_rwd", "series_method", "metric", "value"});
  for (const OCRow& r : grid.rows) {
    const std::string m(method_name(r.method));
    const std::pair<const char*, double> metrics[] = {
        {"rejection_rate", r.oc.rejection_rate},
        {"rejection_mc_se", r.oc.rejection_mc_se},
        {"mse", r.oc.mse_log_hr},
        {"bias", r.oc.bias_log_hr},
        {"mean_eff_events", r.oc.mean_effective_events},
        {"mean_eff_events_mc_se", r.oc.mean_effective_events_mc_se()},
    };
    for (const auto& [name, value] : metrics) {
      w.num(r.hr_exp).num(r.hr_rwd).cell(m).cell(name).num(value);
      w.end_row();
    }
  }
  return w.str();
}

std::string calibration_csv(const CalibrationReport& report, const std::vector<double>& type1_hr_rwd) {
  CsvWriter w({"method", "value", "power", "power_mc_se", "max_type1", "max_type1_hr_rwd", "meets_target",
               "n_excluded", "selected", "type1_by_hr_rwd"});
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const CalibrationRow& r = report.rows[i];
    std::string detail;
    for (std::size_t j = 0; j < r.type1.size() && j < type1_hr_rwd.size(); ++j) {
      if (j) detail += ';';
      detail += format_number(type1_hr_rwd[j]) + "=" + format_number(r.type1[j]);
    }
    w.cell(std::string(method_name(report.method))).num(r.value).num(r.power).num(r.power_mc_se);
    w.num(r.max_type1).num(r.max_type1_hr_rwd).cell(r.meets_target ? "true" : "false").count(r.n_excluded);
    w.cell(i == report.selected ? "true" : "false").cell(detail);
    w.end_row();
  }
  return w.str();
}

std::string plan_report_csv(const PlannerOutputs& original, const PlannerOutputs& hybrid) {
  CsvWriter w({"quantity", "original", "hybrid", "difference"});
  auto row = [&](const char* name, double a, double b) {
    w.cell(name).num(a).num(b).num(a - b);
    w.end_row();
  };
  row("initial_ratio", original.initial_ratio, hybrid.initial_ratio);
  row("ratio_after_historical", original.ratio_after_historical, hybrid.ratio_after_historical);
  row("final_ratio", original.final_ratio, hybrid.final_ratio);
  row("rate_experimental", original.rate_experimental, hybrid.rate_experimental);
  row("rate_trial_control", original.rate_control, hybrid.rate_control);
  row("rate_external", original.rate_external, hybrid.rate_external);
  row("n_experimental", static_cast<double>(original.n_experimental), static_cast<double>(hybrid.n_experimental));
  row("n_trial_control", static_cast<double>(original.n_trial_control), static_cast<double>(hybrid.n_trial_control));
  row("n_randomized", static_cast<double>(original.randomized()), static_cast<double>(hybrid.randomized()));
  row("n_external_historical", original.n_external_historical, hybrid.n_external_historical);
  row("n_external_concurrent", original.n_external_concurrent, hybrid.n_external_concurrent);
  row("enrollment_months", original.enrollment_months, hybrid.enrollment_months);
  row("cutoff_months", original.cutoff_months, hybrid.cutoff_months);
  row("events_experimental", original.events_at_cutoff.experimental, hybrid.events_at_cutoff.experimental);
  row("events_trial_control", original.events_at_cutoff.trial_control, hybrid.events_at_cutoff.trial_control);
  row("events_external", original.events_at_cutoff.external, hybrid.events_at_cutoff.external);
  row("events_control_total", original.events_at_cutoff.trial_control + original.events_at_cutoff.external,
      hybrid.events_at_cutoff.trial_control + hybrid.events_at_cutoff.external);
  row("events_total", original.events_at_cutoff.total(), hybrid.events_at_cutoff.total());
  return w.str();
}

std::string event_curves_csv(const std::vector<EventCurveRow>& rows) {
  CsvWriter w({"t_months", "e_events_experimental", "e_events_trial_control", "e_events_external"});
  for (const EventCurveRow& r : rows) {
    w.num(r.t_months).num(r.events.experimental).num(r.events.trial_control).num(r.events.external);
    w.end_row();
  }
  return w.str();
}

json RunManifest::to_json() const {
  json j;
  j["command"] = command;
  j["config_digest"] = format_digest(config_digest);
  j["master_seed"] = master_seed;
  j["artifact_version"] = artifact_version;
  j["wall_clock_seconds"] = wall_clock_seconds;
  j["outputs"] = outputs;
  j["config"] = config;
  j["exclusions"] = exclusions;
  j["mc_standard_errors"] = mc_standard_errors;
  for (const auto& item : extra.items()) j[item.key()] = item.value();
  return j;
}

void describe_grid(RunManifest& manifest, const OCGrid& grid) {
  json per_row = json::array();
  json ses = json::array();
  std::size_t unreliable = 0;
  std::size_t under_target = 0;
  for (const OCRow& r : grid.rows) {
    unreliable += r.oc.n_unreliable;
    under_target += r.under_target;
    const std::string m(method_name(r.method));
    if (r.oc.n_excluded > 0 || r.oc.n_unreliable > 0 || r.under_target > 0) {
      per_row.push_back({{"hr_exp", r.hr_exp},
                         {"hr_rwd", r.hr_rwd},
                         {"method", m},
                         {"n_excluded", r.oc.n_excluded},
                         {"n_unreliable", r.oc.n_unreliable},
                         {"under_target", r.under_target}});
    }
    ses.push_back({{"hr_exp", r.hr_exp},
                   {"hr_rwd", r.hr_rwd},
                   {"method", m},
                   {"rejection_mc_se", json_number(r.oc.rejection_mc_se)},
                   {"mean_eff_events_mc_se", json_number(r.oc.mean_effective_events_mc_se())}});
  }
  manifest.exclusions = {{"total_excluded", grid.total_excluded()},
                         {"total_unreliable", unreliable},
                         {"total_under_target", under_target},
                         {"by_scenario", per_row}};
  manifest.mc_standard_errors = std::move(ses);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace hybridsim
