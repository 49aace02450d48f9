#include "hybridsim/runner.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "hybridsim/errors.hpp"
#include "hybridsim/random.hpp"

namespace hybridsim {

namespace {

StreamTag sampler_tag(Method m) {
  switch (m) {
    case Method::PowerPrior: return StreamTag::PowerPrior;
    case Method::Commensurate: return StreamTag::Commensurate;
    default: return StreamTag::TrialOnlyBayes;
  }
}

std::uint64_t stream_seed(const ScenarioConfig& config, const Cell& cell, std::size_t replicate, StreamTag tag) {
  return derive_seed(config.master_seed,
                     {cell.hr_exp_index, cell.hr_rwd_index, replicate, static_cast<std::uint64_t>(tag)});
}

SamplerConfig sampler_for(const ScenarioConfig& config, const Cell& cell, std::size_t replicate, StreamTag tag) {
  SamplerConfig s = config.sampler;
  s.seed = stream_seed(config, cell, replicate, tag);
  return s;
}

bool same_value(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(1.0, std::abs(b)); }

AnalysisResult analyze_with(Method method, const SurvivalDataset& data, const TuningParameters& tuning,
                            double alpha, const SamplerConfig& sampler) {
  switch (method) {
    case Method::NoBorrow: return analyze_no_borrowing(data, alpha);
    case Method::TestThenPool: return analyze_test_then_pool(data, tuning, alpha);
    case Method::TwoStep: return analyze_two_step(data, tuning, alpha);
    case Method::PowerPrior: return analyze_power_prior(data, tuning, alpha, sampler);
    case Method::Commensurate: return analyze_commensurate(data, tuning, alpha, sampler);
  }
  throw DomainError("unknown method");
}

}  // namespace

void ScenarioConfig::validate() const {
  design.validate();
  tuning.validate();
  sampler.validate();
  if (n_replicates == 0) throw DomainError("n_replicates must be at least 1");
  if (methods.empty()) throw DomainError("at least one method is required");
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
  if (hr_exp_grid.empty() || hr_rwd_grid.empty()) throw DomainError("hazard-ratio grids must be nonempty");
  for (double h : hr_exp_grid) {
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("hr_exp grid values must be positive");
  }
  for (double h : hr_rwd_grid) {
    if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("hr_rwd grid values must be positive");
  }
  derive_hybrid_design(design);
}

std::vector<Cell> grid_cells(const ScenarioConfig& config) {
  std::vector<Cell> cells;
  for (std::size_t i = 0; i < config.hr_exp_grid.size(); ++i) {
    for (std::size_t j = 0; j < config.hr_rwd_grid.size(); ++j) {
      cells.push_back({i, j, config.hr_exp_grid[i], config.hr_rwd_grid[j]});
    }
  }
  return cells;
}

SimulatedReplicate simulate_replicate(const ScenarioConfig& config, const Cell& cell, std::size_t replicate) {
  DesignInputs inputs = config.design;
  inputs.hr_experimental = cell.hr_exp;
  inputs.hr_external = cell.hr_rwd;
  const TrialDesign design = derive_hybrid_design(inputs);
  Rng rng(stream_seed(config, cell, replicate, StreamTag::DataGeneration));
  SurvivalDataset raw = simulate_outcomes(design, inputs, rng);

  SimulatedReplicate out;
  out.record.n_subjects_generated = raw.size();
  out.record.raw_events = static_cast<std::size_t>(
      std::count_if(raw.subjects().begin(), raw.subjects().end(), [](const Subject& s) { return s.event; }));
  CensoringOutcome censored =
      apply_administrative_censoring(std::move(raw), inputs.target_events, inputs.expected_downweight);
  out.data = std::move(censored.data);
  out.record.under_target = censored.under_target;
  out.record.cutoff_time = censored.cutoff_time;
  out.record.dropped = censored.dropped;
  out.record.weighted_events = weighted_event_count(out.data, inputs.expected_downweight);
  out.record.trial_events = out.data.events(Arm::TrialControl) + out.data.events(Arm::TrialExperimental);
  out.record.external_events = out.data.events(Arm::ExternalControl);
  out.record.dataset_digest = out.data.digest();
  return out;
}

ReplicateRecord run_replicate(const ScenarioConfig& config, const Cell& cell, std::size_t replicate) {
  SimulatedReplicate sim = simulate_replicate(config, cell, replicate);
  ReplicateRecord& record = sim.record;
  const SurvivalDataset& data = sim.data;

  std::optional<PosteriorSummary> trial_only;
  std::string trial_only_error;
  const bool wants_commensurate =
      std::find(config.methods.begin(), config.methods.end(), Method::Commensurate) != config.methods.end();
  if (wants_commensurate) {
    try {
      trial_only = bayes_trial_only(data, sampler_for(config, cell, replicate, StreamTag::TrialOnlyBayes));
    } catch (const DomainError& e) {
      trial_only_error = std::string("trial-only companion fit failed: ") + e.what();
    }
  }

  for (Method method : config.methods) {
    MethodOutcome outcome;
    outcome.method = method;
    try {
      AnalysisResult r =
          analyze_with(method, data, config.tuning, config.alpha, sampler_for(config, cell, replicate, sampler_tag(method)));
      if (method == Method::Commensurate) {
        if (!trial_only) throw DomainError(trial_only_error);
        r.effective_events = commensurate_effective_events(trial_only->variance(kLogHrIndexPowerPrior),
                                                           r.posterior_variance.value(),
                                                           static_cast<double>(record.trial_events));
        if (trial_only->max_split_rhat() && *trial_only->max_split_rhat() > 1.1) r.unreliable = true;
      }
      outcome.result = std::move(r);
    } catch (const DomainError& e) {
      outcome.error = e.what();
    }
    record.outcomes.push_back(std::move(outcome));
  }
  return record;
}

const OCRow* OCGrid::find(double hr_exp, double hr_rwd, Method method) const {
  for (const OCRow& row : rows) {
    if (row.method == method && same_value(row.hr_exp, hr_exp) && same_value(row.hr_rwd, hr_rwd)) return &row;
  }
  return nullptr;
}

std::size_t OCGrid::total_excluded() const {
  std::size_t n = 0;
  for (const OCRow& row : rows) n += row.oc.n_excluded;
  return n;
}

std::size_t default_thread_count() {
  if (const char* env = std::getenv("HYBRIDSIM_THREADS")) {
    std::size_t value = 0;
    const char* end = env + std::char_traits<char>::length(env);
    if (auto [ptr, ec] = std::from_chars(env, end, value); ec == std::errc() && ptr == end && value > 0) return value;
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = default_thread_count();
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      if (failed.load(std::memory_order_relaxed)) return;
      const std::size_t i = next.fetch_add(1, std::memory_order_relaxed);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed = true;
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
}

GridRun run_cells(const ScenarioConfig& config, const std::vector<Cell>& cells, const RunOptions& options) {
  config.validate();
  for (const Cell& cell : cells) {
    DesignInputs inputs = config.design;
    inputs.hr_experimental = cell.hr_exp;
    inputs.hr_external = cell.hr_rwd;
    derive_hybrid_design(inputs);
  }
  const std::size_t reps = config.n_replicates;
  std::vector<std::vector<ReplicateRecord>> records(cells.size(), std::vector<ReplicateRecord>(reps));
  parallel_for(cells.size() * reps, options.threads, [&](std::size_t task) {
    const std::size_t c = task / reps;
    const std::size_t k = task % reps;
    records[c][k] = run_replicate(config, cells[c], k);
  });

  GridRun run;
  run.cells = cells;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    std::size_t under_target = 0;
    for (const ReplicateRecord& r : records[c]) under_target += r.under_target ? 1 : 0;
    for (std::size_t m = 0; m < config.methods.size(); ++m) {
      std::vector<MethodOutcome> outcomes;
      outcomes.reserve(reps);
      for (const ReplicateRecord& r : records[c]) outcomes.push_back(r.outcomes[m]);
      OCRow row;
      row.hr_exp = cells[c].hr_exp;
      row.hr_rwd = cells[c].hr_rwd;
      row.method = config.methods[m];
      row.tuning_value = config.tuning.value_for(row.method);
      row.oc = aggregate(std::span<const MethodOutcome>(outcomes), std::log(cells[c].hr_exp));
      row.under_target = under_target;
      run.grid.rows.push_back(std::move(row));
    }
  }
  if (options.keep_records) run.records = std::move(records);
  return run;
}

OCGrid run_grid(const ScenarioConfig& config, std::size_t threads) {
  config.validate();
  std::vector<Method> ordered;
  for (Method m : kAllMethods) {
    if (std::find(config.methods.begin(), config.methods.end(), m) != config.methods.end()) ordered.push_back(m);
  }
  ScenarioConfig sorted = config;
  sorted.methods = ordered;
  RunOptions options;
  options.threads = threads;
  return run_cells(sorted, grid_cells(sorted), options).grid;
}

CalibrationReport calibrate_tuning(const ScenarioConfig& config, const CalibrationRequest& request,
                                   std::size_t threads) {
  config.validate();
  if (request.values.empty()) throw DomainError("calibration grid is empty");
  if (request.method == Method::NoBorrow) throw DomainError("no_borrow has no tuning parameter");
  if (request.type1_hr_rwd.empty()) throw DomainError("calibration needs at least one type I error scenario");
  std::vector<TuningParameters> candidates;
  for (double v : request.values) candidates.push_back(config.tuning.with_value(request.method, v));

  // Cells: index 0 is the power scenario, then one per type I scenario. The
  // seed keys come from the union grids so that a cell shares its datasets
  // with the same cell of a run_grid over those grids.
  std::vector<double> exp_grid{request.power_hr_exp};
  if (!same_value(request.power_hr_exp, 1.0)) exp_grid.push_back(1.0);
  std::vector<double> rwd_grid = request.type1_hr_rwd;
  rwd_grid.push_back(request.power_hr_rwd);
  std::sort(rwd_grid.begin(), rwd_grid.end());
  rwd_grid.erase(std::unique(rwd_grid.begin(), rwd_grid.end(), same_value), rwd_grid.end());
  auto rwd_index = [&](double h) {
    return static_cast<std::size_t>(
        std::find_if(rwd_grid.begin(), rwd_grid.end(), [&](double g) { return same_value(g, h); }) - rwd_grid.begin());
  };
  const std::size_t null_exp_index = exp_grid.size() - 1;
  std::vector<Cell> cells;
  cells.push_back({0, rwd_index(request.power_hr_rwd), request.power_hr_exp, request.power_hr_rwd});
  for (double h : request.type1_hr_rwd) cells.push_back({null_exp_index, rwd_index(h), 1.0, h});

  ScenarioConfig base = config;
  base.methods = {request.method};
  const std::size_t reps = config.n_replicates;
  const std::size_t n_cand = candidates.size();
  // outcome[(cell * reps + k) * n_cand + v]: 1 reject, 0 accept, -1 excluded
  std::vector<signed char> outcome(cells.size() * reps * n_cand, -1);
  parallel_for(cells.size() * reps, threads, [&](std::size_t task) {
    const std::size_t c = task / reps;
    const std::size_t k = task % reps;
    const SimulatedReplicate sim = simulate_replicate(base, cells[c], k);
    for (std::size_t v = 0; v < n_cand; ++v) {
      try {
        const AnalysisResult r = analyze_with(request.method, sim.data, candidates[v], base.alpha,
                                              sampler_for(base, cells[c], k, sampler_tag(request.method)));
        outcome[task * n_cand + v] = r.reject ? 1 : 0;
      } catch (const DomainError&) {
        outcome[task * n_cand + v] = -1;
      }
    }
  });

  auto rate = [&](std::size_t c, std::size_t v, std::size_t& excluded) {
    std::size_t rejects = 0;
    std::size_t used = 0;
    for (std::size_t k = 0; k < reps; ++k) {
      const signed char o = outcome[(c * reps + k) * n_cand + v];
      if (o < 0) {
        ++excluded;
        continue;
      }
      ++used;
      rejects += static_cast<std::size_t>(o);
    }
    return used ? static_cast<double>(rejects) / static_cast<double>(used) : std::nan("");
  };

  CalibrationReport report;
  report.method = request.method;
  for (std::size_t v = 0; v < n_cand; ++v) {
    CalibrationRow row;
    row.value = request.values[v];
    row.power = rate(0, v, row.n_excluded);
    row.power_mc_se = std::sqrt(row.power * (1.0 - row.power) / static_cast<double>(reps));
    row.max_type1 = -1.0;
    for (std::size_t c = 1; c < cells.size(); ++c) {
      const double t1 = rate(c, v, row.n_excluded);
      row.type1.push_back(t1);
      if (t1 > row.max_type1) {
        row.max_type1 = t1;
        row.max_type1_hr_rwd = cells[c].hr_rwd;
      }
    }
    row.meets_target = row.power >= request.target_power;
    report.rows.push_back(std::move(row));
  }

  std::optional<std::size_t> best;
  for (std::size_t v = 0; v < n_cand; ++v) {
    const CalibrationRow& row = report.rows[v];
    if (!row.meets_target) continue;
    if (!best) {
      best = v;
      continue;
    }
    const CalibrationRow& b = report.rows[*best];
    if (row.max_type1 < b.max_type1 || (row.max_type1 == b.max_type1 && row.power > b.power)) best = v;
  }
  std::ostringstream why;
  why.imbue(std::locale::classic());
  if (best) {
    report.feasible = true;
    report.selected = *best;
    const CalibrationRow& b = report.rows[*best];
    why << "smallest max type I error (" << b.max_type1 << " at hr_rwd " << b.max_type1_hr_rwd
        << ") among candidates with power >= " << request.target_power << " (power " << b.power << ")";
  } else {
    report.feasible = false;
    std::size_t top = 0;
    for (std::size_t v = 1; v < n_cand; ++v) {
      if (report.rows[v].power > report.rows[top].power) top = v;
    }
    report.selected = top;
    why << "infeasible: no candidate reached power " << request.target_power << "; best effort is the highest power ("
        << report.rows[top].power << ")";
  }
  report.rationale = why.str();
  return report;
}

std::vector<double> parse_grid_spec(const std::string& spec) {
  auto parse_number = [&](std::string_view token) {
    while (!token.empty() && token.front() == ' ') token.remove_prefix(1);
    while (!token.empty() && token.back() == ' ') token.remove_suffix(1);
    double value = 0.0;
    const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (ec != std::errc() || ptr != token.data() + token.size() || token.empty()) {
      throw ConfigError("grid", "cannot parse '" + std::string(token) + "' as a number");
    }
    return value;
  };
  std::vector<double> values;
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string_view> parts;
    std::string_view rest(spec);
    for (std::size_t pos; (pos = rest.find(':')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
      parts.push_back(rest.substr(0, pos));
    }
    parts.push_back(rest);
    if (parts.size() != 3) throw ConfigError("grid", "range must be start:stop:step");
    const double start = parse_number(parts[0]);
    const double stop = parse_number(parts[1]);
    const double step = parse_number(parts[2]);
    if (!(step > 0.0)) throw ConfigError("grid", "step must be positive");
    if (stop < start) throw ConfigError("grid", "stop must not be below start");
    const auto count = static_cast<std::size_t>(std::floor((stop - start) / step + 1e-9)) + 1;
    for (std::size_t i = 0; i < count; ++i) values.push_back(start + static_cast<double>(i) * step);
  } else {
    std::string_view rest(spec);
    for (;;) {
      const std::size_t pos = rest.find(',');
      values.push_back(parse_number(rest.substr(0, pos)));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
  }
  if (values.empty()) throw ConfigError("grid", "empty grid");
  return values;
}

}  // namespace hybridsim
