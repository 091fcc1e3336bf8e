#include "pacing/commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "pacing/errors.hpp"
#include "pacing/kv_file.hpp"

namespace pacing {
namespace {

using nlohmann::json;

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

void require_file(const std::filesystem::path& path, const char* what) {
  if (!std::filesystem::is_regular_file(path)) {
    throw ValidationError(std::string(what) + " file not found: " + path.string());
  }
}

json config_json(const DpConfig& c) {
  json j;
  j["ds"] = c.ds;
  j["v_min"] = c.v_min;
  j["v_max"] = c.v_max;
  j["n_v"] = c.n_v;
  j["n_w"] = c.n_w;
  j["reg_weight"] = c.reg_weight;
  j["dense_n_u"] = c.dense_n_u ? json(*c.dense_n_u) : json(nullptr);
  j["dynamics"] = to_string(c.dynamics);
  j["max_substep_dt"] = c.max_substep_dt;
  return j;
}

DpConfig config_from_json(const json& j) {
  DpConfig c;
  c.ds = j.at("ds").get<double>();
  c.v_min = j.at("v_min").get<double>();
  c.v_max = j.at("v_max").get<double>();
  c.n_v = j.at("n_v").get<int>();
  c.n_w = j.at("n_w").get<int>();
  c.reg_weight = j.at("reg_weight").get<double>();
  if (!j.at("dense_n_u").is_null()) c.dense_n_u = j.at("dense_n_u").get<int>();
  c.dynamics = j.at("dynamics").get<std::string>() == "computrainer" ? Dynamics::kComputrainer
                                                                      : Dynamics::kRoad;
  c.max_substep_dt = j.at("max_substep_dt").get<double>();
  return c;
}

void write_outputs(const RunManifest& m, const RunResult& r) {
  if (m.out_dir.empty()) return;
  std::filesystem::create_directories(m.out_dir);
  write_text(m.out_dir / "trajectory.csv", trajectory_to_csv(r.trajectory));
  write_text(m.out_dir / "summary.json", r.summary.to_json());
}

std::string fmt(const char* f, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, x);
  return buf;
}

}  // namespace

RunManifest::Loaded RunManifest::validate() const {
  require_file(rider_file, "rider");
  if (bike_file) require_file(*bike_file, "bike");
  require_file(course_file, "course");
  config.validate();
  RiderParams rider = load_rider(rider_file);
  BikeEnvParams bike = bike_file ? load_bike(*bike_file, rider) : default_bike(rider);
  const Course raw = load_course(course_file, course_options);
  Course course = resample(raw, config.ds);
  return Loaded{std::move(rider), std::move(bike), std::move(course)};
}

RunSummary summarize(const Trajectory& traj, const Course& course, const DpConfig& cfg,
                     const std::string& kind) {
  RunSummary s;
  s.kind = kind;
  s.finish_time_s = traj.totals.finish_time;
  s.avg_power_w = traj.totals.avg_power;
  s.avg_power_distance_w = traj.totals.avg_power_distance;
  s.mode_histogram = traj.totals.mode_segments;
  s.w_min = traj.totals.w_min;
  s.w_end = traj.totals.w_end;
  s.power_clamps = traj.totals.power_clamps;
  s.course_fingerprint = course_fingerprint(course);
  s.course_length_m = course.length();
  s.dynamics = to_string(cfg.dynamics);
  s.config = cfg;
  return s;
}

std::string RunSummary::to_json() const {
  json j;
  j["kind"] = kind;
  j["finish_time_s"] = finish_time_s;
  j["avg_power_w"] = avg_power_w;
  j["avg_power_distance_w"] = avg_power_distance_w;
  json hist;
  for (int k = 0; k <= kModeCount; ++k) {
    hist[mode_name(static_cast<Mode>(k))] = mode_histogram[static_cast<std::size_t>(k)];
  }
  j["mode_histogram"] = hist;
  j["w_min"] = w_min;
  j["w_end"] = w_end;
  j["power_clamps"] = power_clamps;
  j["course_fingerprint"] = course_fingerprint;
  j["course_length_m"] = course_length_m;
  j["dynamics"] = dynamics;
  j["value_s"] = value_s ? json(*value_s) : json(nullptr);
  j["dense_value_s"] = dense_value_s ? json(*dense_value_s) : json(nullptr);
  j["config"] = config_json(config);
  return j.dump(2) + "\n";
}

RunSummary RunSummary::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
    RunSummary s;
    s.kind = j.at("kind").get<std::string>();
    s.finish_time_s = j.at("finish_time_s").get<double>();
    s.avg_power_w = j.at("avg_power_w").get<double>();
    s.avg_power_distance_w = j.at("avg_power_distance_w").get<double>();
    for (int k = 0; k <= kModeCount; ++k) {
      s.mode_histogram[static_cast<std::size_t>(k)] =
          j.at("mode_histogram").at(mode_name(static_cast<Mode>(k))).get<int>();
    }
    s.w_min = j.at("w_min").get<double>();
    s.w_end = j.at("w_end").get<double>();
    s.power_clamps = j.at("power_clamps").get<int>();
    s.course_fingerprint = j.at("course_fingerprint").get<std::string>();
    s.course_length_m = j.at("course_length_m").get<double>();
    s.dynamics = j.at("dynamics").get<std::string>();
    if (!j.at("value_s").is_null()) s.value_s = j.at("value_s").get<double>();
    if (!j.at("dense_value_s").is_null()) s.dense_value_s = j.at("dense_value_s").get<double>();
    s.config = config_from_json(j.at("config"));
    return s;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("summary: ") + e.what());
  }
}

RunSummary load_summary(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return RunSummary::from_json(buf.str());
}

RunResult cmd_solve(const RunManifest& manifest) {
  const auto loaded = manifest.validate();
  DpConfig cfg = manifest.config;
  const DpSolution sol = backward_sweep(loaded.course, loaded.rider, loaded.bike, cfg);
  RunResult r;
  r.trajectory = forward_pass(sol, loaded.course, loaded.rider, loaded.bike);
  r.summary = summarize(r.trajectory, loaded.course, cfg, "solve");
  const double v0 = cfg.initial_v();
  const double w0 = cfg.w0.value_or(loaded.rider.awc());
  r.summary.value_s = sol.value_at(0, v0, w0);
  if (cfg.dense_n_u) {
    const DpSolution dense = dense_oracle(loaded.course, loaded.rider, loaded.bike, cfg);
    r.summary.dense_value_s = dense.value_at(0, v0, w0);
  }
  if (manifest.dump_tables_dir) dump_tables(sol, manifest.dump_tables_dir->string());
  write_outputs(manifest, r);
  return r;
}

RunResult cmd_simulate(const RunManifest& manifest, const PowerPlan& plan) {
  const auto loaded = manifest.validate();
  SimulationOptions opts;
  opts.dynamics = manifest.config.dynamics;
  opts.v0 = manifest.config.initial_v();
  opts.w0 = manifest.config.w0;
  opts.max_substep_dt = manifest.config.max_substep_dt;
  RunResult r;
  r.trajectory = simulate_plan(loaded.course, loaded.rider, loaded.bike, plan, opts);
  r.summary = summarize(r.trajectory, loaded.course, manifest.config, "simulate");
  write_outputs(manifest, r);
  return r;
}

CalibrationResult cmd_calibrate(const CalibrationInput& input) {
  if (input.traces.empty()) throw ValidationError("calibrate: at least one 3MT trace is required");
  CalibrationResult out;
  std::vector<PowerTrace> traces;
  for (const auto& path : input.traces) traces.push_back(load_trace(path));

  // Per-trace estimates, averaged as for repeated 3MT visits.
  std::vector<CpAwc> estimates;
  for (const auto& tr : traces) {
    estimates.push_back(input.method == CpMethod::kAllOutModel ? estimate_cp_awc_all_out(tr)
                                                               : estimate_cp_awc_3mt(tr));
  }
  for (const auto& e : estimates) {
    out.cp_awc.cp += e.cp / static_cast<double>(estimates.size());
    out.cp_awc.awc += e.awc / static_cast<double>(estimates.size());
  }

  const bool all_cadence =
      std::all_of(traces.begin(), traces.end(), [](const PowerTrace& t) { return t.has_cadence(); });
  if (all_cadence) {
    PmaxFit avg;
    for (std::size_t i = 0; i < traces.size(); ++i) {
      const PmaxFit f = fit_pmax_params(traces[i], estimates[i].cp, estimates[i].awc, std::nullopt,
                                        input.tolerance_fraction);
      const double n = static_cast<double>(traces.size());
      avg.alpha += f.alpha / n;
      avg.alpha_omega += f.alpha_omega / n;
      avg.omega_max_f += f.omega_max_f / n;
      avg.power_rms += f.power_rms / n;
      avg.cadence_rms += f.cadence_rms / n;
      avg.degenerate = avg.degenerate || f.degenerate;
    }
    out.pmax = avg;
  } else {
    out.warnings.push_back("traces without cadence: alpha, alpha_omega, omega_max_f not fitted");
  }

  if (!input.records.empty()) {
    std::vector<IntervalTestRecord> records;
    for (const auto& [trace, sidecar] : input.records) {
      records.push_back(load_interval_record(trace, sidecar));
    }
    out.recovery_points = recovery_points(records, out.cp_awc.cp, out.cp_awc.awc, input.level_gap,
                                          input.tolerance_fraction);
    out.recovery = fit_recovery_model(out.recovery_points);
  } else {
    out.warnings.push_back("no interval-test records: rec_a, rec_b not fitted");
  }
  if (!input.mass_rider) out.warnings.push_back("no rider mass given: mass_rider omitted");

  KeyValueFile kv;
  kv.set("cp", out.cp_awc.cp);
  kv.set("awc", out.cp_awc.awc);
  if (out.recovery) {
    kv.set("rec_a", out.recovery->slope);
    kv.set("rec_b", out.recovery->intercept);
  }
  if (out.pmax) {
    kv.set("alpha", out.pmax->alpha);
    kv.set("alpha_omega", out.pmax->alpha_omega);
    kv.set("omega_max_f", out.pmax->omega_max_f);
  }
  if (input.mass_rider) kv.set("mass_rider", *input.mass_rider);
  out.rider_text = kv.serialize();
  return out;
}

std::string Comparison::to_json() const {
  json j;
  j["delta_time_s"] = delta_time_s;
  j["delta_avg_power_w"] = delta_avg_power_w;
  j["time_ratio"] = time_ratio;
  return j.dump(2) + "\n";
}

Comparison cmd_compare(const RunSummary& a, const RunSummary& b) {
  if (a.course_fingerprint != b.course_fingerprint) {
    throw ValidationError("compare: summaries come from different courses");
  }
  if (!(a.finish_time_s > 0.0)) throw ValidationError("compare: first summary has no finish time");
  Comparison c;
  c.delta_time_s = b.finish_time_s - a.finish_time_s;
  c.delta_avg_power_w = b.avg_power_w - a.avg_power_w;
  c.time_ratio = b.finish_time_s / a.finish_time_s;
  std::ostringstream os;
  os << "time A        " << fmt("%.1f s", a.finish_time_s) << "\n"
     << "time B        " << fmt("%.1f s", b.finish_time_s) << "\n"
     << "delta time    " << fmt("%+.1f s", c.delta_time_s) << "\n"
     << "avg power A   " << fmt("%.1f W", a.avg_power_w) << "\n"
     << "avg power B   " << fmt("%.1f W", b.avg_power_w) << "\n"
     << "delta power   " << fmt("%+.1f W", c.delta_avg_power_w) << "\n"
     << "time ratio    " << fmt("%.1f%%", 100.0 * c.time_ratio) << "\n";
  c.report = os.str();
  return c;
}

}  // namespace pacing
