#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "pacing/commands.hpp"
#include "pacing/errors.hpp"

namespace {

using namespace pacing;

struct RunOptions {
  std::string rider, bike, course, format = "auto", out, dump_tables;
  int smooth = 1;
  double ds = 10.0, vmax = 20.0, reg = 0.05;
  int nv = 300, nw = 600, dense_nu = 0, threads = 0;
  bool computrainer = false;
  double v0 = -1.0, w0 = -1.0;
};

void add_run_options(CLI::App* cmd, RunOptions& o) {
  cmd->add_option("--rider", o.rider, "rider parameter file")->required();
  cmd->add_option("--bike", o.bike, "bike/environment file (defaults if omitted)");
  cmd->add_option("--course", o.course, "course profile (.csv or .gpx)")->required();
  cmd->add_option("--format", o.format, "course format: auto, csv, gpx");
  cmd->add_option("--smooth", o.smooth, "elevation moving-average window (odd)");
  cmd->add_option("--ds", o.ds, "distance step, m");
  cmd->add_option("--nv", o.nv, "speed grid points");
  cmd->add_option("--nw", o.nw, "energy grid points");
  cmd->add_option("--vmax", o.vmax, "upper speed bound, m/s");
  cmd->add_option("--reg", o.reg, "mode-switch penalty, s");
  cmd->add_option("--dense-nu", o.dense_nu, "also run the dense-input oracle with this many levels");
  cmd->add_option("--threads", o.threads, "worker threads (0 = all cores)");
  cmd->add_option("--v0", o.v0, "initial speed, m/s");
  cmd->add_option("--w0", o.w0, "initial anaerobic energy, J");
  cmd->add_flag("--computrainer", o.computrainer, "trainer dynamics instead of road");
  cmd->add_option("--out", o.out, "output directory for trajectory.csv and summary.json");
  cmd->add_option("--dump-tables", o.dump_tables, "directory for value/policy tables");
}

RunManifest manifest_from(const RunOptions& o) {
  RunManifest m;
  m.rider_file = o.rider;
  if (!o.bike.empty()) m.bike_file = o.bike;
  m.course_file = o.course;
  if (o.format == "csv") {
    m.course_options.format = CourseFormat::kCsv;
  } else if (o.format == "gpx") {
    m.course_options.format = CourseFormat::kGpx;
  } else if (o.format != "auto") {
    throw ValidationError("unknown course format: " + o.format);
  }
  m.course_options.smooth_window = o.smooth;
  m.config.ds = o.ds;
  m.config.n_v = o.nv;
  m.config.n_w = o.nw;
  m.config.v_max = o.vmax;
  m.config.reg_weight = o.reg;
  if (o.dense_nu > 0) m.config.dense_n_u = o.dense_nu;
  m.config.threads = o.threads;
  m.config.dynamics = o.computrainer ? Dynamics::kComputrainer : Dynamics::kRoad;
  if (o.v0 >= 0.0) m.config.v0 = o.v0;
  if (o.w0 >= 0.0) m.config.w0 = o.w0;
  m.config.keep_all_values = false;
  m.out_dir = o.out;
  if (!o.dump_tables.empty()) {
    m.dump_tables_dir = o.dump_tables;
    m.config.keep_all_values = true;
  }
  return m;
}

void print_summary(const RunSummary& s) {
  std::printf("finish time   %.1f s\n", s.finish_time_s);
  std::printf("avg power     %.1f W\n", s.avg_power_w);
  std::printf("w min / end   %.0f / %.0f J\n", s.w_min, s.w_end);
  std::printf("segments      zero %d  cp %d  cruise %d  max %d  other %d\n", s.mode_histogram[0],
              s.mode_histogram[1], s.mode_histogram[2], s.mode_histogram[3], s.mode_histogram[4]);
  if (s.power_clamps > 0) std::printf("power clamps  %d\n", s.power_clamps);
  if (s.value_s) std::printf("value         %.1f s\n", *s.value_s);
  if (s.dense_value_s) std::printf("dense value   %.1f s\n", *s.dense_value_s);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-time pacing for cycling time trials"};
  app.require_subcommand(1);

  std::vector<std::string> traces, records;
  std::string cal_out;
  double mass = -1.0, level_gap = 10.0;
  auto* cal = app.add_subcommand("calibrate", "fit rider parameters from test traces");
  cal->add_option("--trace", traces, "3MT trace CSV (repeatable)")->required();
  cal->add_option("--record", records, "interval test as trace.csv:sidecar.txt (repeatable)");
  cal->add_option("--mass", mass, "rider mass, kg");
  cal->add_option("--level-gap", level_gap, "recovery-power grouping gap, W");
  std::string cp_method = "3mt";
  cal->add_option("--method", cp_method, "CP/AWC estimate: 3mt (last 30 s mean) or model (all-out fit)")
      ->check(CLI::IsMember({"3mt", "model"}));
  cal->add_option("--out", cal_out, "rider file to write");

  RunOptions solve_opts;
  auto* solve = app.add_subcommand("solve", "compute the minimum-time strategy");
  add_run_options(solve, solve_opts);

  RunOptions sim_opts;
  std::string plan_file;
  auto* sim = app.add_subcommand("simulate", "replay a power plan");
  add_run_options(sim, sim_opts);
  sim->add_option("--plan", plan_file, "power plan CSV (s_m or t_s, u_w)")->required();

  std::string sum_a, sum_b, cmp_out;
  auto* cmp = app.add_subcommand("compare", "compare two run summaries");
  cmp->add_option("a", sum_a, "reference summary.json")->required();
  cmp->add_option("b", sum_b, "candidate summary.json")->required();
  cmp->add_option("--out", cmp_out, "write the comparison as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*cal) {
      CalibrationInput in;
      for (const auto& t : traces) in.traces.emplace_back(t);
      for (const auto& r : records) {
        const auto colon = r.find(':');
        if (colon == std::string::npos) throw ValidationError("--record expects trace.csv:sidecar.txt");
        in.records.emplace_back(r.substr(0, colon), r.substr(colon + 1));
      }
      if (mass > 0.0) in.mass_rider = mass;
      in.level_gap = level_gap;
      in.method = cp_method == "model" ? CpMethod::kAllOutModel : CpMethod::kThreeMinute;
      const auto res = cmd_calibrate(in);
      for (const auto& w : res.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      if (cal_out.empty()) {
        std::cout << res.rider_text;
      } else {
        std::ofstream(cal_out) << res.rider_text;
      }
    } else if (*solve) {
      const auto r = cmd_solve(manifest_from(solve_opts));
      print_summary(r.summary);
    } else if (*sim) {
      const auto plan = parse_power_plan(read_file(plan_file), plan_file);
      const auto r = cmd_simulate(manifest_from(sim_opts), plan);
      print_summary(r.summary);
    } else if (*cmp) {
      const auto c = cmd_compare(load_summary(sum_a), load_summary(sum_b));
      std::cout << c.report;
      if (!cmp_out.empty()) std::ofstream(cmp_out) << c.to_json();
    }
  } catch (const InfeasibleProblem& e) {
    std::fprintf(stderr, "infeasible: %s\n", e.what());
    return 3;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
