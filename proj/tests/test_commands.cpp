#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "pacing/commands.hpp"
#include "pacing/errors.hpp"
#include "pacing/kv_file.hpp"
#include "support/synthetic.hpp"

using namespace pacing;
using doctest::Approx;
namespace fs = std::filesystem;

namespace {

const std::string kData = PACING_DATA_DIR;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunManifest small_manifest(const std::string& course) {
  RunManifest m;
  m.rider_file = kData + "/riders/sub14.txt";
  m.bike_file = kData + "/bikes/road_default.txt";
  m.course_file = kData + "/courses/" + course;
  m.config.n_v = 100;
  m.config.n_w = 150;
  m.config.keep_all_values = false;
  return m;
}

}  // namespace

TEST_CASE("manifest validation happens before solving") {
  auto m = small_manifest("flat_4km.csv");
  m.rider_file = "/nonexistent/rider.txt";
  CHECK_THROWS_AS(cmd_solve(m), ValidationError);
  m = small_manifest("flat_4km.csv");
  m.bike_file = "/nonexistent/bike.txt";
  CHECK_THROWS_AS(cmd_solve(m), ValidationError);
  m = small_manifest("flat_4km.csv");
  m.config.n_v = 1;
  CHECK_THROWS_AS(cmd_solve(m), ValidationError);

  TempDir tmp("pacing_zero_course");
  std::ofstream(tmp.path / "zero.csv") << "0,100\n0,100\n";
  m = small_manifest("flat_4km.csv");
  m.course_file = tmp.path / "zero.csv";
  CHECK_THROWS_AS(cmd_solve(m), ValidationError);
}

TEST_CASE("solve writes deterministic outputs") {
  TempDir tmp("pacing_solve");
  auto m = small_manifest("flat_4km.csv");
  m.out_dir = tmp.path / "a";
  const auto r = cmd_solve(m);
  CHECK(r.summary.kind == "solve");
  CHECK(r.summary.w_end <= 0.02 * 7841.0);
  CHECK(r.summary.finish_time_s > 300.0);
  CHECK(r.summary.course_length_m == 4000.0);
  int segments = 0;
  for (int n : r.summary.mode_histogram) segments += n;
  CHECK(segments == 400);
  REQUIRE(r.summary.value_s);
  CHECK(r.summary.finish_time_s == Approx(*r.summary.value_s).epsilon(0.01));

  m.out_dir = tmp.path / "b";
  cmd_solve(m);
  CHECK(slurp(tmp.path / "a" / "trajectory.csv") == slurp(tmp.path / "b" / "trajectory.csv"));
  CHECK(slurp(tmp.path / "a" / "summary.json") == slurp(tmp.path / "b" / "summary.json"));

  const auto back = load_summary(tmp.path / "a" / "summary.json");
  CHECK(back.finish_time_s == r.summary.finish_time_s);
  CHECK(back.mode_histogram == r.summary.mode_histogram);
  CHECK(back.course_fingerprint == r.summary.course_fingerprint);
  CHECK(back.config.n_v == 100);
  CHECK(back.dynamics == "road");
}

TEST_CASE("solve can dump tables and run the dense oracle") {
  TempDir tmp("pacing_dump");
  auto m = small_manifest("flat_4km.csv");
  m.config.ds = 200.0;
  m.config.n_v = 20;
  m.config.n_w = 20;
  m.config.keep_all_values = true;
  m.config.dense_n_u = 20;
  m.dump_tables_dir = tmp.path / "tables";
  const auto r = cmd_solve(m);
  REQUIRE(r.summary.dense_value_s);
  CHECK(*r.summary.dense_value_s <= *r.summary.value_s + 1e-9);
  CHECK(fs::exists(tmp.path / "tables" / "policy.csv"));
  CHECK(fs::exists(tmp.path / "tables" / "value_stage0.csv"));
}

TEST_CASE("trainer baseline of two constant halves") {
  TempDir tmp("pacing_sim");
  auto m = small_manifest("hilly_11km.csv");
  m.config.dynamics = Dynamics::kComputrainer;
  const auto plan = parse_power_plan("s_m,u_w\n0,230\n5500,190\n11000,190\n");
  const auto base = cmd_simulate(m, plan);
  CHECK(base.summary.kind == "simulate");
  CHECK(base.summary.avg_power_distance_w == Approx(210.0).epsilon(0.1 / 210.0));
  CHECK(base.summary.avg_power_w > 190.0);
  CHECK(base.summary.avg_power_w < 230.0);
  const auto opt = cmd_solve(m);
  CHECK(base.summary.finish_time_s > opt.summary.finish_time_s);
  const auto cmp = cmd_compare(base.summary, opt.summary);
  CHECK(cmp.time_ratio < 1.0);
}

TEST_CASE("compare") {
  RunSummary a;
  a.course_fingerprint = "abc";
  a.finish_time_s = 2048.0;
  a.avg_power_w = 212.0;
  RunSummary b = a;
  auto c = cmd_compare(a, b);
  CHECK(c.delta_time_s == 0.0);
  CHECK(c.delta_avg_power_w == 0.0);
  CHECK(c.time_ratio == 1.0);
  CHECK(c.report.find("100.0%") != std::string::npos);
  b.finish_time_s = 1556.0;
  b.avg_power_w = 240.0;
  c = cmd_compare(a, b);
  CHECK(c.time_ratio == Approx(0.7598).epsilon(1e-4));
  CHECK(c.report.find("76.0%") != std::string::npos);
  CHECK(c.delta_avg_power_w == Approx(28.0));
  CHECK(c.to_json().find("time_ratio") != std::string::npos);
  b.course_fingerprint = "abd";
  CHECK_THROWS_AS(cmd_compare(a, b), ValidationError);
}

TEST_CASE("calibrate from three identical 3MTs") {
  TempDir tmp("pacing_cal3");
  const auto row = synth::table_row(14);
  const auto csv = trace_to_csv(synth::three_minute_test(row));
  CalibrationInput in;
  for (int i = 0; i < 3; ++i) {
    const auto p = tmp.path / ("3mt_" + std::to_string(i) + ".csv");
    std::ofstream(p) << csv;
    in.traces.push_back(p);
  }
  in.mass_rider = 74.0;
  const auto res = cmd_calibrate(in);
  CHECK(std::abs(res.cp_awc.cp - row.cp) <= 1.0);
  CHECK(std::abs(res.cp_awc.awc - row.awc) <= 0.01 * row.awc);
  REQUIRE(res.pmax);
  CHECK(res.pmax->alpha == Approx(row.alpha).epsilon(0.05));
  CHECK(res.pmax->alpha_omega == Approx(row.alpha_omega).epsilon(0.05));
  CHECK(res.pmax->omega_max_f == Approx(row.omega_max_f).epsilon(0.01));
  const auto kv = KeyValueFile::parse(res.rider_text);
  CHECK_FALSE(kv.has("rec_a"));
  CHECK(kv.number("mass_rider") == 74.0);
  CHECK(res.warnings.size() == 1);
}

TEST_CASE("calibrate with a single 3MT and nothing else") {
  TempDir tmp("pacing_cal1");
  std::ofstream(tmp.path / "t.csv") << trace_to_csv(synth::three_minute_test(synth::table_row(16)));
  const auto res = cmd_calibrate(CalibrationInput{{tmp.path / "t.csv"}, {}, std::nullopt});
  const auto kv = KeyValueFile::parse(res.rider_text);
  CHECK(kv.has("cp"));
  CHECK(kv.has("alpha"));
  CHECK_FALSE(kv.has("rec_a"));
  CHECK_FALSE(kv.has("rec_b"));
  CHECK_FALSE(kv.has("mass_rider"));
  CHECK(res.warnings.size() == 2);
  CHECK_THROWS_AS(cmd_calibrate(CalibrationInput{}), ValidationError);
}

TEST_CASE("calibrate with the all-out model fit") {
  TempDir tmp("pacing_cal_model");
  const auto row = synth::table_row(16);
  std::ofstream(tmp.path / "t.csv") << trace_to_csv(synth::three_minute_test(row));
  CalibrationInput in;
  in.traces.push_back(tmp.path / "t.csv");
  in.method = CpMethod::kAllOutModel;
  const auto res = cmd_calibrate(in);
  CHECK(res.cp_awc.cp == Approx(row.cp).epsilon(1e-9));
  CHECK(res.cp_awc.awc == Approx(row.awc).epsilon(1e-9));
  REQUIRE(res.pmax);
  CHECK(res.pmax->alpha == Approx(row.alpha).epsilon(1e-9));
  CHECK(res.pmax->alpha_omega == Approx(row.alpha_omega).epsilon(1e-9));
  CHECK(res.pmax->omega_max_f == Approx(row.omega_max_f).epsilon(1e-9));
}

TEST_CASE("calibrate recovers the published recovery line") {
  TempDir tmp("pacing_cal_rec");
  const double cp = 242.0;
  const double awc = 24000.0;
  // Rectangle 3MT: estimates exactly (cp, awc), no cadence.
  std::ofstream(tmp.path / "3mt.csv") << trace_to_csv(synth::blocks({{cp + awc / 150.0, 150}, {cp, 30}}));
  CalibrationInput in;
  in.traces.push_back(tmp.path / "3mt.csv");
  const std::vector<std::pair<double, double>> levels = {
      {89.71, 229.76}, {201.07, 236.29}, {229.27, 241.57}};
  int n = 0;
  for (const auto& [p, adj] : levels) {
    for (double dur : {120.0, 360.0, 900.0}) {
      const auto rec = synth::interval_record({cp, awc, p, adj, dur});
      const auto base = tmp.path / ("rec" + std::to_string(n++));
      std::ofstream(base.string() + ".csv") << trace_to_csv(rec.trace);
      std::ofstream(base.string() + ".txt")
          << "warmup_end = " << rec.bounds.warmup_end << "\ncp4_end = " << rec.bounds.cp4_end
          << "\nrecovery_end = " << rec.bounds.recovery_end << "\nmt_end = " << rec.bounds.mt_end << "\n";
      in.records.emplace_back(base.string() + ".csv", base.string() + ".txt");
    }
  }
  const auto res = cmd_calibrate(in);
  CHECK(res.cp_awc.cp == Approx(cp));
  CHECK(res.cp_awc.awc == Approx(awc));
  CHECK(res.recovery_points.size() == 3);
  REQUIRE(res.recovery);
  CHECK(std::abs(res.recovery->slope - 0.0772) <= 0.0005);
  CHECK(std::abs(res.recovery->intercept - 222.49) <= 0.05);
  CHECK_FALSE(res.pmax);
}
