#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pacing/calibration.hpp"
#include "pacing/course.hpp"
#include "pacing/solver.hpp"

namespace pacing {

/// Everything one solve/simulate run reads. `validate()` loads and checks
/// every referenced file before any computation starts.
struct RunManifest {
  std::filesystem::path rider_file;
  std::optional<std::filesystem::path> bike_file;  // defaults when absent
  std::filesystem::path course_file;
  CourseLoadOptions course_options;
  DpConfig config;
  std::filesystem::path out_dir;  // empty: write nothing
  std::optional<std::filesystem::path> dump_tables_dir;

  struct Loaded {
    RiderParams rider;
    BikeEnvParams bike;
    Course course;  // resampled at config.ds
  };
  Loaded validate() const;
};

struct RunSummary {
  std::string kind;  // "solve" or "simulate"
  double finish_time_s = 0.0;
  double avg_power_w = 0.0;           // time-weighted
  double avg_power_distance_w = 0.0;  // distance-weighted
  std::array<int, kModeCount + 1> mode_histogram{};
  double w_min = 0.0;
  double w_end = 0.0;
  int power_clamps = 0;
  std::string course_fingerprint;
  double course_length_m = 0.0;
  std::string dynamics;
  std::optional<double> dense_value_s;  // dense-oracle cost-to-go, when requested
  std::optional<double> value_s;        // four-mode cost-to-go at the start
  DpConfig config;

  std::string to_json() const;
  static RunSummary from_json(const std::string& text);
};

RunSummary load_summary(const std::filesystem::path& path);
RunSummary summarize(const Trajectory& traj, const Course& course, const DpConfig& cfg,
                     const std::string& kind);

struct RunResult {
  Trajectory trajectory;
  RunSummary summary;
};

// resample -> backward sweep -> forward pass; writes trajectory.csv and
// summary.json into manifest.out_dir when set.
RunResult cmd_solve(const RunManifest& manifest);

// Replays a power plan through the dynamics with the same outputs as solve.
RunResult cmd_simulate(const RunManifest& manifest, const PowerPlan& plan);

enum class CpMethod { kThreeMinute, kAllOutModel };

struct CalibrationInput {
  std::vector<std::filesystem::path> traces;  // 3MT CSVs with cadence
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> records;  // trace, sidecar
  std::optional<double> mass_rider;
  double level_gap = 10.0;
  double tolerance_fraction = 0.02;
  CpMethod method = CpMethod::kThreeMinute;
};

struct CalibrationResult {
  CpAwc cp_awc;
  std::optional<LineFit> recovery;
  std::vector<RecoveryPoint> recovery_points;
  std::optional<PmaxFit> pmax;  // averaged over traces; w is empty
  std::vector<std::string> warnings;
  std::string rider_text;  // key-value rider file, fields that could not be fitted omitted
};

CalibrationResult cmd_calibrate(const CalibrationInput& input);

struct Comparison {
  double delta_time_s = 0.0;       // b - a
  double delta_avg_power_w = 0.0;  // b - a
  double time_ratio = 1.0;         // b / a
  std::string report;
  std::string to_json() const;
};

Comparison cmd_compare(const RunSummary& a, const RunSummary& b);

}  // namespace pacing
