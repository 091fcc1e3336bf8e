#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pacing/course.hpp"
#include "pacing/dynamics.hpp"
#include "pacing/rider.hpp"

namespace pacing {

// The four candidate powers of a minimum-time pacing strategy, in tie-break
// order. kOther labels powers outside the set (dense oracle, replayed plans).
enum class Mode : std::uint8_t { kZero = 0, kCp = 1, kCruise = 2, kMax = 3, kOther = 4 };

inline constexpr int kModeCount = 4;

const char* mode_name(Mode m);
// 1 = zero, 2 = CP, 3 = cruise, 4 = max; 0 for kOther.
int mode_number(Mode m);

struct ModeInput {
  Mode mode = Mode::kZero;
  double u = 0.0;
};

// Admissibility of the four modes at one state, given the cruise power and
// the maximal power there. A mode whose power duplicates a lower mode's is
// dropped; a cruise power that would need clamping is dropped.
struct ModePowers {
  std::array<double, kModeCount> u{};
  std::array<bool, kModeCount> admissible{};
};

inline ModePowers mode_powers(double cp, double cruise, double u_max) {
  ModePowers m;
  m.u = {0.0, cp, cruise, u_max};
  m.admissible = {true, cp <= u_max, cruise >= 0.0 && cruise <= u_max, true};
  for (int k = 1; k < kModeCount; ++k) {
    for (int j = 0; j < k && m.admissible[k]; ++j) {
      if (m.admissible[j] && m.u[j] == m.u[k]) m.admissible[k] = false;
    }
  }
  return m;
}

// Admissible (mode, power) pairs at (v, w) on grade theta, ordered by mode.
std::vector<ModeInput> admissible_inputs(double v, double w, double theta, const RiderParams& rider,
                                         const BikeEnvParams& bike,
                                         Dynamics variant = Dynamics::kRoad);

struct DpConfig {
  double ds = 10.0;     // m
  double v_min = 1.0;   // m/s
  double v_max = 20.0;  // m/s
  int n_v = 300;
  int n_w = 600;
  double reg_weight = 0.05;        // s per mode switch
  std::optional<int> dense_n_u;    // input levels of the dense oracle
  Dynamics dynamics = Dynamics::kRoad;
  double max_substep_dt = 1.0;     // s, Euler sub-step bound inside one ds
  std::optional<double> v0;        // initial speed, default v_min
  std::optional<double> w0;        // initial energy, default awc
  bool keep_all_values = true;     // false keeps stage 0 only
  int threads = 0;                 // 0 = hardware concurrency

  void validate() const;
  double initial_v() const { return v0.value_or(v_min); }
};

/// Uniform (v, w) node lattice shared by every stage.
class StateGrid {
 public:
  StateGrid(double v_min, double v_max, int n_v, double awc, int n_w);

  int n_v() const { return n_v_; }
  int n_w() const { return n_w_; }
  double v_min() const { return v_min_; }
  double v_max() const { return v_max_; }
  double awc() const { return awc_; }
  double dv() const { return dv_; }
  double dw() const { return dw_; }
  double v(int i) const { return i == n_v_ - 1 ? v_max_ : v_min_ + i * dv_; }
  double w(int j) const { return j == n_w_ - 1 ? awc_ : j * dw_; }
  std::size_t index(int iv, int iw) const {
    return static_cast<std::size_t>(iv) * static_cast<std::size_t>(n_w_) +
           static_cast<std::size_t>(iw);
  }
  std::size_t nodes() const { return static_cast<std::size_t>(n_v_) * static_cast<std::size_t>(n_w_); }

  // Lower node and fraction toward the next node. std::nullopt when v lies
  // outside [v_min, v_max] by more than rounding.
  struct Bracket {
    int lo = 0;
    double frac = 0.0;
  };
  std::optional<Bracket> bracket_v(double v) const;
  // Energies above awc saturate; below 0 gives std::nullopt.
  std::optional<Bracket> bracket_w(double w) const;
  // Same, but clamps out-of-range values onto the grid edge.
  Bracket clamp_v(double v) const;
  Bracket clamp_w(double w) const;

 private:
  double v_min_, v_max_, awc_, dv_, dw_;
  int n_v_, n_w_;
};

inline constexpr std::uint8_t kNoPolicy = 0xff;

/// Cost-to-go and optimal policy over the (stage, v, w) lattice.
///
/// Stage N (the finish) has value 0 everywhere and no policy. Infeasible
/// nodes hold +inf and kNoPolicy.
class DpSolution {
 public:
  DpSolution(DpConfig cfg, StateGrid grid, int stages, std::string course_fingerprint);

  const DpConfig& config() const { return cfg_; }
  const StateGrid& grid() const { return grid_; }
  int stages() const { return stages_; }
  const std::string& course_fingerprint() const { return fingerprint_; }
  bool has_all_values() const { return !values_.empty(); }
  bool dense() const { return !power_.empty(); }

  double value(int stage, int iv, int iw) const;
  // Bilinear interpolation of the stage's value table; +inf if any
  // contributing node is infeasible.
  double value_at(int stage, double v, double w) const;
  Mode policy(int stage, int iv, int iw) const;  // throws at infeasible nodes
  std::uint8_t policy_code(int stage, int iv, int iw) const;  // kNoPolicy if infeasible
  // Power stored by the dense oracle at a node.
  double policy_power(int stage, int iv, int iw) const;

  // Writable views used while sweeping.
  std::vector<double>& mutable_stage0() { return stage0_; }
  double* stage_values(int stage);
  std::uint8_t* stage_policy(int stage);
  double* stage_power(int stage);
  void allocate_dense();

 private:
  std::size_t offset(int stage) const { return static_cast<std::size_t>(stage) * grid_.nodes(); }

  DpConfig cfg_;
  StateGrid grid_;
  int stages_;
  std::string fingerprint_;
  std::vector<double> values_;  // (stages + 1) tables when kept
  std::vector<double> stage0_;
  std::vector<std::uint8_t> policy_;  // stages tables
  std::vector<double> power_;         // dense oracle only
};

// Backward sweep restricted to the four-mode input set.
DpSolution backward_sweep(const Course& course, const RiderParams& rider, const BikeEnvParams& bike,
                          const DpConfig& cfg);

// Same sweep with power quantized uniformly on [0, u_max] at cfg.dense_n_u
// levels plus the four exact mode powers. Reuses cfg.reg_weight; compare with
// regularization off.
DpSolution dense_oracle(const Course& course, const RiderParams& rider, const BikeEnvParams& bike,
                        const DpConfig& cfg);

struct TrajectorySample {
  double s = 0.0;
  double t = 0.0;
  double v = 0.0;
  double w = 0.0;
  double u = 0.0;
  Mode mode = Mode::kZero;
};

struct TrajectoryTotals {
  double finish_time = 0.0;  // s
  double avg_power = 0.0;    // time-weighted, W
  double avg_power_distance = 0.0;  // distance-weighted, W
  double w_min = 0.0;
  double w_max = 0.0;
  double w_end = 0.0;
  std::array<int, kModeCount + 1> mode_segments{};  // indexed by Mode
  int power_clamps = 0;  // inputs reduced to u_max (replayed plans)
  int speed_clamps = 0;  // forward states pulled back onto the speed grid
};

/// Samples at every grid distance; sample i carries the power applied over
/// segment i, the last sample repeats the final segment's power.
struct Trajectory {
  std::vector<TrajectorySample> samples;
  TrajectoryTotals totals;
};

void compute_totals(Trajectory& traj);

// Simulates the policy forward from (v0, w0) (defaults from the config).
Trajectory forward_pass(const DpSolution& sol, const Course& course, const RiderParams& rider,
                        const BikeEnvParams& bike, std::optional<double> v0 = std::nullopt,
                        std::optional<double> w0 = std::nullopt);

// Power as a function of distance or of elapsed time, held piecewise
// constant from each sample to the next.
struct PowerPlan {
  enum class Axis { kDistance, kTime };
  Axis axis = Axis::kDistance;
  std::vector<std::pair<double, double>> points;  // (s or t, W), increasing keys

  double power_at(double key) const;
  double last_key() const { return points.back().first; }
};

PowerPlan parse_power_plan(const std::string& csv_text, const std::string& origin = "<plan>");

struct SimulationOptions {
  Dynamics dynamics = Dynamics::kRoad;
  double v0 = 1.0;
  std::optional<double> w0;
  double max_substep_dt = 1.0;
};

// Integrates the dynamics over a resampled course under a given plan. Powers
// above u_max are clamped and counted.
Trajectory simulate_plan(const Course& course, const RiderParams& rider, const BikeEnvParams& bike,
                         const PowerPlan& plan, const SimulationOptions& options);

std::string trajectory_to_csv(const Trajectory& traj);

// Writes value_stage0.csv and policy.csv (every stage) into `dir`.
void dump_tables(const DpSolution& sol, const std::string& dir);

}  // namespace pacing
