#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pacing/rider.hpp"

namespace pacing {

struct TraceSample {
  double t = 0.0;  // s
  double power = 0.0;  // W
  std::optional<double> cadence;  // rpm
};

/// Uniformly sampled power (and optionally cadence) recording.
class PowerTrace {
 public:
  PowerTrace(std::vector<TraceSample> samples, double sample_dt);

  const std::vector<TraceSample>& samples() const { return samples_; }
  double sample_dt() const { return dt_; }
  std::size_t size() const { return samples_.size(); }
  double duration() const { return static_cast<double>(samples_.size()) * dt_; }
  bool has_cadence() const { return has_cadence_; }

  // Index range [first, last) of samples whose interval starts in [t0, t1).
  std::pair<std::size_t, std::size_t> window(double t0, double t1) const;

 private:
  std::vector<TraceSample> samples_;
  double dt_;
  bool has_cadence_;
};

PowerTrace parse_trace_csv(const std::string& text, const std::string& origin = "<csv>");
PowerTrace load_trace(const std::filesystem::path& path);
std::string trace_to_csv(const PowerTrace& trace);

struct SegmentBoundaries {
  double warmup_end = 0.0;
  double cp4_end = 0.0;
  double recovery_end = 0.0;
  double mt_end = 0.0;
};

/// One interval test: warm-up, CP4 bout, sub-CP recovery, closing 3MT.
struct IntervalTestRecord {
  IntervalTestRecord(PowerTrace trace, SegmentBoundaries bounds,
                     std::optional<double> recovery_power = std::nullopt);

  PowerTrace trace;
  SegmentBoundaries bounds;
  double recovery_power;  // realized mean over the recovery segment unless given

  double recovery_duration() const { return bounds.recovery_end - bounds.cp4_end; }
};

IntervalTestRecord load_interval_record(const std::filesystem::path& trace_csv,
                                        const std::filesystem::path& sidecar);

struct CpAwc {
  double cp = 0.0;
  double awc = 0.0;
};

// 3-minute all-out estimate over the final 180 s: CP is the mean of the last
// 30 s, AWC the left-rectangle area of power above that CP.
CpAwc estimate_cp_awc_3mt(const PowerTrace& trace);

// Fits the final 180 s to the vertex-tracking all-out model P = CP + alpha w,
// w drained by P - CP. Unbiased when the rider follows that model; the 3MT
// rule overestimates CP while alpha * 150 s is small.
CpAwc estimate_cp_awc_all_out(const PowerTrace& trace);

double cp4_power(double cp, double awc);
double cp4_power(const RiderParams& p);

// Work above CP over the CP4 bout and the closing 3MT, minus AWC. Throws when
// the result leaves [-tol, awc + tol], tol = tolerance_fraction * awc.
double recovered_energy(const IntervalTestRecord& rec, double cp, double awc,
                        double tolerance_fraction = 0.02);

double adjusted_power_from_recovery(double w_rec, double t_rec, double cp);

struct RecoveryPoint {
  double power = 0.0;     // applied recovery power, W
  double adjusted = 0.0;  // adjusted power, W
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double rms_residual = 0.0;
};

// Ordinary least squares of adjusted power on applied power.
LineFit fit_recovery_model(const std::vector<RecoveryPoint>& points);

// One averaged point per recovery power level. Records whose recovery powers
// lie within `level_gap` watts of each other share a level.
std::vector<RecoveryPoint> recovery_points(const std::vector<IntervalTestRecord>& records,
                                           double cp, double awc, double level_gap = 10.0,
                                           double tolerance_fraction = 0.02);

struct PmaxFit {
  double alpha = 0.0;
  double alpha_omega = 0.0;
  double omega_max_f = 0.0;
  double power_rms = 0.0;    // W
  double cadence_rms = 0.0;  // rpm, on 2 * cadence
  bool degenerate = false;   // w(t) constant: cadence slope undetermined, set to 0
  std::vector<double> w;     // reconstructed remaining energy per sample of the window
};

struct RecoveryLine {
  double rec_a = 0.0;
  double rec_b = 0.0;
};

// Post-hoc max-power fit on a 3MT with cadence, assuming the rider sits at the
// vertex of the power-cadence parabola throughout. w(t) is integrated forward
// from awc over the final 180 s; below CP the given recovery line is used, or
// plain CP - P when none is known.
PmaxFit fit_pmax_params(const PowerTrace& trace, double cp, double awc,
                        std::optional<RecoveryLine> recovery = std::nullopt,
                        double tolerance_fraction = 0.02);

}  // namespace pacing
