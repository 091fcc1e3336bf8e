#pragma once

// Forward generators for laboratory traces. Kept out of the library so the
// calibration tests check the estimators against an independent model.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "pacing/calibration.hpp"
#include "pacing/rider.hpp"

namespace synth {

inline pacing::RiderValues table_row(int subject) {
  // cp, awc, rec_a, rec_b, alpha, alpha_omega, omega_max_f, mass
  switch (subject) {
    case 6: return {269, 12030, 0.11, 237.5, 0.037, 0.017, 139, 79};
    case 9: return {233, 10100, 0.09, 204.5, 0.036, 0.014, 158, 63};
    case 11: return {335, 15092, 0.08, 300.9, 0.039, 0.01, 163, 95};
    case 12: return {217, 5637, 0.12, 196.5, 0.046, 0.009, 142, 70};
    case 14: return {242, 7841, 0.08, 222.5, 0.044, 0.008, 164, 74};
    case 16: return {206, 9137, 0.2, 167.5, 0.025, 0.007, 154, 51};
  }
  return {};
}

inline const int kSubjects[] = {6, 9, 11, 12, 14, 16};

// All-out effort at the vertex of the power-cadence parabola: P = CP + alpha w,
// cadence = Omega(w) / 2, w drained by P - CP each sample.
inline std::vector<pacing::TraceSample> all_out(const pacing::RiderValues& r, double w0,
                                                double duration, double dt, double t0,
                                                bool cadence, double* w_end = nullptr) {
  std::vector<pacing::TraceSample> out;
  const int n = static_cast<int>(std::lround(duration / dt));
  double w = w0;
  for (int k = 0; k < n; ++k) {
    const double p = r.cp + r.alpha * w;
    pacing::TraceSample s{t0 + k * dt, p, std::nullopt};
    if (cadence) s.cadence = 0.5 * (r.alpha_omega * w + r.omega_max_f);
    out.push_back(s);
    w -= (p - r.cp) * dt;
  }
  if (w_end) *w_end = w;
  return out;
}

// Optional constant lead-in (below CP) followed by a 180 s all-out effort.
inline pacing::PowerTrace three_minute_test(const pacing::RiderValues& r, double dt = 1.0,
                                            double lead_in = 0.0, bool cadence = true) {
  std::vector<pacing::TraceSample> s;
  const int n_lead = static_cast<int>(std::lround(lead_in / dt));
  for (int k = 0; k < n_lead; ++k) {
    pacing::TraceSample x{k * dt, 100.0, std::nullopt};
    if (cadence) x.cadence = 80.0;
    s.push_back(x);
  }
  auto effort = all_out(r, r.awc, 180.0, dt, n_lead * dt, cadence);
  s.insert(s.end(), effort.begin(), effort.end());
  return pacing::PowerTrace(std::move(s), dt);
}

// Piecewise-constant trace from (power, seconds) blocks.
inline pacing::PowerTrace blocks(const std::vector<std::pair<double, double>>& parts,
                                 double dt = 1.0) {
  std::vector<pacing::TraceSample> s;
  double t = 0.0;
  for (const auto& [p, dur] : parts) {
    const int n = static_cast<int>(std::lround(dur / dt));
    for (int k = 0; k < n; ++k) {
      s.push_back({t, p, std::nullopt});
      t += dt;
    }
  }
  return pacing::PowerTrace(std::move(s), dt);
}

struct IntervalSetup {
  double cp = 0.0;
  double awc = 0.0;
  double recovery_power = 0.0;
  double adjusted_power = 0.0;  // sets the recovery rate cp - adjusted
  double recovery_duration = 0.0;
  double warmup = 600.0;
  double warmup_power = 100.0;
};

// Warm-up, CP4 bout (half of awc in 120 s), recovery, then a closing 180 s
// effort at the constant power that exhausts what is left. Returns the
// record and the energy restored during recovery.
inline pacing::IntervalTestRecord interval_record(const IntervalSetup& setup,
                                                  double* restored = nullptr) {
  const double cp4 = setup.cp + setup.awc / 240.0;
  double w = setup.awc / 2.0;
  const double gained = std::min(setup.awc - w, (setup.cp - setup.adjusted_power) * setup.recovery_duration);
  w += gained;
  if (restored) *restored = gained;
  const double closing = setup.cp + w / 180.0;
  auto trace = blocks({{setup.warmup_power, setup.warmup},
                       {cp4, 120.0},
                       {setup.recovery_power, setup.recovery_duration},
                       {closing, 180.0}});
  pacing::SegmentBoundaries b{setup.warmup, setup.warmup + 120.0,
                              setup.warmup + 120.0 + setup.recovery_duration,
                              setup.warmup + 300.0 + setup.recovery_duration};
  return pacing::IntervalTestRecord(std::move(trace), b, setup.recovery_power);
}

}  // namespace synth
