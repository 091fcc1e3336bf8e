#pragma once

#include <filesystem>
#include <string>

namespace pacing {

class KeyValueFile;

// Raw per-subject constants as they appear in a rider file. Units: W, J, W/W,
// W, 1/s, rpm/J, rpm, kg.
struct RiderValues {
  double cp = 0.0;
  double awc = 0.0;
  double rec_a = 0.0;
  double rec_b = 0.0;
  double alpha = 0.0;
  double alpha_omega = 0.0;
  double omega_max_f = 0.0;
  double mass_rider = 0.0;
};

/// Validated physiological constants of one rider.
///
/// Construction rejects non-positive CP/AWC/mass, a recovery slope outside
/// (0, 1), a recovery intercept at or above CP, negative max-power slopes and
/// a non-positive fatigued maximal cadence. Immutable afterwards.
class RiderParams {
 public:
  explicit RiderParams(const RiderValues& v);

  double cp() const { return v_.cp; }
  double awc() const { return v_.awc; }
  double rec_a() const { return v_.rec_a; }
  double rec_b() const { return v_.rec_b; }
  double alpha() const { return v_.alpha; }
  double alpha_omega() const { return v_.alpha_omega; }
  double omega_max_f() const { return v_.omega_max_f; }
  double mass_rider() const { return v_.mass_rider; }
  const RiderValues& values() const { return v_; }

  // True when every power in [0, CP) recovers energy, i.e. the adjusted
  // power line stays at or below CP across the whole recovery band.
  bool recovers_below_cp() const { return v_.rec_a * v_.cp + v_.rec_b <= v_.cp; }

 private:
  RiderValues v_;
};

/// Remaining anaerobic energy of a rider, kept inside [0, awc].
class EnergyState {
 public:
  EnergyState(double w, const RiderParams& rider);
  double w() const { return w_; }

 private:
  double w_;
};

// Rate of change of remaining anaerobic energy (J/s) at pedal power `u`.
// Fatigue branch for u >= CP, linear adjusted-power recovery below.
double dw_dt(double u, const RiderParams& p);

// Effective power governing recovery below CP: rec_a*u + rec_b.
double adjusted_power(double u, const RiderParams& p);

// Peak of the power-cadence parabola at remaining energy w.
double p_peak(double w, const RiderParams& p);

// Maximal cadence (rpm) at remaining energy w.
double omega_max(double w, const RiderParams& p);

// Maximal instantaneous power at cadence `omega_rpm` and remaining energy w.
// The parabola has roots at 0 and omega_max(w) and its vertex value is
// p_peak(w); cadences at or beyond omega_max(w) give 0.
double p_max_cadence(double omega_rpm, double w, const RiderParams& p);

RiderParams rider_from_kv(const KeyValueFile& kv);
RiderParams load_rider(const std::filesystem::path& path);
std::string rider_to_text(const RiderParams& p);

}  // namespace pacing
