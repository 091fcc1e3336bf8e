#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "pacing/rider.hpp"

namespace pacing {

class KeyValueFile;

// Labeled defaults for a typical road bike; none of them is a measured value.
std::vector<double> default_gear_ratios();

/// Bicycle, rider mass and environment constants for the longitudinal model.
///
/// `gears` holds ratios g = chainring/cog so that v = g * r_rear * omega with
/// omega in rad/s. The rider's mass is carried here because every force term
/// depends on the combined mass.
struct BikeEnvParams {
  double mass_rider = 0.0;  // kg, copied from RiderParams
  double mass_bike = 8.0;   // kg
  double c_d = 0.8;
  double area = 0.4;  // m^2
  double rho = 1.2;   // kg/m^3
  double c_r = 0.004;
  double g = 9.81;
  double r_rear = 0.335;  // m
  double effective_mass_factor = 1.014;
  double trainer_resistance = 15.5;  // N, laboratory trainer variant only
  std::vector<double> gears = default_gear_ratios();

  double total_mass() const { return mass_rider + mass_bike; }
  double effective_mass() const { return effective_mass_factor * total_mass(); }
  double drag_area() const { return c_d * area; }

  void validate() const;
};

BikeEnvParams default_bike(const RiderParams& rider);
BikeEnvParams bike_from_kv(const KeyValueFile& kv, const RiderParams& rider);
BikeEnvParams load_bike(const std::filesystem::path& path, const RiderParams& rider);

enum class Dynamics { kRoad, kComputrainer };

const char* to_string(Dynamics d);

struct KinematicState {
  double s = 0.0;  // m
  double v = 0.0;  // m/s
  double t = 0.0;  // s
};

// Longitudinal model on one road segment, reduced to
//   dv/dt = u / (m v) - resist_const - resist_quad * v^2.
// Both variants fit this shape: the trainer variant has no quadratic term.
class SegmentModel {
 public:
  SegmentModel(double theta, const BikeEnvParams& bike, Dynamics variant = Dynamics::kRoad);

  double accel(double v, double u) const {
    return u * inv_mass_ / v - resist_const_ - resist_quad_ * v * v;
  }
  double cruise_power(double v) const {
    return v * (resist_const_ + resist_quad_ * v * v) / inv_mass_;
  }

  struct Advance {
    double v = 0.0;   // speed at segment end
    double dt = 0.0;  // elapsed time
    bool stalled = false;
  };

  // Zero-order hold of `u` over `ds` metres. Uses explicit Euler steps of the
  // distance-domain equations whose duration never exceeds `max_dt`; a single
  // step (the plain discretization) whenever ds / v <= max_dt and the speed
  // changes by less than a quarter. Larger relative changes are split further,
  // since u / (m v) makes Euler overshoot near standstill.
  Advance advance(double v, double u, double ds, double max_dt) const {
    Advance out;
    double remaining = ds;
    double speed = v;
    while (remaining > 0.0) {
      if (speed < kStallSpeed) {
        out.stalled = true;
        break;
      }
      double h = std::min(remaining, speed * max_dt);
      if (remaining - h <= 1e-9 * ds) h = remaining;
      double dv = h / speed * accel(speed, u);
      while (std::abs(dv) > kMaxRelativeChange * speed) {
        h *= 0.5;
        dv = h / speed * accel(speed, u);
      }
      out.dt += h / speed;
      speed += dv;
      remaining -= h;
    }
    out.v = speed;
    return out;
  }

  static constexpr double kStallSpeed = 1e-3;          // m/s
  static constexpr double kMaxRelativeChange = 0.25;

 private:
  double inv_mass_;
  double resist_const_;
  double resist_quad_;
};

// dv/dt on the open road.
double accel(double v, double u, double theta, const BikeEnvParams& b);

// dv/dt on the laboratory trainer: no drag, no downhill assist, constant
// calibrated resistance.
double accel_computrainer(double v, double u, double theta, const BikeEnvParams& b);

// Power that holds speed v constant on grade theta. Negative on descents
// steep enough to accelerate the bike unpowered.
double u_cruise(double v, double theta, const BikeEnvParams& b, Dynamics variant = Dynamics::kRoad);

// Pedal cadence in rpm for speed v in gear ratio `gear`.
double cadence_rpm(double v, double gear, const BikeEnvParams& b);

// Maximal pedal power at speed v and remaining energy w over all gears.
double u_max_velocity(double v, double w, const RiderParams& rider, const BikeEnvParams& bike);

struct StepResult {
  KinematicState state;
  double w = 0.0;
  bool w_clamped_low = false;   // would have gone below 0
  bool w_clamped_high = false;  // saturated at awc
  bool stalled = false;         // speed reached zero inside the segment
};

// Advances (s, v, t, w) over one distance step with power held at u.
StepResult step(const KinematicState& state, double w, double u, double theta, double ds,
                const RiderParams& rider, const BikeEnvParams& bike,
                Dynamics variant = Dynamics::kRoad, double max_dt = 1.0);

}  // namespace pacing
