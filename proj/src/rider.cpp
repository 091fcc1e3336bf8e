#include "pacing/rider.hpp"

#include <cmath>

#include "pacing/errors.hpp"
#include "pacing/kv_file.hpp"

namespace pacing {
namespace {

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError("rider: " + msg);
}

void check_energy(double w, const RiderParams& p) {
  if (!(w >= 0.0 && w <= p.awc())) {
    throw ValidationError("remaining energy " + std::to_string(w) + " J outside [0, awc]");
  }
}

}  // namespace

RiderParams::RiderParams(const RiderValues& v) : v_(v) {
  require(std::isfinite(v.cp) && v.cp > 0.0, "cp must be > 0");
  require(std::isfinite(v.awc) && v.awc > 0.0, "awc must be > 0");
  require(std::isfinite(v.mass_rider) && v.mass_rider > 0.0, "mass_rider must be > 0");
  require(v.rec_a > 0.0 && v.rec_a < 1.0, "rec_a must lie in (0, 1)");
  require(std::isfinite(v.rec_b) && v.rec_b < v.cp, "rec_b must be below cp");
  require(std::isfinite(v.alpha) && v.alpha >= 0.0, "alpha must be >= 0");
  require(std::isfinite(v.alpha_omega) && v.alpha_omega >= 0.0, "alpha_omega must be >= 0");
  require(std::isfinite(v.omega_max_f) && v.omega_max_f > 0.0, "omega_max_f must be > 0");
}

EnergyState::EnergyState(double w, const RiderParams& rider) : w_(w) { check_energy(w, rider); }

double dw_dt(double u, const RiderParams& p) {
  if (!(u >= 0.0)) throw ValidationError("power must be >= 0");
  if (u >= p.cp()) return -(u - p.cp());
  return -((p.rec_a() * u + p.rec_b()) - p.cp());
}

double adjusted_power(double u, const RiderParams& p) {
  if (!(u >= 0.0 && u < p.cp())) {
    throw ValidationError("adjusted power is defined only for 0 <= u < cp");
  }
  return p.rec_a() * u + p.rec_b();
}

double p_peak(double w, const RiderParams& p) {
  check_energy(w, p);
  return p.alpha() * w + p.cp();
}

double omega_max(double w, const RiderParams& p) {
  check_energy(w, p);
  return p.alpha_omega() * w + p.omega_max_f();
}

double p_max_cadence(double omega_rpm, double w, const RiderParams& p) {
  if (!(omega_rpm >= 0.0)) throw ValidationError("cadence must be >= 0");
  const double peak = p_peak(w, p);
  const double top = omega_max(w, p);
  if (omega_rpm >= top) return 0.0;
  const double x = omega_rpm / top;
  // -(4P/W^2) w^2 + (4P/W) w, written in normalized cadence.
  return 4.0 * peak * x * (1.0 - x);
}

RiderParams rider_from_kv(const KeyValueFile& kv) {
  RiderValues v;
  v.cp = kv.number("cp");
  v.awc = kv.number("awc");
  v.rec_a = kv.number("rec_a");
  v.rec_b = kv.number("rec_b");
  v.alpha = kv.number("alpha");
  v.alpha_omega = kv.number("alpha_omega");
  v.omega_max_f = kv.number("omega_max_f");
  v.mass_rider = kv.number("mass_rider");
  return RiderParams(v);
}

RiderParams load_rider(const std::filesystem::path& path) {
  return rider_from_kv(KeyValueFile::load(path));
}

std::string rider_to_text(const RiderParams& p) {
  KeyValueFile kv;
  kv.set("cp", p.cp());
  kv.set("awc", p.awc());
  kv.set("rec_a", p.rec_a());
  kv.set("rec_b", p.rec_b());
  kv.set("alpha", p.alpha());
  kv.set("alpha_omega", p.alpha_omega());
  kv.set("omega_max_f", p.omega_max_f());
  kv.set("mass_rider", p.mass_rider());
  return kv.serialize();
}

}  // namespace pacing
