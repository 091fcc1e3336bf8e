#include "pacing/dynamics.hpp"

#include <charconv>
#include <numbers>
#include <set>
#include <sstream>

#include "pacing/errors.hpp"
#include "pacing/kv_file.hpp"

namespace pacing {
namespace {

std::vector<double> parse_number_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    const auto last = item.find_last_not_of(" \t");
    if (first == std::string::npos) throw ValidationError("bike: empty entry in '" + key + "'");
    item = item.substr(first, last - first + 1);
    // Accept either a plain ratio or "chainring/cog".
    const auto slash = item.find('/');
    auto parse = [&](const std::string& s) {
      double x = 0.0;
      const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
      if (ec != std::errc() || p != s.data() + s.size()) {
        throw ValidationError("bike: bad number '" + s + "' in '" + key + "'");
      }
      return x;
    };
    if (slash == std::string::npos) {
      out.push_back(parse(item));
    } else {
      const double den = parse(item.substr(slash + 1));
      if (den == 0.0) throw ValidationError("bike: zero denominator in '" + key + "'");
      out.push_back(parse(item.substr(0, slash)) / den);
    }
  }
  return out;
}

}  // namespace

std::vector<double> default_gear_ratios() {
  std::vector<double> gears;
  for (double ring : {50.0, 39.0, 30.0}) {
    for (double cog : {12.0, 13.0, 14.0, 15.0, 17.0, 19.0, 21.0}) gears.push_back(ring / cog);
  }
  return gears;
}

void BikeEnvParams::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ValidationError(std::string("bike: ") + msg);
  };
  require(mass_rider > 0.0, "rider mass must be > 0");
  require(mass_bike >= 0.0, "mass_bike must be >= 0");
  require(effective_mass_factor > 1.0, "effective mass must exceed total mass");
  require(c_d >= 0.0 && area >= 0.0 && rho >= 0.0 && c_r >= 0.0 && g >= 0.0,
          "coefficients must be >= 0");
  require(trainer_resistance >= 0.0, "trainer_resistance must be >= 0");
  require(r_rear > 0.0, "r_rear must be > 0");
  require(!gears.empty(), "gear table is empty");
  for (double gi : gears) require(gi > 0.0, "gear ratios must be > 0");
}

BikeEnvParams default_bike(const RiderParams& rider) {
  BikeEnvParams b;
  b.mass_rider = rider.mass_rider();
  b.validate();
  return b;
}

BikeEnvParams bike_from_kv(const KeyValueFile& kv, const RiderParams& rider) {
  static const std::set<std::string> known = {
      "mass_bike", "c_d", "area", "rho", "c_r", "g", "r_rear", "effective_mass_factor",
      "trainer_resistance", "gears", "chainrings", "cogs"};
  for (const auto& [key, value] : kv.entries()) {
    if (!known.count(key)) throw ValidationError("bike: unknown key '" + key + "'");
  }
  BikeEnvParams b;
  b.mass_rider = rider.mass_rider();
  b.mass_bike = kv.optional_number("mass_bike").value_or(b.mass_bike);
  b.c_d = kv.optional_number("c_d").value_or(b.c_d);
  b.area = kv.optional_number("area").value_or(b.area);
  b.rho = kv.optional_number("rho").value_or(b.rho);
  b.c_r = kv.optional_number("c_r").value_or(b.c_r);
  b.g = kv.optional_number("g").value_or(b.g);
  b.r_rear = kv.optional_number("r_rear").value_or(b.r_rear);
  b.effective_mass_factor =
      kv.optional_number("effective_mass_factor").value_or(b.effective_mass_factor);
  b.trainer_resistance = kv.optional_number("trainer_resistance").value_or(b.trainer_resistance);
  if (kv.has("gears")) {
    if (kv.has("chainrings") || kv.has("cogs")) {
      throw ValidationError("bike: give either 'gears' or 'chainrings' + 'cogs'");
    }
    b.gears = parse_number_list(kv.text("gears"), "gears");
  } else if (kv.has("chainrings") || kv.has("cogs")) {
    const auto rings = parse_number_list(kv.text("chainrings"), "chainrings");
    const auto cogs = parse_number_list(kv.text("cogs"), "cogs");
    b.gears.clear();
    for (double ring : rings) {
      for (double cog : cogs) {
        if (cog <= 0.0) throw ValidationError("bike: cog sizes must be > 0");
        b.gears.push_back(ring / cog);
      }
    }
  }
  b.validate();
  return b;
}

BikeEnvParams load_bike(const std::filesystem::path& path, const RiderParams& rider) {
  return bike_from_kv(KeyValueFile::load(path), rider);
}

const char* to_string(Dynamics d) {
  return d == Dynamics::kRoad ? "road" : "computrainer";
}

SegmentModel::SegmentModel(double theta, const BikeEnvParams& bike, Dynamics variant) {
  const double m = bike.effective_mass();
  inv_mass_ = 1.0 / m;
  const double grade_force =
      bike.total_mass() * bike.g * (std::sin(theta) + bike.c_r * std::cos(theta));
  if (variant == Dynamics::kRoad) {
    resist_const_ = grade_force / m;
    resist_quad_ = 0.5 * bike.drag_area() * bike.rho / m;
  } else {
    resist_const_ = (std::max(grade_force, 0.0) + bike.trainer_resistance) / m;
    resist_quad_ = 0.0;
  }
}

double accel(double v, double u, double theta, const BikeEnvParams& b) {
  if (!(v > 0.0)) throw ValidationError("accel: speed must be > 0");
  return SegmentModel(theta, b, Dynamics::kRoad).accel(v, u);
}

double accel_computrainer(double v, double u, double theta, const BikeEnvParams& b) {
  if (!(v > 0.0)) throw ValidationError("accel: speed must be > 0");
  return SegmentModel(theta, b, Dynamics::kComputrainer).accel(v, u);
}

double u_cruise(double v, double theta, const BikeEnvParams& b, Dynamics variant) {
  if (!(v > 0.0)) throw ValidationError("u_cruise: speed must be > 0");
  return SegmentModel(theta, b, variant).cruise_power(v);
}

double cadence_rpm(double v, double gear, const BikeEnvParams& b) {
  const double omega = v / (gear * b.r_rear);  // rad/s
  return omega * 60.0 / (2.0 * std::numbers::pi);
}

double u_max_velocity(double v, double w, const RiderParams& rider, const BikeEnvParams& bike) {
  if (!(v > 0.0)) throw ValidationError("u_max_velocity: speed must be > 0");
  double best = 0.0;
  for (double gear : bike.gears) {
    best = std::max(best, p_max_cadence(cadence_rpm(v, gear, bike), w, rider));
  }
  return best;
}

StepResult step(const KinematicState& state, double w, double u, double theta, double ds,
                const RiderParams& rider, const BikeEnvParams& bike, Dynamics variant,
                double max_dt) {
  if (!(state.v > 0.0)) throw ValidationError("step: speed must be > 0");
  if (!(ds > 0.0)) throw ValidationError("step: ds must be > 0");
  if (!(max_dt > 0.0)) throw ValidationError("step: max_dt must be > 0");
  const SegmentModel model(theta, bike, variant);
  const auto adv = model.advance(state.v, u, ds, max_dt);

  StepResult out;
  out.stalled = adv.stalled;
  out.state = {state.s + ds, adv.v, state.t + adv.dt};
  double next_w = w + adv.dt * dw_dt(u, rider);
  if (next_w < 0.0) {
    out.w_clamped_low = true;
    next_w = 0.0;
  } else if (next_w > rider.awc()) {
    out.w_clamped_high = true;
    next_w = rider.awc();
  }
  out.w = next_w;
  return out;
}

}  // namespace pacing
