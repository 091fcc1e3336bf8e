#include <cmath>
#include <random>

#include "doctest.h"
#include "pacing/solver.hpp"
#include "support/synthetic.hpp"

using namespace pacing;
using doctest::Approx;

namespace {

RiderParams random_rider(std::mt19937& rng) {
  std::uniform_real_distribution<double> cp(150, 350), awc(4000, 20000), a(0.01, 0.3),
      alpha(0.01, 0.08), aw(0.0, 0.02), om(120, 180), mass(45, 100);
  RiderValues v;
  v.cp = cp(rng);
  v.awc = awc(rng);
  v.rec_a = a(rng);
  v.rec_b = v.cp * (1.0 - v.rec_a) - 5.0;
  v.alpha = alpha(rng);
  v.alpha_omega = aw(rng);
  v.omega_max_f = om(rng);
  v.mass_rider = mass(rng);
  return RiderParams(v);
}

Course random_course(std::mt19937& rng, double length) {
  std::uniform_real_distribution<double> dz(-25, 25);
  std::vector<ProfilePoint> pts{{0.0, 100.0}};
  for (double s = 250.0; s <= length; s += 250.0) pts.push_back({s, pts.back().z + dz(rng)});
  return resample(Course(pts), 25.0);
}

// Cost of one input at a node, recomputed from the public pieces.
double cost_of(const DpSolution& sol, const Course& c, int stage, int iv, int iw, double u,
               const RiderParams& r, const BikeEnvParams& b) {
  const auto& g = sol.grid();
  const SegmentModel m(c.grade(stage), b);
  const auto adv = m.advance(g.v(iv), u, c.ds(), sol.config().max_substep_dt);
  if (adv.stalled || !g.bracket_v(adv.v)) return INFINITY;
  const double w_next = g.w(iw) + adv.dt * dw_dt(u, r);
  if (!g.bracket_w(w_next)) return INFINITY;
  return adv.dt + sol.value_at(stage + 1, adv.v, std::min(w_next, r.awc()));
}

}  // namespace

TEST_CASE("parabola roots and vertex on random riders") {
  std::mt19937 rng(11);
  for (int i = 0; i < 1000; ++i) {
    const auto r = random_rider(rng);
    const double w = std::uniform_real_distribution<double>(0.0, r.awc())(rng);
    const double om = omega_max(w, r);
    REQUIRE(p_max_cadence(0.0, w, r) == 0.0);
    REQUIRE(std::abs(p_max_cadence(om, w, r)) <= 1e-9 * p_peak(w, r));
    REQUIRE(p_max_cadence(om / 2.0, w, r) == Approx(p_peak(w, r)).epsilon(1e-12));
    const double x = std::uniform_real_distribution<double>(0.0, 1.5 * om)(rng);
    REQUIRE(p_max_cadence(x, w, r) >= 0.0);
    REQUIRE(p_max_cadence(x, w, r) <= p_peak(w, r) * (1 + 1e-12));
  }
}

TEST_CASE("fatigue rate signs and slopes") {
  std::mt19937 rng(12);
  for (int i = 0; i < 1000; ++i) {
    const auto r = random_rider(rng);
    const double above = r.cp() + std::uniform_real_distribution<double>(0.1, 300)(rng);
    const double below = std::uniform_real_distribution<double>(0.0, r.cp() - 0.1)(rng);
    REQUIRE(dw_dt(above, r) < 0.0);
    REQUIRE(dw_dt(below, r) > 0.0);
    REQUIRE(dw_dt(r.cp(), r) == 0.0);
    REQUIRE((dw_dt(above + 1.0, r) - dw_dt(above, r)) == Approx(-1.0));
    if (below + 1.0 < r.cp()) {
      REQUIRE((dw_dt(below + 1.0, r) - dw_dt(below, r)) == Approx(-r.rec_a()));
    }
    REQUIRE(p_peak(0.0, r) <= p_peak(r.awc(), r));
    REQUIRE(omega_max(0.0, r) <= omega_max(r.awc(), r));
  }
}

TEST_CASE("maximal power equals the gear-wise brute force") {
  std::mt19937 rng(13);
  const RiderParams r(synth::table_row(14));
  const auto b = default_bike(r);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::uniform_real_distribution<double>(0.5, 25.0)(rng);
    const double w = std::uniform_real_distribution<double>(0.0, r.awc())(rng);
    double brute = 0.0;
    for (double g : b.gears) {
      const double rpm = v / (g * b.r_rear) * 60.0 / (2.0 * M_PI);
      brute = std::max(brute, p_max_cadence(rpm, w, r));
    }
    REQUIRE(u_max_velocity(v, w, r, b) == Approx(brute).epsilon(1e-12));
  }
}

TEST_CASE("cruise power is a fixed point of the step") {
  std::mt19937 rng(14);
  const RiderParams r(synth::table_row(14));
  const auto b = default_bike(r);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::uniform_real_distribution<double>(1.0, 20.0)(rng);
    const double th = std::uniform_real_distribution<double>(-0.05, 0.1)(rng);
    for (Dynamics d : {Dynamics::kRoad, Dynamics::kComputrainer}) {
      const double u = u_cruise(v, th, b, d);
      if (u < 0.0) continue;
      const auto res = step({0.0, v, 0.0}, 100.0, u, th, 10.0, r, b, d);
      REQUIRE(res.state.v == Approx(v).epsilon(1e-13));
    }
  }
}

TEST_CASE("advance moves speed toward equilibrium without overshoot") {
  std::mt19937 rng(6);
  const RiderParams r(synth::table_row(14));
  const auto b = default_bike(r);
  for (int i = 0; i < 1000; ++i) {
    const double v = std::uniform_real_distribution<double>(0.5, 20.0)(rng);
    const double u = std::uniform_real_distribution<double>(0.0, 900.0)(rng);
    const double th = std::uniform_real_distribution<double>(-0.08, 0.12)(rng);
    const double ds = std::uniform_real_distribution<double>(1.0, 50.0)(rng);
    for (Dynamics d : {Dynamics::kRoad, Dynamics::kComputrainer}) {
      const SegmentModel m(th, b, d);
      const auto adv = m.advance(v, u, ds, 1.0);
      if (adv.stalled) {
        CHECK(m.accel(v, u) < 0.0);
        continue;
      }
      // Speed where accel vanishes; accel is decreasing in v.
      double lo = 1e-6, hi = 200.0;
      for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (m.accel(mid, u) > 0.0 ? lo : hi) = mid;
      }
      const double v_eq = lo;
      if (v <= v_eq) {
        CHECK(adv.v >= v - 1e-9);
        CHECK(adv.v <= v_eq * 1.25 + 1e-9);
      } else {
        CHECK(adv.v <= v + 1e-9);
        CHECK(adv.v >= v_eq * 0.75 - 1e-9);
      }
      CHECK(adv.dt > 0.0);
    }
  }
}

TEST_CASE("pushing gently near standstill on a climb stays slow") {
  const RiderParams r(synth::table_row(14));
  const SegmentModel m(std::atan(0.05), default_bike(r));
  const auto adv = m.advance(3.62, 5.0, 25.0, 1.0);
  CHECK((adv.stalled || adv.v < 3.62));
  if (!adv.stalled) CHECK(adv.dt > 25.0 / 3.62);
}

TEST_CASE("accel is increasing in power and decreasing in speed") {
  const RiderParams r(synth::table_row(14));
  const auto b = default_bike(r);
  for (double v = 1.0; v <= 20.0; v += 0.5) {
    for (double u = 0.0; u <= 600.0; u += 50.0) {
      CHECK(accel(v, u + 1.0, 0.01, b) > accel(v, u, 0.01, b));
      CHECK(accel(v + 0.01, u, 0.01, b) < accel(v, u, 0.01, b));
    }
  }
}

TEST_CASE("value function: monotone, Bellman consistent, band-respecting trajectories") {
  std::mt19937 rng(15);
  const RiderParams r(synth::table_row(14));
  const auto b = default_bike(r);
  DpConfig cfg;
  cfg.ds = 25.0;
  cfg.n_v = 30;
  cfg.n_w = 40;
  cfg.reg_weight = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    const auto course = random_course(rng, 1500.0);
    const auto sol = backward_sweep(course, r, b, cfg);
    const auto& g = sol.grid();
    std::uniform_int_distribution<int> pick_v(0, g.n_v() - 1), pick_w(0, g.n_w() - 1),
        pick_s(0, sol.stages() - 1);

    // One interpolation cell of slack: the value of a neighbouring node.
    for (int st = 0; st < sol.stages(); st += 10) {
      for (int k = 0; k < 100; ++k) {
        int v1 = pick_v(rng), v2 = pick_v(rng), w1 = pick_w(rng), w2 = pick_w(rng);
        if (v1 > v2) std::swap(v1, v2);
        if (w1 > w2) std::swap(w1, w2);
        const double lo = sol.value(st, v1, w1);
        const double hi = sol.value(st, v2, w2);
        if (std::isinf(lo) || std::isinf(hi)) continue;
        const double tol = 2.0 * cfg.ds * g.dv() / (g.v(v1) * g.v(v1));
        CHECK(hi <= lo + tol);
      }
    }

    int checked = 0;
    for (int k = 0; k < 1000; ++k) {
      const int st = pick_s(rng), iv = pick_v(rng), iw = pick_w(rng);
      const double val = sol.value(st, iv, iw);
      if (std::isinf(val)) continue;
      double best = INFINITY;
      for (const auto& in : admissible_inputs(g.v(iv), g.w(iw), course.grade(st), r, b)) {
        const double c = cost_of(sol, course, st, iv, iw, in.u, r, b);
        CHECK(val <= c + 1e-9);
        best = std::min(best, c);
      }
      CHECK(best == Approx(val).epsilon(1e-12));
      const Mode m = sol.policy(st, iv, iw);
      for (const auto& in : admissible_inputs(g.v(iv), g.w(iw), course.grade(st), r, b)) {
        if (in.mode == m) CHECK(cost_of(sol, course, st, iv, iw, in.u, r, b) == Approx(val).epsilon(1e-12));
      }
      ++checked;
    }
    CHECK(checked > 300);

    const auto traj = forward_pass(sol, course, r, b);
    for (const auto& p : traj.samples) {
      REQUIRE(p.w >= 0.0);
      REQUIRE(p.w <= r.awc());
    }
  }
}
