#include "pacing/solver.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "pacing/errors.hpp"

namespace pacing {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Grid-relative slack for states that land on a boundary up to rounding.
constexpr double kEdgeSlack = 1e-9;

// Table of u_max_velocity at every node; it does not depend on the stage.
std::vector<double> max_power_table(const StateGrid& grid, const RiderParams& rider,
                                    const BikeEnvParams& bike) {
  std::vector<double> table(grid.nodes());
  for (int iv = 0; iv < grid.n_v(); ++iv) {
    for (int iw = 0; iw < grid.n_w(); ++iw) {
      table[grid.index(iv, iw)] = u_max_velocity(grid.v(iv), grid.w(iw), rider, bike);
    }
  }
  return table;
}

// Cost of landing at (v', w') on the next stage: bilinear expectation of the
// next stage's value plus the expected mode-switch penalty.
struct NextStage {
  const StateGrid* grid = nullptr;
  const double* value = nullptr;
  const std::uint8_t* policy = nullptr;  // null at the finish
  double reg_weight = 0.0;

  double landing_cost(const std::optional<StateGrid::Bracket>& bv, double w_next,
                      std::uint8_t mode) const {
    if (!bv) return kInf;
    const auto bw = grid->bracket_w(w_next);
    if (!bw) return kInf;
    const double wv[2] = {1.0 - bv->frac, bv->frac};
    const double ww[2] = {1.0 - bw->frac, bw->frac};
    double expected = 0.0;
    double switch_weight = 0.0;
    for (int a = 0; a < 2; ++a) {
      if (wv[a] == 0.0) continue;
      for (int b = 0; b < 2; ++b) {
        const double weight = wv[a] * ww[b];
        if (weight == 0.0) continue;
        const std::size_t idx = grid->index(bv->lo + a, bw->lo + b);
        const double val = value[idx];
        if (val == kInf) return kInf;
        expected += weight * val;
        if (policy != nullptr && policy[idx] != mode) switch_weight += weight;
      }
    }
    return expected + reg_weight * switch_weight;
  }
};

std::optional<StateGrid::Bracket> bracket_after(const StateGrid& grid,
                                                const SegmentModel::Advance& adv) {
  if (adv.stalled) return std::nullopt;
  return grid.bracket_v(adv.v);
}

template <typename RowFn>
void for_rows(int rows, int threads, RowFn&& fn) {
  if (threads <= 1 || rows < 2 * threads) {
    for (int r = 0; r < rows; ++r) fn(r);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(threads));
  for (int t = 0; t < threads; ++t) {
    const int begin = rows * t / threads;
    const int end = rows * (t + 1) / threads;
    pool.emplace_back([begin, end, &fn] {
      for (int r = begin; r < end; ++r) fn(r);
    });
  }
  for (auto& th : pool) th.join();
}

int thread_count(const DpConfig& cfg) {
  if (cfg.threads > 0) return cfg.threads;
  return std::max(1U, std::thread::hardware_concurrency());
}

// Per-row work for one stage writes value/policy (and power for the dense
// oracle) of its own row only.
struct SweepContext {
  const StateGrid* grid;
  const RiderParams* rider;
  const DpConfig* cfg;
  const std::vector<double>* u_max;
  const SegmentModel* model;
  NextStage next;
  double* value_out;
  std::uint8_t* policy_out;
  double* power_out;  // dense only
};

void solve_row_four_mode(int iv, const SweepContext& c) {
  const StateGrid& grid = *c.grid;
  const RiderParams& rider = *c.rider;
  const double ds = c.cfg->ds;
  const double max_dt = c.cfg->max_substep_dt;
  const double v = grid.v(iv);
  const double cruise = c.model->cruise_power(v);

  // Zero, CP and cruise powers do not depend on w: advance once per row.
  struct Fixed {
    SegmentModel::Advance adv;
    std::optional<StateGrid::Bracket> bv;
    double rate = 0.0;
  };
  std::array<Fixed, 3> fixed;
  const std::array<double, 3> fixed_u = {0.0, rider.cp(), cruise};
  for (int k = 0; k < 3; ++k) {
    if (k == 2 && cruise < 0.0) continue;
    fixed[k].adv = c.model->advance(v, fixed_u[k], ds, max_dt);
    fixed[k].bv = bracket_after(grid, fixed[k].adv);
    fixed[k].rate = dw_dt(fixed_u[k], rider);
  }

  for (int iw = 0; iw < grid.n_w(); ++iw) {
    const std::size_t node = grid.index(iv, iw);
    const double w = grid.w(iw);
    const double umax = (*c.u_max)[node];
    const ModePowers mp = mode_powers(rider.cp(), cruise, umax);
    double best = kInf;
    std::uint8_t best_mode = kNoPolicy;
    for (int k = 0; k < kModeCount; ++k) {
      if (!mp.admissible[k]) continue;
      double cost = kInf;
      const auto mode = static_cast<std::uint8_t>(k);
      if (k < 3) {
        const Fixed& f = fixed[k];
        cost = f.adv.dt + c.next.landing_cost(f.bv, w + f.adv.dt * f.rate, mode);
      } else {
        const auto adv = c.model->advance(v, umax, ds, max_dt);
        cost = adv.dt + c.next.landing_cost(bracket_after(grid, adv),
                                            w + adv.dt * dw_dt(umax, rider), mode);
      }
      if (cost < best) {
        best = cost;
        best_mode = mode;
      }
    }
    c.value_out[node] = best;
    c.policy_out[node] = best_mode;
  }
}

void solve_row_dense(int iv, const SweepContext& c) {
  const StateGrid& grid = *c.grid;
  const RiderParams& rider = *c.rider;
  const double ds = c.cfg->ds;
  const double max_dt = c.cfg->max_substep_dt;
  const int levels = *c.cfg->dense_n_u;
  const double v = grid.v(iv);
  const double cruise = c.model->cruise_power(v);

  std::vector<std::pair<double, std::uint8_t>> inputs;
  inputs.reserve(static_cast<std::size_t>(levels + kModeCount));
  for (int iw = 0; iw < grid.n_w(); ++iw) {
    const std::size_t node = grid.index(iv, iw);
    const double w = grid.w(iw);
    const double umax = (*c.u_max)[node];
    const ModePowers mp = mode_powers(rider.cp(), cruise, umax);
    inputs.clear();
    for (int k = 0; k < kModeCount; ++k) {
      if (mp.admissible[k]) inputs.emplace_back(mp.u[k], static_cast<std::uint8_t>(k));
    }
    for (int l = 0; l < levels; ++l) {
      const double u = umax * static_cast<double>(l) / static_cast<double>(levels - 1);
      inputs.emplace_back(u, static_cast<std::uint8_t>(Mode::kOther));
    }
    double best = kInf;
    double best_u = 0.0;
    std::uint8_t best_mode = kNoPolicy;
    for (const auto& [u, mode] : inputs) {
      const auto adv = c.model->advance(v, u, ds, max_dt);
      const double cost = adv.dt + c.next.landing_cost(bracket_after(grid, adv),
                                                       w + adv.dt * dw_dt(u, rider), mode);
      if (cost < best) {
        best = cost;
        best_u = u;
        best_mode = mode;
      }
    }
    c.value_out[node] = best;
    c.policy_out[node] = best_mode;
    c.power_out[node] = best_u;
  }
}

DpSolution run_sweep(const Course& course, const RiderParams& rider, const BikeEnvParams& bike,
                     const DpConfig& cfg, bool dense) {
  cfg.validate();
  bike.validate();
  if (course.ds() <= 0.0 || std::abs(course.ds() - cfg.ds) > 1e-9 * cfg.ds) {
    throw ValidationError("solver: course must be resampled at the configured ds");
  }
  if (dense && (!cfg.dense_n_u || *cfg.dense_n_u < 16)) {
    throw ValidationError("dense oracle: dense_n_u must be >= 16");
  }
  const StateGrid grid(cfg.v_min, cfg.v_max, cfg.n_v, rider.awc(), cfg.n_w);
  const int stages = course.segments();
  DpSolution sol(cfg, grid, stages, course_fingerprint(course));
  if (dense) sol.allocate_dense();

  const auto u_max = max_power_table(grid, rider, bike);
  const int threads = thread_count(cfg);

  // Rolling buffers when only stage 0 is kept.
  std::vector<double> rolling_next;
  std::vector<double> rolling_cur;
  if (!sol.has_all_values()) {
    rolling_next.assign(grid.nodes(), 0.0);
    rolling_cur.assign(grid.nodes(), kInf);
  }

  for (int i = stages - 1; i >= 0; --i) {
    const SegmentModel model(course.grade(i), bike, cfg.dynamics);
    SweepContext ctx{};
    ctx.grid = &grid;
    ctx.rider = &rider;
    ctx.cfg = &cfg;
    ctx.u_max = &u_max;
    ctx.model = &model;
    ctx.next.grid = &grid;
    ctx.next.reg_weight = cfg.reg_weight;
    ctx.next.value = sol.has_all_values() ? sol.stage_values(i + 1) : rolling_next.data();
    ctx.next.policy = i + 1 < stages ? sol.stage_policy(i + 1) : nullptr;
    ctx.value_out = sol.has_all_values() ? sol.stage_values(i) : rolling_cur.data();
    ctx.policy_out = sol.stage_policy(i);
    ctx.power_out = dense ? sol.stage_power(i) : nullptr;

    for_rows(grid.n_v(), threads, [&](int iv) {
      if (dense) {
        solve_row_dense(iv, ctx);
      } else {
        solve_row_four_mode(iv, ctx);
      }
    });

    const double* produced = ctx.value_out;
    const bool any_feasible =
        std::any_of(produced, produced + grid.nodes(), [](double x) { return x < kInf; });
    if (!any_feasible) {
      throw InfeasibleProblem("no feasible state at stage " + std::to_string(i), i);
    }
    if (!sol.has_all_values()) std::swap(rolling_cur, rolling_next);
  }

  auto& stage0 = sol.mutable_stage0();
  if (sol.has_all_values()) {
    stage0.assign(sol.stage_values(0), sol.stage_values(0) + grid.nodes());
  } else {
    stage0 = rolling_next;
  }

  const double v0 = cfg.initial_v();
  const double w0 = cfg.w0.value_or(rider.awc());
  if (!(sol.value_at(0, v0, w0) < kInf)) {
    throw InfeasibleProblem("no feasible input sequence from the initial state", 0);
  }
  return sol;
}

std::string format_fixed(double x, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, x);
  return buf;
}

}  // namespace

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::kZero:
      return "ZERO";
    case Mode::kCp:
      return "CP";
    case Mode::kCruise:
      return "CRUISE";
    case Mode::kMax:
      return "MAX";
    case Mode::kOther:
      return "OTHER";
  }
  return "OTHER";
}

int mode_number(Mode m) { return m == Mode::kOther ? 0 : static_cast<int>(m) + 1; }

std::vector<ModeInput> admissible_inputs(double v, double w, double theta, const RiderParams& rider,
                                         const BikeEnvParams& bike, Dynamics variant) {
  const double umax = u_max_velocity(v, w, rider, bike);
  const ModePowers mp = mode_powers(rider.cp(), u_cruise(v, theta, bike, variant), umax);
  std::vector<ModeInput> out;
  for (int k = 0; k < kModeCount; ++k) {
    if (mp.admissible[k]) out.push_back({static_cast<Mode>(k), mp.u[k]});
  }
  return out;
}

void DpConfig::validate() const {
  auto require = [](bool ok, const char* msg) {
    if (!ok) throw ValidationError(std::string("dp config: ") + msg);
  };
  require(ds > 0.0, "ds must be > 0");
  require(v_min > 0.0, "v_min must be > 0");
  require(v_max > v_min, "v_max must exceed v_min");
  require(n_v >= 2 && n_w >= 2, "grids need at least 2 nodes");
  require(reg_weight >= 0.0, "reg_weight must be >= 0");
  require(max_substep_dt > 0.0, "max_substep_dt must be > 0");
  require(!dense_n_u || *dense_n_u >= 2, "dense_n_u must be >= 2");
  require(!v0 || (*v0 >= v_min && *v0 <= v_max), "v0 must lie in [v_min, v_max]");
  require(!w0 || *w0 >= 0.0, "w0 must be >= 0");
  require(threads >= 0, "threads must be >= 0");
}

StateGrid::StateGrid(double v_min, double v_max, int n_v, double awc, int n_w)
    : v_min_(v_min), v_max_(v_max), awc_(awc), n_v_(n_v), n_w_(n_w) {
  if (!(v_min > 0.0 && v_max > v_min && n_v >= 2 && n_w >= 2 && awc > 0.0)) {
    throw ValidationError("state grid: invalid bounds or node counts");
  }
  dv_ = (v_max - v_min) / (n_v - 1);
  dw_ = awc / (n_w - 1);
}

std::optional<StateGrid::Bracket> StateGrid::bracket_v(double v) const {
  double x = (v - v_min_) / dv_;
  const double top = n_v_ - 1;
  if (!(x >= -kEdgeSlack && x <= top + kEdgeSlack)) return std::nullopt;
  x = std::clamp(x, 0.0, top);
  const int lo = std::min(static_cast<int>(x), n_v_ - 2);
  return Bracket{lo, x - lo};
}

std::optional<StateGrid::Bracket> StateGrid::bracket_w(double w) const {
  double x = w / dw_;
  if (!(x >= -kEdgeSlack)) return std::nullopt;
  x = std::clamp(x, 0.0, static_cast<double>(n_w_ - 1));
  const int lo = std::min(static_cast<int>(x), n_w_ - 2);
  return Bracket{lo, x - lo};
}

StateGrid::Bracket StateGrid::clamp_v(double v) const {
  return *bracket_v(std::clamp(v, v_min_, v_max_));
}

StateGrid::Bracket StateGrid::clamp_w(double w) const {
  return *bracket_w(std::clamp(w, 0.0, awc_));
}

DpSolution::DpSolution(DpConfig cfg, StateGrid grid, int stages, std::string course_fingerprint)
    : cfg_(std::move(cfg)), grid_(grid), stages_(stages), fingerprint_(std::move(course_fingerprint)) {
  if (stages_ < 1) throw ValidationError("solver: course has no segments");
  const std::size_t nodes = grid_.nodes();
  if (cfg_.keep_all_values) {
    values_.assign(offset(stages_ + 1), kInf);
    std::fill(values_.begin() + static_cast<std::ptrdiff_t>(offset(stages_)), values_.end(), 0.0);
  }
  policy_.assign(offset(stages_), kNoPolicy);
  stage0_.assign(nodes, kInf);
}

void DpSolution::allocate_dense() { power_.assign(offset(stages_), 0.0); }

double* DpSolution::stage_values(int stage) { return values_.data() + offset(stage); }
std::uint8_t* DpSolution::stage_policy(int stage) { return policy_.data() + offset(stage); }
double* DpSolution::stage_power(int stage) { return power_.data() + offset(stage); }

double DpSolution::value(int stage, int iv, int iw) const {
  if (stage < 0 || stage > stages_ || iv < 0 || iv >= grid_.n_v() || iw < 0 || iw >= grid_.n_w()) {
    throw std::out_of_range("value: index out of range");
  }
  if (stage == stages_) return 0.0;
  if (stage == 0) return stage0_[grid_.index(iv, iw)];
  if (values_.empty()) throw std::logic_error("value: intermediate stages were not kept");
  return values_[offset(stage) + grid_.index(iv, iw)];
}

double DpSolution::value_at(int stage, double v, double w) const {
  const auto bv = grid_.clamp_v(v);
  const auto bw = grid_.clamp_w(w);
  const double wv[2] = {1.0 - bv.frac, bv.frac};
  const double ww[2] = {1.0 - bw.frac, bw.frac};
  double out = 0.0;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double weight = wv[a] * ww[b];
      if (weight == 0.0) continue;
      const double val = value(stage, bv.lo + a, bw.lo + b);
      if (val == kInf) return kInf;
      out += weight * val;
    }
  }
  return out;
}

std::uint8_t DpSolution::policy_code(int stage, int iv, int iw) const {
  if (stage < 0 || stage >= stages_ || iv < 0 || iv >= grid_.n_v() || iw < 0 || iw >= grid_.n_w()) {
    throw std::out_of_range("policy: index out of range");
  }
  return policy_[offset(stage) + grid_.index(iv, iw)];
}

Mode DpSolution::policy(int stage, int iv, int iw) const {
  const std::uint8_t p = policy_code(stage, iv, iw);
  if (p == kNoPolicy) throw InfeasibleProblem("policy lookup at an infeasible node", stage);
  return static_cast<Mode>(p);
}

double DpSolution::policy_power(int stage, int iv, int iw) const {
  if (power_.empty()) throw std::logic_error("policy_power: not a dense solution");
  return power_.at(offset(stage) + grid_.index(iv, iw));
}

DpSolution backward_sweep(const Course& course, const RiderParams& rider, const BikeEnvParams& bike,
                          const DpConfig& cfg) {
  return run_sweep(course, rider, bike, cfg, false);
}

DpSolution dense_oracle(const Course& course, const RiderParams& rider, const BikeEnvParams& bike,
                        const DpConfig& cfg) {
  return run_sweep(course, rider, bike, cfg, true);
}

void compute_totals(Trajectory& traj) {
  auto& tot = traj.totals;
  const auto& s = traj.samples;
  const int clamps = tot.power_clamps;
  const int speed_clamps = tot.speed_clamps;
  tot = TrajectoryTotals{};
  tot.power_clamps = clamps;
  tot.speed_clamps = speed_clamps;
  if (s.empty()) return;
  tot.finish_time = s.back().t;
  tot.w_min = s.front().w;
  tot.w_max = s.front().w;
  double work = 0.0;
  double power_distance = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    tot.w_min = std::min(tot.w_min, s[i].w);
    tot.w_max = std::max(tot.w_max, s[i].w);
    if (i + 1 < s.size()) {
      work += s[i].u * (s[i + 1].t - s[i].t);
      power_distance += s[i].u * (s[i + 1].s - s[i].s);
      ++tot.mode_segments[static_cast<std::size_t>(s[i].mode)];
    }
  }
  tot.w_end = s.back().w;
  tot.avg_power = tot.finish_time > 0.0 ? work / tot.finish_time : 0.0;
  const double length = s.back().s - s.front().s;
  tot.avg_power_distance = length > 0.0 ? power_distance / length : 0.0;
}

Trajectory forward_pass(const DpSolution& sol, const Course& course, const RiderParams& rider,
                        const BikeEnvParams& bike, std::optional<double> v0_in,
                        std::optional<double> w0_in) {
  const DpConfig& cfg = sol.config();
  const StateGrid& grid = sol.grid();
  if (course.segments() != sol.stages() || course_fingerprint(course) != sol.course_fingerprint()) {
    throw ValidationError("forward pass: course does not match the solution");
  }
  double v = v0_in.value_or(cfg.initial_v());
  double w = w0_in.value_or(cfg.w0.value_or(rider.awc()));
  if (v < grid.v_min() || v > grid.v_max() || w < 0.0 || w > rider.awc()) {
    throw ValidationError("forward pass: initial state outside the grid");
  }
  if (!(sol.value_at(0, v, w) < kInf)) {
    throw InfeasibleProblem("no feasible input sequence from the initial state", 0);
  }

  Trajectory traj;
  traj.samples.reserve(static_cast<std::size_t>(sol.stages()) + 1);
  double t = 0.0;
  for (int i = 0; i < sol.stages(); ++i) {
    const double theta = course.grade(i);
    const double s = course.points()[static_cast<std::size_t>(i)].s;

    // Majority vote of the bracketing nodes that carry weight.
    const auto bv = grid.clamp_v(v);
    const auto bw = grid.clamp_w(w);
    const double wv[2] = {1.0 - bv.frac, bv.frac};
    const double ww[2] = {1.0 - bw.frac, bw.frac};
    std::array<int, kModeCount + 1> votes{};
    int total_votes = 0;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        if (wv[a] * ww[b] == 0.0) continue;
        const std::uint8_t code = sol.policy_code(i, bv.lo + a, bw.lo + b);
        if (code == kNoPolicy) continue;
        ++votes[code];
        ++total_votes;
      }
    }
    if (total_votes == 0) throw InfeasibleProblem("forward pass reached an infeasible node", i);
    int chosen = 0;
    for (int k = 1; k <= kModeCount; ++k) {
      if (votes[static_cast<std::size_t>(k)] > votes[static_cast<std::size_t>(chosen)]) chosen = k;
    }

    // Evaluate the chosen mode at the actual state; an inadmissible choice
    // falls back to the mode whose power the clamp lands on.
    const double umax = u_max_velocity(v, w, rider, bike);
    const ModePowers mp = mode_powers(rider.cp(), u_cruise(v, theta, bike, cfg.dynamics), umax);
    double u = 0.0;
    Mode mode = Mode::kZero;
    if (chosen == static_cast<int>(Mode::kOther)) {
      u = std::clamp(sol.policy_power(i, grid.clamp_v(v).lo, grid.clamp_w(w).lo), 0.0, umax);
      mode = Mode::kOther;
    } else {
      const double target = std::clamp(mp.u[static_cast<std::size_t>(chosen)], 0.0, umax);
      for (int k = 0; k < kModeCount; ++k) {
        if (mp.admissible[static_cast<std::size_t>(k)] && mp.u[static_cast<std::size_t>(k)] == target) {
          mode = static_cast<Mode>(k);
          u = target;
          break;
        }
      }
    }

    traj.samples.push_back({s, t, v, w, u, mode});
    const auto r = step({s, v, t}, w, u, theta, cfg.ds, rider, bike, cfg.dynamics, cfg.max_substep_dt);
    if (r.stalled) throw InfeasibleProblem("forward pass stalled", i);
    t = r.state.t;
    w = r.w;
    v = r.state.v;
    if (v < grid.v_min() || v > grid.v_max()) {
      v = std::clamp(v, grid.v_min(), grid.v_max());
      ++traj.totals.speed_clamps;
    }
  }
  const auto& last = traj.samples.back();
  traj.samples.push_back({course.length(), t, v, w, last.u, last.mode});
  compute_totals(traj);
  return traj;
}

double PowerPlan::power_at(double key) const {
  if (points.empty()) throw ValidationError("power plan is empty");
  const auto it = std::upper_bound(points.begin(), points.end(), key,
                                   [](double k, const auto& p) { return k < p.first; });
  if (it == points.begin()) return points.front().second;
  return std::prev(it)->second;
}

PowerPlan parse_power_plan(const std::string& csv_text, const std::string& origin) {
  std::istringstream in(csv_text);
  std::string header;
  if (!std::getline(in, header)) throw ValidationError(origin + ": empty plan");
  if (!header.empty() && header.back() == '\r') header.pop_back();

  // Either a two-column plan or a trajectory CSV (s_m and u_w columns used).
  std::vector<std::string> names;
  {
    std::stringstream hs(header);
    std::string cell;
    while (std::getline(hs, cell, ',')) names.push_back(cell);
  }
  PowerPlan plan;
  int key_col = -1;
  int u_col = -1;
  for (int c = 0; c < static_cast<int>(names.size()); ++c) {
    if (names[static_cast<std::size_t>(c)] == "s_m" && key_col < 0) {
      key_col = c;
      plan.axis = PowerPlan::Axis::kDistance;
    }
    if (names[static_cast<std::size_t>(c)] == "u_w") u_col = c;
  }
  if (key_col < 0) {
    for (int c = 0; c < static_cast<int>(names.size()); ++c) {
      if (names[static_cast<std::size_t>(c)] == "t_s") {
        key_col = c;
        plan.axis = PowerPlan::Axis::kTime;
      }
    }
  }
  if (key_col < 0 || u_col < 0) {
    throw ValidationError(origin + ": plan header needs s_m or t_s, and u_w");
  }

  std::string line;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    auto num = [&](int col) {
      if (col >= static_cast<int>(cols.size())) {
        throw ValidationError(origin + ":" + std::to_string(line_no) + ": missing column");
      }
      std::string c = cols[static_cast<std::size_t>(col)];
      while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
      double x = 0.0;
      const auto [p, ec] = std::from_chars(c.data(), c.data() + c.size(), x);
      if (ec != std::errc() || p != c.data() + c.size()) {
        throw ValidationError(origin + ":" + std::to_string(line_no) + ": bad number '" + c + "'");
      }
      return x;
    };
    const double key = num(key_col);
    const double u = num(u_col);
    if (u < 0.0) throw ValidationError(origin + ":" + std::to_string(line_no) + ": negative power");
    if (!plan.points.empty() && !(key > plan.points.back().first)) {
      throw ValidationError(origin + ":" + std::to_string(line_no) + ": keys must increase");
    }
    plan.points.emplace_back(key, u);
  }
  if (plan.points.empty()) throw ValidationError(origin + ": plan has no rows");
  return plan;
}

Trajectory simulate_plan(const Course& course, const RiderParams& rider, const BikeEnvParams& bike,
                         const PowerPlan& plan, const SimulationOptions& options) {
  if (course.ds() <= 0.0) throw ValidationError("simulate: course must be resampled");
  if (plan.points.empty()) throw ValidationError("simulate: empty plan");
  if (!(options.v0 > 0.0)) throw ValidationError("simulate: v0 must be > 0");
  if (plan.axis == PowerPlan::Axis::kDistance &&
      plan.last_key() < course.points()[static_cast<std::size_t>(course.segments() - 1)].s) {
    throw ValidationError("simulate: plan shorter than the course");
  }
  double v = options.v0;
  double w = options.w0.value_or(rider.awc());
  if (w < 0.0 || w > rider.awc()) throw ValidationError("simulate: w0 outside [0, awc]");
  double t = 0.0;
  Trajectory traj;
  traj.samples.reserve(static_cast<std::size_t>(course.segments()) + 1);
  for (int i = 0; i < course.segments(); ++i) {
    const double theta = course.grade(i);
    const double s = course.points()[static_cast<std::size_t>(i)].s;
    if (plan.axis == PowerPlan::Axis::kTime && t > plan.last_key()) {
      throw ValidationError("simulate: plan shorter than the course");
    }
    double u = plan.power_at(plan.axis == PowerPlan::Axis::kDistance ? s : t);
    const double umax = u_max_velocity(v, w, rider, bike);
    if (u > umax) {
      u = umax;
      ++traj.totals.power_clamps;
    }
    const ModePowers mp = mode_powers(rider.cp(), u_cruise(v, theta, bike, options.dynamics), umax);
    Mode mode = Mode::kOther;
    for (int k = 0; k < kModeCount; ++k) {
      if (mp.admissible[static_cast<std::size_t>(k)] && mp.u[static_cast<std::size_t>(k)] == u) {
        mode = static_cast<Mode>(k);
        break;
      }
    }
    traj.samples.push_back({s, t, v, w, u, mode});
    const auto r = step({s, v, t}, w, u, theta, course.ds(), rider, bike, options.dynamics,
                        options.max_substep_dt);
    if (r.stalled) throw ValidationError("simulate: rider stalls at s = " + std::to_string(s));
    t = r.state.t;
    v = r.state.v;
    w = r.w;
  }
  const auto& last = traj.samples.back();
  traj.samples.push_back({course.length(), t, v, w, last.u, last.mode});
  compute_totals(traj);
  return traj;
}

std::string trajectory_to_csv(const Trajectory& traj) {
  std::string out = "s_m,t_s,v_mps,w_j,u_w,mode\n";
  for (const auto& p : traj.samples) {
    out += format_fixed(p.s, 3) + ',' + format_fixed(p.t, 6) + ',' + format_fixed(p.v, 6) + ',' +
           format_fixed(p.w, 6) + ',' + format_fixed(p.u, 6) + ',' +
           std::to_string(mode_number(p.mode)) + '\n';
  }
  return out;
}

void dump_tables(const DpSolution& sol, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const StateGrid& grid = sol.grid();
  {
    std::ofstream out(fs::path(dir) / "value_stage0.csv");
    out << "v_mps,w_j,value_s\n";
    for (int iv = 0; iv < grid.n_v(); ++iv) {
      for (int iw = 0; iw < grid.n_w(); ++iw) {
        const double val = sol.value(0, iv, iw);
        out << format_fixed(grid.v(iv), 6) << ',' << format_fixed(grid.w(iw), 6) << ','
            << (val < kInf ? format_fixed(val, 6) : std::string("inf")) << '\n';
      }
    }
  }
  {
    // One row per (stage, speed node); one character per energy node.
    std::ofstream out(fs::path(dir) / "policy.csv");
    out << "stage,v_mps,modes\n";
    for (int i = 0; i < sol.stages(); ++i) {
      for (int iv = 0; iv < grid.n_v(); ++iv) {
        std::string modes(static_cast<std::size_t>(grid.n_w()), '-');
        for (int iw = 0; iw < grid.n_w(); ++iw) {
          const std::uint8_t code = sol.policy_code(i, iv, iw);
          if (code != kNoPolicy) {
            modes[static_cast<std::size_t>(iw)] =
                static_cast<char>('0' + mode_number(static_cast<Mode>(code)));
          }
        }
        out << i << ',' << format_fixed(grid.v(iv), 6) << ',' << modes << '\n';
      }
    }
  }
}

}  // namespace pacing
