#include "pacing/calibration.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "pacing/errors.hpp"
#include "pacing/kv_file.hpp"

namespace pacing {
namespace {

constexpr double kAllOutSeconds = 180.0;
constexpr double kCpWindowSeconds = 30.0;

std::size_t samples_in(double seconds, double dt) {
  return static_cast<std::size_t>(std::llround(seconds / dt));
}

bool parse_field(const std::string& s, double& out) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return false;
  const auto last = s.find_last_not_of(" \t\r");
  const auto [p, ec] = std::from_chars(s.data() + first, s.data() + last + 1, out);
  return ec == std::errc() && p == s.data() + last + 1 && std::isfinite(out);
}

// Left-rectangle area of (P - cp)+ over samples [first, last).
double work_above(const PowerTrace& trace, std::size_t first, std::size_t last, double cp) {
  double area = 0.0;
  for (std::size_t i = first; i < last; ++i) {
    area += std::max(trace.samples()[i].power - cp, 0.0) * trace.sample_dt();
  }
  return area;
}

}  // namespace

PowerTrace::PowerTrace(std::vector<TraceSample> samples, double sample_dt)
    : samples_(std::move(samples)), dt_(sample_dt) {
  if (!(dt_ > 0.0)) throw ValidationError("trace: sample_dt must be > 0");
  if (samples_.empty()) throw ValidationError("trace: no samples");
  has_cadence_ = samples_.front().cadence.has_value();
  const double tol = 1e-6 * dt_;
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const auto& s = samples_[i];
    if (!(s.power >= 0.0)) throw ValidationError("trace: negative power at sample " + std::to_string(i));
    if (s.cadence.has_value() != has_cadence_) {
      throw ValidationError("trace: cadence present on some samples only");
    }
    if (s.cadence && !(*s.cadence >= 0.0)) throw ValidationError("trace: negative cadence");
    if (i > 0) {
      const double expected = samples_.front().t + static_cast<double>(i) * dt_;
      if (std::abs(s.t - expected) > tol + 1e-9 * std::abs(expected)) {
        throw ValidationError("trace: non-uniform time step at sample " + std::to_string(i));
      }
    }
  }
}

std::pair<std::size_t, std::size_t> PowerTrace::window(double t0, double t1) const {
  const double origin = samples_.front().t;
  auto index = [&](double t) {
    const double k = std::ceil((t - origin) / dt_ - 1e-9);
    return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(samples_.size())));
  };
  return {index(t0), index(t1)};
}

PowerTrace parse_trace_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ValidationError(origin + ": empty trace");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  bool with_cadence = false;
  if (line == "time_s,power_w,cadence_rpm") {
    with_cadence = true;
  } else if (line != "time_s,power_w") {
    throw ValidationError(origin + ": header must be time_s,power_w[,cadence_rpm]");
  }
  std::vector<TraceSample> samples;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    TraceSample s;
    double cad = 0.0;
    const bool ok = cols.size() == (with_cadence ? 3U : 2U) && parse_field(cols[0], s.t) &&
                    parse_field(cols[1], s.power) && (!with_cadence || parse_field(cols[2], cad));
    if (!ok) throw ValidationError(origin + ":" + std::to_string(line_no) + ": malformed row");
    if (with_cadence) s.cadence = cad;
    samples.push_back(s);
  }
  if (samples.size() < 2) throw ValidationError(origin + ": need at least 2 samples");
  const double dt = samples[1].t - samples[0].t;
  return PowerTrace(std::move(samples), dt);
}

PowerTrace load_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_trace_csv(buf.str(), path.string());
}

std::string trace_to_csv(const PowerTrace& trace) {
  std::ostringstream os;
  os.precision(12);
  os << (trace.has_cadence() ? "time_s,power_w,cadence_rpm\n" : "time_s,power_w\n");
  for (const auto& s : trace.samples()) {
    os << s.t << ',' << s.power;
    if (s.cadence) os << ',' << *s.cadence;
    os << '\n';
  }
  return os.str();
}

IntervalTestRecord::IntervalTestRecord(PowerTrace trace_in, SegmentBoundaries b,
                                       std::optional<double> recovery_power_in)
    : trace(std::move(trace_in)), bounds(b), recovery_power(0.0) {
  const double start = trace.samples().front().t;
  const double end = start + trace.duration();
  const double tol = 1e-6 * trace.sample_dt();
  if (!(start - tol <= b.warmup_end && b.warmup_end < b.cp4_end && b.cp4_end < b.recovery_end &&
        b.recovery_end < b.mt_end && b.mt_end <= end + tol)) {
    throw ValidationError("interval record: segment boundaries must increase within the trace");
  }
  if (recovery_power_in) {
    recovery_power = *recovery_power_in;
  } else {
    const auto [first, last] = trace.window(b.cp4_end, b.recovery_end);
    if (first == last) throw ValidationError("interval record: empty recovery segment");
    double sum = 0.0;
    for (std::size_t i = first; i < last; ++i) sum += trace.samples()[i].power;
    recovery_power = sum / static_cast<double>(last - first);
  }
}

IntervalTestRecord load_interval_record(const std::filesystem::path& trace_csv,
                                        const std::filesystem::path& sidecar) {
  const auto kv = KeyValueFile::load(sidecar);
  SegmentBoundaries b;
  b.warmup_end = kv.number("warmup_end");
  b.cp4_end = kv.number("cp4_end");
  b.recovery_end = kv.number("recovery_end");
  b.mt_end = kv.number("mt_end");
  return IntervalTestRecord(load_trace(trace_csv), b, kv.optional_number("recovery_power"));
}

CpAwc estimate_cp_awc_3mt(const PowerTrace& trace) {
  const double dt = trace.sample_dt();
  const std::size_t effort = samples_in(kAllOutSeconds, dt);
  const std::size_t tail = samples_in(kCpWindowSeconds, dt);
  if (trace.size() < effort || effort == 0 || tail == 0) {
    throw ValidationError("3MT: trace shorter than 180 s");
  }
  const std::size_t begin = trace.size() - effort;
  const std::size_t tail_begin = trace.size() - tail;
  double sum = 0.0;
  for (std::size_t i = tail_begin; i < trace.size(); ++i) sum += trace.samples()[i].power;
  CpAwc out;
  out.cp = sum / static_cast<double>(tail);
  out.awc = work_above(trace, begin, trace.size(), out.cp);
  return out;
}

CpAwc estimate_cp_awc_all_out(const PowerTrace& trace) {
  const double dt = trace.sample_dt();
  const std::size_t effort = samples_in(kAllOutSeconds, dt);
  if (trace.size() < effort || effort < 3) throw ValidationError("all-out fit: trace shorter than 180 s");
  const std::size_t begin = trace.size() - effort;

  // With w_k = AWC - sum_{j<k} (P_j - CP) dt and P_k = CP + alpha w_k,
  //   P_k = (CP + alpha AWC) + alpha CP t_k - alpha E_k,   E_k = sum_{j<k} P_j dt,
  // which is linear in (1, t_k, E_k).
  double m[3][4] = {};
  double work = 0.0;
  for (std::size_t k = 0; k < effort; ++k) {
    const double p = trace.samples()[begin + k].power;
    const double x[3] = {1.0, static_cast<double>(k) * dt, work};
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) m[a][b] += x[a] * x[b];
      m[a][3] += x[a] * p;
    }
    work += p * dt;
  }
  for (int c = 0; c < 3; ++c) {
    int piv = c;
    for (int r = c + 1; r < 3; ++r) {
      if (std::abs(m[r][c]) > std::abs(m[piv][c])) piv = r;
    }
    std::swap(m[c], m[piv]);
    if (std::abs(m[c][c]) < 1e-12 * std::abs(m[0][0])) {
      throw ValidationError("all-out fit: power does not decay over the effort");
    }
    for (int r = 0; r < 3; ++r) {
      if (r == c) continue;
      const double f = m[r][c] / m[c][c];
      for (int k = c; k < 4; ++k) m[r][k] -= f * m[c][k];
    }
  }
  const double c0 = m[0][3] / m[0][0];
  const double c1 = m[1][3] / m[1][1];
  const double alpha = -m[2][3] / m[2][2];
  if (!(alpha > 0.0)) throw ValidationError("all-out fit: power does not decay over the effort");
  CpAwc out;
  out.cp = c1 / alpha;
  out.awc = (c0 - out.cp) / alpha;
  if (!(out.cp > 0.0 && out.awc > 0.0)) {
    throw ValidationError("all-out fit: trace is not an all-out effort");
  }
  return out;
}

double cp4_power(double cp, double awc) { return cp + awc / 240.0; }

double cp4_power(const RiderParams& p) { return cp4_power(p.cp(), p.awc()); }

double recovered_energy(const IntervalTestRecord& rec, double cp, double awc,
                        double tolerance_fraction) {
  const auto [c0, c1] = rec.trace.window(rec.bounds.warmup_end, rec.bounds.cp4_end);
  const auto [m0, m1] = rec.trace.window(rec.bounds.recovery_end, rec.bounds.mt_end);
  const double total = work_above(rec.trace, c0, c1, cp) + work_above(rec.trace, m0, m1, cp);
  const double recovered = total - awc;
  const double tol = tolerance_fraction * awc;
  if (recovered < -tol || recovered > awc + tol) {
    throw ValidationError("interval record inconsistent: recovered energy " +
                          std::to_string(recovered) + " J outside [0, awc]");
  }
  return recovered;
}

double adjusted_power_from_recovery(double w_rec, double t_rec, double cp) {
  if (!(t_rec > 0.0)) throw ValidationError("recovery duration must be > 0");
  return cp - w_rec / t_rec;
}

LineFit fit_recovery_model(const std::vector<RecoveryPoint>& points) {
  const auto n = static_cast<double>(points.size());
  if (points.size() < 2) throw ValidationError("recovery fit: need at least 2 points");
  double mx = 0.0, my = 0.0;
  for (const auto& p : points) {
    mx += p.power;
    my += p.adjusted;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (const auto& p : points) {
    sxx += (p.power - mx) * (p.power - mx);
    sxy += (p.power - mx) * (p.adjusted - my);
  }
  if (!(sxx > 0.0)) throw ValidationError("recovery fit: need at least 2 distinct powers");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss = 0.0;
  for (const auto& p : points) {
    const double r = p.adjusted - (fit.slope * p.power + fit.intercept);
    ss += r * r;
  }
  fit.rms_residual = std::sqrt(ss / n);
  return fit;
}

std::vector<RecoveryPoint> recovery_points(const std::vector<IntervalTestRecord>& records,
                                           double cp, double awc, double level_gap,
                                           double tolerance_fraction) {
  std::vector<RecoveryPoint> raw;
  raw.reserve(records.size());
  for (const auto& rec : records) {
    const double w_rec = recovered_energy(rec, cp, awc, tolerance_fraction);
    raw.push_back({rec.recovery_power,
                   adjusted_power_from_recovery(w_rec, rec.recovery_duration(), cp)});
  }
  std::sort(raw.begin(), raw.end(),
            [](const RecoveryPoint& a, const RecoveryPoint& b) { return a.power < b.power; });
  std::vector<RecoveryPoint> levels;
  std::size_t i = 0;
  while (i < raw.size()) {
    std::size_t j = i + 1;
    while (j < raw.size() && raw[j].power - raw[j - 1].power <= level_gap) ++j;
    RecoveryPoint mean;
    for (std::size_t k = i; k < j; ++k) {
      mean.power += raw[k].power;
      mean.adjusted += raw[k].adjusted;
    }
    mean.power /= static_cast<double>(j - i);
    mean.adjusted /= static_cast<double>(j - i);
    levels.push_back(mean);
    i = j;
  }
  return levels;
}

PmaxFit fit_pmax_params(const PowerTrace& trace, double cp, double awc,
                        std::optional<RecoveryLine> recovery, double tolerance_fraction) {
  if (!trace.has_cadence()) throw ValidationError("max-power fit: trace has no cadence");
  if (!(cp > 0.0 && awc > 0.0)) throw ValidationError("max-power fit: cp and awc must be > 0");
  const double dt = trace.sample_dt();
  const std::size_t effort = samples_in(kAllOutSeconds, dt);
  if (trace.size() < effort || effort == 0) throw ValidationError("max-power fit: trace shorter than 180 s");
  const std::size_t begin = trace.size() - effort;
  const double tol = tolerance_fraction * awc;

  PmaxFit fit;
  fit.w.reserve(effort);
  double w = awc;
  for (std::size_t i = begin; i < trace.size(); ++i) {
    if (w < -tol || w > awc + tol) {
      throw ValidationError("max-power fit: reconstructed energy leaves [0, awc]");
    }
    fit.w.push_back(std::clamp(w, 0.0, awc));
    const double p = trace.samples()[i].power;
    double rate = 0.0;
    if (p >= cp) {
      rate = -(p - cp);
    } else if (recovery) {
      rate = -((recovery->rec_a * p + recovery->rec_b) - cp);
    } else {
      rate = cp - p;
    }
    w += dt * rate;
  }

  // P - CP = alpha * w, intercept fixed at CP.
  double sww = 0.0, swp = 0.0;
  for (std::size_t k = 0; k < effort; ++k) {
    const double wk = fit.w[k];
    sww += wk * wk;
    swp += wk * (trace.samples()[begin + k].power - cp);
  }
  fit.alpha = sww > 0.0 ? swp / sww : 0.0;

  // 2 * cadence = alpha_omega * w + omega_max_f.
  const auto n = static_cast<double>(effort);
  double mw = 0.0, mc = 0.0;
  for (std::size_t k = 0; k < effort; ++k) {
    mw += fit.w[k];
    mc += 2.0 * *trace.samples()[begin + k].cadence;
  }
  mw /= n;
  mc /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < effort; ++k) {
    const double dx = fit.w[k] - mw;
    sxx += dx * dx;
    sxy += dx * (2.0 * *trace.samples()[begin + k].cadence - mc);
  }
  if (sxx > 1e-12 * std::max(1.0, mw * mw) * n) {
    fit.alpha_omega = sxy / sxx;
    fit.omega_max_f = mc - fit.alpha_omega * mw;
  } else {
    fit.degenerate = true;
    fit.alpha_omega = 0.0;
    fit.omega_max_f = mc;
  }

  double sp = 0.0, sc = 0.0;
  for (std::size_t k = 0; k < effort; ++k) {
    const auto& s = trace.samples()[begin + k];
    const double rp = s.power - (fit.alpha * fit.w[k] + cp);
    const double rc = 2.0 * *s.cadence - (fit.alpha_omega * fit.w[k] + fit.omega_max_f);
    sp += rp * rp;
    sc += rc * rc;
  }
  fit.power_rms = std::sqrt(sp / n);
  fit.cadence_rms = std::sqrt(sc / n);
  return fit;
}

}  // namespace pacing
