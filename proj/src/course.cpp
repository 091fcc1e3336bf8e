#include "pacing/course.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "pacing/errors.hpp"

namespace pacing {
namespace {

constexpr double kEarthRadius = 6371000.0;

bool parse_double(const std::string& s, double& out) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return false;
  const auto last = s.find_last_not_of(" \t\r");
  const char* b = s.data() + first;
  const char* e = s.data() + last + 1;
  const auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e && std::isfinite(out);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

Course::Course(std::vector<ProfilePoint> points, double ds) : points_(std::move(points)), ds_(ds) {
  if (points_.size() < 2) throw ValidationError("course: need at least 2 points");
  if (points_.front().s != 0.0) throw ValidationError("course: first point must be at s = 0");
  grades_.reserve(points_.size() - 1);
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const double run = points_[i + 1].s - points_[i].s;
    if (!(run > 0.0)) throw ValidationError("course: distance must be strictly increasing");
    if (!std::isfinite(points_[i].z) || !std::isfinite(points_[i + 1].z)) {
      throw ValidationError("course: non-finite elevation");
    }
    grades_.push_back(std::atan((points_[i + 1].z - points_[i].z) / run));
  }
}

double Course::grade_at(double s) const {
  if (s < 0.0 || s > length()) throw ValidationError("course: s outside the course");
  const auto it = std::upper_bound(points_.begin(), points_.end(), s,
                                   [](double x, const ProfilePoint& p) { return x < p.s; });
  auto idx = static_cast<std::size_t>(it - points_.begin()) - 1;
  idx = std::min(idx, grades_.size() - 1);
  return grades_[idx];
}

double Course::total_climb() const {
  double climb = 0.0;
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    climb += std::max(points_[i + 1].z - points_[i].z, 0.0);
  }
  return climb;
}

Course parse_course_csv(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::vector<ProfilePoint> pts;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto comma = line.find(',');
    ProfilePoint p;
    const bool ok = comma != std::string::npos && parse_double(line.substr(0, comma), p.s) &&
                    parse_double(line.substr(comma + 1), p.z);
    if (!ok) {
      if (pts.empty() && line_no == 1) continue;  // header
      throw ValidationError(origin + ":" + std::to_string(line_no) + ": expected 'distance_m,elevation_m'");
    }
    pts.push_back(p);
  }
  if (pts.size() < 2) throw ValidationError(origin + ": need at least 2 points");
  return Course(std::move(pts));
}

double haversine_m(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg) {
  const double to_rad = std::numbers::pi / 180.0;
  const double dlat = (lat2_deg - lat1_deg) * to_rad;
  const double dlon = (lon2_deg - lon1_deg) * to_rad;
  const double a = std::sin(dlat / 2) * std::sin(dlat / 2) +
                   std::cos(lat1_deg * to_rad) * std::cos(lat2_deg * to_rad) *
                       std::sin(dlon / 2) * std::sin(dlon / 2);
  return 2.0 * kEarthRadius * std::asin(std::min(1.0, std::sqrt(a)));
}

Course parse_course_gpx(const std::string& text, const std::string& origin) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::read_xml(in, tree);
  } catch (const pt::xml_parser_error& e) {
    throw ValidationError(origin + ": malformed GPX: " + e.message());
  }
  const auto gpx = tree.get_child_optional("gpx");
  if (!gpx) throw ValidationError(origin + ": missing <gpx> root");

  std::vector<ProfilePoint> pts;
  double prev_lat = 0.0, prev_lon = 0.0;
  auto add = [&](const pt::ptree& trkpt) {
    double lat = 0.0, lon = 0.0, ele = 0.0;
    const auto lat_s = trkpt.get_optional<std::string>("<xmlattr>.lat");
    const auto lon_s = trkpt.get_optional<std::string>("<xmlattr>.lon");
    const auto ele_s = trkpt.get_optional<std::string>("ele");
    if (!lat_s || !lon_s || !ele_s || !parse_double(*lat_s, lat) || !parse_double(*lon_s, lon) ||
        !parse_double(*ele_s, ele)) {
      throw ValidationError(origin + ": trackpoint without numeric lat/lon/ele");
    }
    if (pts.empty()) {
      pts.push_back({0.0, ele});
    } else {
      const double d = haversine_m(prev_lat, prev_lon, lat, lon);
      if (d <= 0.0) return;  // repeated fix
      pts.push_back({pts.back().s + d, ele});
    }
    prev_lat = lat;
    prev_lon = lon;
  };
  for (const auto& [name, trk] : *gpx) {
    if (name != "trk") continue;
    for (const auto& [seg_name, seg] : trk) {
      if (seg_name != "trkseg") continue;
      for (const auto& [pt_name, trkpt] : seg) {
        if (pt_name == "trkpt") add(trkpt);
      }
    }
  }
  if (pts.size() < 2) throw ValidationError(origin + ": need at least 2 distinct trackpoints");
  return Course(std::move(pts));
}

Course load_course(const std::filesystem::path& path, const CourseLoadOptions& options) {
  CourseFormat fmt = options.format;
  if (fmt == CourseFormat::kAuto) {
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    fmt = ext == ".gpx" ? CourseFormat::kGpx : CourseFormat::kCsv;
  }
  const std::string text = read_file(path);
  Course c = fmt == CourseFormat::kGpx ? parse_course_gpx(text, path.string())
                                       : parse_course_csv(text, path.string());
  return options.smooth_window > 1 ? smooth_elevation(c, options.smooth_window) : c;
}

Course smooth_elevation(const Course& course, int window) {
  if (window < 1 || window % 2 == 0) throw ValidationError("smoothing window must be odd and >= 1");
  const auto& in = course.points();
  const int n = static_cast<int>(in.size());
  const int half = window / 2;
  std::vector<ProfilePoint> out(in);
  for (int i = 0; i < n; ++i) {
    const int lo = std::max(0, i - half);
    const int hi = std::min(n - 1, i + half);
    double sum = 0.0;
    for (int j = lo; j <= hi; ++j) sum += in[static_cast<std::size_t>(j)].z;
    out[static_cast<std::size_t>(i)].z = sum / (hi - lo + 1);
  }
  return Course(std::move(out), course.ds());
}

Course resample(const Course& course, double ds) {
  if (!(ds > 0.0)) throw ValidationError("resample: ds must be > 0");
  const double length = course.length();
  if (ds > length) throw ValidationError("resample: ds larger than course length");
  const auto n = static_cast<std::size_t>(std::floor(length / ds + 1e-9));
  const auto& in = course.points();
  std::vector<ProfilePoint> out;
  out.reserve(n + 1);
  std::size_t seg = 0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double s = static_cast<double>(k) * ds;
    while (seg + 2 < in.size() && in[seg + 1].s <= s) ++seg;
    const auto& a = in[seg];
    const auto& b = in[seg + 1];
    const double f = std::clamp((s - a.s) / (b.s - a.s), 0.0, 1.0);
    out.push_back({s, a.z + f * (b.z - a.z)});
  }
  return Course(std::move(out), ds);
}

std::string course_fingerprint(const Course& course) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](double x) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &x, sizeof bits);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (const auto& p : course.points()) {
    mix(p.s);
    mix(p.z);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace pacing
