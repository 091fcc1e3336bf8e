#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace pacing {

struct ProfilePoint {
  double s = 0.0;  // along-road distance, m
  double z = 0.0;  // elevation, m
};

/// Distance-indexed elevation profile with one grade per segment.
///
/// Segment i spans [points[i].s, points[i+1].s) and has grade
/// atan(dz / ds), positive uphill. A resampled course has `ds() > 0` and
/// every s an exact multiple of it; a raw course reports `ds() == 0`.
class Course {
 public:
  explicit Course(std::vector<ProfilePoint> points, double ds = 0.0);

  const std::vector<ProfilePoint>& points() const { return points_; }
  const std::vector<double>& grades() const { return grades_; }
  double ds() const { return ds_; }
  double length() const { return points_.back().s; }
  int segments() const { return static_cast<int>(grades_.size()); }
  double grade(int segment) const { return grades_.at(static_cast<std::size_t>(segment)); }

  // Grade of the segment containing s; right-continuous at boundaries, the
  // last segment also covers s == length().
  double grade_at(double s) const;
  double total_climb() const;

 private:
  std::vector<ProfilePoint> points_;
  std::vector<double> grades_;
  double ds_;
};

enum class CourseFormat { kAuto, kCsv, kGpx };

struct CourseLoadOptions {
  CourseFormat format = CourseFormat::kAuto;
  int smooth_window = 1;  // centered moving average over elevation, 1 = off
};

Course parse_course_csv(const std::string& text, const std::string& origin = "<csv>");
Course parse_course_gpx(const std::string& text, const std::string& origin = "<gpx>");
Course load_course(const std::filesystem::path& path, const CourseLoadOptions& options = {});

Course smooth_elevation(const Course& course, int window);

// Piecewise-linear resampling onto s = k * ds, truncated at the last full step.
Course resample(const Course& course, double ds);

// Great-circle distance in metres on a sphere of radius 6371 km.
double haversine_m(double lat1_deg, double lon1_deg, double lat2_deg, double lon2_deg);

// Stable FNV-1a fingerprint of the profile, hex encoded.
std::string course_fingerprint(const Course& course);

}  // namespace pacing
