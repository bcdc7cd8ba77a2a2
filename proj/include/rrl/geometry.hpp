#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rrl/random.hpp"

namespace rrl {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr bool operator==(const Vec2&) const = default;
};

constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }
constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
constexpr Vec2 lerp(Vec2 a, Vec2 b, double t) { return a + (b - a) * t; }
inline double norm(Vec2 v) { return std::hypot(v.x, v.y); }
inline double distance(Vec2 a, Vec2 b) { return norm(b - a); }
inline Vec2 heading_vector(double heading) { return {std::cos(heading), std::sin(heading)}; }
inline bool is_finite(Vec2 v) { return std::isfinite(v.x) && std::isfinite(v.y); }

/// Distance from `p` to the closed segment [a, b].
double distance_to_segment(Vec2 p, Vec2 a, Vec2 b);

struct Pose {
  Vec2 position;
  double heading = 0.0;  // radians, counter-clockwise from +x
};

/// Closest point on a polyline to a query point.
struct Projection {
  double station = 0.0;
  double distance = 0.0;
};

/// Ordered, arc-length parameterized sequence of points.
class Polyline {
 public:
  Polyline() = default;
  /// Throws ConfigError if fewer than two points, non-finite coordinates, or
  /// repeated consecutive points.
  explicit Polyline(std::vector<Vec2> points);

  [[nodiscard]] const std::vector<Vec2>& points() const { return points_; }
  [[nodiscard]] const std::vector<double>& stations() const { return stations_; }
  [[nodiscard]] std::size_t size() const { return points_.size(); }
  [[nodiscard]] bool empty() const { return points_.empty(); }
  [[nodiscard]] double length() const { return stations_.empty() ? 0.0 : stations_.back(); }
  [[nodiscard]] Vec2 front() const { return points_.front(); }
  [[nodiscard]] Vec2 back() const { return points_.back(); }

  /// Index i of the segment [i, i+1] containing station s (clamped to the path).
  [[nodiscard]] std::size_t segment_at(double s) const;
  [[nodiscard]] Vec2 point_at(double s) const;

  /// Closest point among the segments overlapping stations [s_min, s_max].
  [[nodiscard]] Projection project(Vec2 p, double s_min, double s_max) const;
  [[nodiscard]] Projection project(Vec2 p) const { return project(p, 0.0, length()); }

  /// Points covering [s0, s1], with interior vertices kept and no gap wider
  /// than `max_step`.
  [[nodiscard]] std::vector<Vec2> resample(double s0, double s1, double max_step) const;

 private:
  std::vector<Vec2> points_;
  std::vector<double> stations_;
};

/// Pose at arc length s. Throws std::out_of_range unless 0 <= s <= length.
Pose station_to_pose(const Polyline& path, double s);

/// Concatenate point runs, dropping repeated junction points.
Polyline join(std::span<const std::vector<Vec2>> parts);

struct CubicBezier {
  Vec2 p0, p1, p2, p3;
};

/// Point at parameter t by repeated linear interpolation. Throws
/// std::out_of_range unless 0 <= t <= 1.
Vec2 decasteljau_eval(const CubicBezier& curve, double t);

/// Samples the curve at (approximately) equal arc-length spacing no wider than
/// `step`; first and last samples are exactly p0 and p3.
std::vector<Vec2> sample_bezier(const CubicBezier& curve, double step);

/// Rectangle footprint centered on a pose.
struct OrientedBox {
  Vec2 center;
  double heading = 0.0;
  double length = 0.0;
  double width = 0.0;

  [[nodiscard]] std::array<Vec2, 4> corners() const;
  [[nodiscard]] bool contains(Vec2 p) const;
};

/// Separating-axis overlap test. With `closed`, touching boxes overlap.
bool boxes_overlap(const OrientedBox& a, const OrientedBox& b, bool closed = true);

struct PathNoiseConfig {
  double anchor_sigma = 1.0;  // meters
  bool enabled = false;
};

inline constexpr double kBezierArcStep = 0.5;

/// Replaces the stretch between a random start point (before the stop line)
/// and a random end point (after it) with a cubic Bezier whose inner control
/// points are Gaussian-perturbed path anchors. Output spacing <= kBezierArcStep.
Polyline perturb_path(const Polyline& path, double stop_station, const PathNoiseConfig& cfg,
                      Rng& rng);

/// Details of one perturbation, for inspection in tests.
struct PathPerturbation {
  double start_station = 0.0;
  double end_station = 0.0;
  CubicBezier curve;
  Polyline path;
};

PathPerturbation perturb_path_detailed(const Polyline& path, double stop_station,
                                       const PathNoiseConfig& cfg, Rng& rng);

}  // namespace rrl
