#include "rrl/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>
#include <string>

#include "rrl/error.hpp"

namespace rrl {

namespace {

constexpr double kDuplicateEps = 1e-9;

}  // namespace

double distance_to_segment(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  if (len2 <= 0.0) return distance(p, a);
  const double t = std::clamp(dot(p - a, ab) / len2, 0.0, 1.0);
  return distance(p, a + ab * t);
}

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw ConfigError("polyline needs at least two points");
  stations_.reserve(points_.size());
  stations_.push_back(0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    if (!is_finite(points_[i]) || !is_finite(points_[i - 1]))
      throw ConfigError("polyline has a non-finite point at index " + std::to_string(i));
    const double d = distance(points_[i - 1], points_[i]);
    if (!(d > 0.0))
      throw ConfigError("polyline repeats point at index " + std::to_string(i));
    stations_.push_back(stations_.back() + d);
  }
}

std::size_t Polyline::segment_at(double s) const {
  const auto it = std::upper_bound(stations_.begin(), stations_.end(), s);
  const auto idx = static_cast<std::ptrdiff_t>(it - stations_.begin()) - 1;
  return static_cast<std::size_t>(
      std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(points_.size()) - 2));
}

Vec2 Polyline::point_at(double s) const {
  const std::size_t i = segment_at(s);
  const double span = stations_[i + 1] - stations_[i];
  const double t = std::clamp((s - stations_[i]) / span, 0.0, 1.0);
  if (t == 1.0) return points_[i + 1];
  return lerp(points_[i], points_[i + 1], t);
}

Projection Polyline::project(Vec2 p, double s_min, double s_max) const {
  Projection best{s_min, std::numeric_limits<double>::infinity()};
  if (points_.size() < 2 || s_max < s_min) return best;
  const std::size_t first = segment_at(s_min);
  const std::size_t last = segment_at(s_max);
  for (std::size_t i = first; i <= last; ++i) {
    const Vec2 a = points_[i];
    const Vec2 ab = points_[i + 1] - a;
    const double len = stations_[i + 1] - stations_[i];
    double lo = std::max(0.0, s_min - stations_[i]);
    double hi = std::min(len, s_max - stations_[i]);
    if (hi < lo) continue;
    double t = dot(p - a, ab) / len;
    t = std::clamp(t, lo, hi);
    const double d = distance(p, a + ab * (t / len));
    if (d < best.distance) best = {stations_[i] + t, d};
  }
  return best;
}

std::vector<Vec2> Polyline::resample(double s0, double s1, double max_step) const {
  std::vector<double> keys{s0};
  for (double st : stations_)
    if (st > s0 && st < s1) keys.push_back(st);
  if (s1 > s0) keys.push_back(s1);

  std::vector<Vec2> out{point_at(s0)};
  for (std::size_t k = 1; k < keys.size(); ++k) {
    const double gap = keys[k] - keys[k - 1];
    const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(gap / max_step)));
    for (std::size_t j = 1; j <= n; ++j) {
      const double s = j == n ? keys[k] : keys[k - 1] + gap * static_cast<double>(j) / n;
      out.push_back(point_at(s));
    }
  }
  return out;
}

Pose station_to_pose(const Polyline& path, double s) {
  if (!(s >= 0.0 && s <= path.length()))
    throw std::out_of_range("station " + std::to_string(s) + " outside [0, " +
                            std::to_string(path.length()) + "]");
  const std::size_t i = path.segment_at(s);
  const Vec2 d = path.points()[i + 1] - path.points()[i];
  return {path.point_at(s), std::atan2(d.y, d.x)};
}

Polyline join(std::span<const std::vector<Vec2>> parts) {
  std::vector<Vec2> pts;
  for (const auto& part : parts) {
    for (Vec2 p : part) {
      if (!pts.empty() && distance(pts.back(), p) <= kDuplicateEps) continue;
      pts.push_back(p);
    }
  }
  return Polyline(std::move(pts));
}

Vec2 decasteljau_eval(const CubicBezier& c, double t) {
  if (!(t >= 0.0 && t <= 1.0))
    throw std::out_of_range("bezier parameter " + std::to_string(t) + " outside [0, 1]");
  // The recursion below rounds at t = 1; the curve interpolates its end points exactly.
  if (t == 0.0) return c.p0;
  if (t == 1.0) return c.p3;
  const Vec2 a = lerp(c.p0, c.p1, t);
  const Vec2 b = lerp(c.p1, c.p2, t);
  const Vec2 d = lerp(c.p2, c.p3, t);
  const Vec2 ab = lerp(a, b, t);
  const Vec2 bd = lerp(b, d, t);
  return lerp(ab, bd, t);
}

std::vector<Vec2> sample_bezier(const CubicBezier& curve, double step) {
  constexpr int kTable = 256;
  std::array<double, kTable + 1> arc{};
  Vec2 prev = curve.p0;
  for (int i = 1; i <= kTable; ++i) {
    const Vec2 p = decasteljau_eval(curve, static_cast<double>(i) / kTable);
    arc[i] = arc[i - 1] + distance(prev, p);
    prev = p;
  }
  const double total = arc[kTable];
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(total / step)));

  std::vector<double> ts{0.0};
  int cursor = 0;
  for (std::size_t k = 1; k < n; ++k) {
    const double target = total * static_cast<double>(k) / n;
    while (cursor < kTable && arc[cursor + 1] < target) ++cursor;
    const double span = arc[cursor + 1] - arc[cursor];
    const double frac = span > 0.0 ? (target - arc[cursor]) / span : 0.0;
    ts.push_back(std::clamp((cursor + frac) / kTable, 0.0, 1.0));
  }
  ts.push_back(1.0);

  // The arc table is a chord approximation, so a gap can overshoot `step`
  // slightly; such gaps are split at their parameter midpoint.
  std::vector<Vec2> out{curve.p0};
  std::vector<std::pair<double, double>> pending;
  for (std::size_t k = 1; k < ts.size(); ++k) {
    pending.assign(1, {ts[k - 1], ts[k]});
    while (!pending.empty()) {
      const auto [t0, t1] = pending.back();
      const Vec2 b = decasteljau_eval(curve, t1);
      if (distance(out.back(), b) <= step || t1 - t0 < 1e-12) {
        out.push_back(b);
        pending.pop_back();
      } else {
        pending.push_back({t0, 0.5 * (t0 + t1)});
      }
    }
  }
  return out;
}

std::array<Vec2, 4> OrientedBox::corners() const {
  const Vec2 fwd = heading_vector(heading) * (length / 2);
  const Vec2 side = Vec2{-std::sin(heading), std::cos(heading)} * (width / 2);
  return {center + fwd + side, center - fwd + side, center - fwd - side, center + fwd - side};
}

bool OrientedBox::contains(Vec2 p) const {
  const Vec2 d = p - center;
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  const double lon = d.x * c + d.y * s;
  const double lat = -d.x * s + d.y * c;
  constexpr double kEps = 1e-9;  // absorbs rounding on the boundary
  return std::abs(lon) <= length / 2 + kEps && std::abs(lat) <= width / 2 + kEps;
}

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b, bool closed) {
  const std::array<double, 2> headings{a.heading, b.heading};
  for (double h : headings) {
    for (int k = 0; k < 2; ++k) {
      const Vec2 axis = k == 0 ? heading_vector(h) : Vec2{-std::sin(h), std::cos(h)};
      auto radius = [&](const OrientedBox& box) {
        const Vec2 fwd = heading_vector(box.heading);
        const Vec2 side{-fwd.y, fwd.x};
        return std::abs(dot(axis, fwd)) * box.length / 2 + std::abs(dot(axis, side)) * box.width / 2;
      };
      const double ca = dot(axis, a.center);
      const double cb = dot(axis, b.center);
      const double gap = std::abs(ca - cb) - radius(a) - radius(b);
      if (closed ? gap > 0.0 : gap >= 0.0) return false;
    }
  }
  return true;
}

PathPerturbation perturb_path_detailed(const Polyline& path, double stop_station,
                                       const PathNoiseConfig& cfg, Rng& rng) {
  if (!(stop_station > 0.0 && stop_station < path.length()))
    throw ConfigError("perturb_path: stop_station " + std::to_string(stop_station) +
                      " must lie strictly inside the path (length " +
                      std::to_string(path.length()) + ")");
  if (cfg.anchor_sigma < 0.0) throw ConfigError("perturb_path: anchor_sigma must be >= 0");

  PathPerturbation out;
  out.start_station = uniform(rng, 0.0, stop_station);
  out.end_station = uniform(rng, stop_station, path.length());
  double a1 = uniform(rng, out.start_station, out.end_station);
  double a2 = uniform(rng, out.start_station, out.end_station);
  if (a2 < a1) std::swap(a1, a2);

  const Vec2 jitter1{gaussian(rng, cfg.anchor_sigma), gaussian(rng, cfg.anchor_sigma)};
  const Vec2 jitter2{gaussian(rng, cfg.anchor_sigma), gaussian(rng, cfg.anchor_sigma)};
  out.curve = {path.point_at(out.start_station), path.point_at(a1) + jitter1,
               path.point_at(a2) + jitter2, path.point_at(out.end_station)};

  std::vector<std::vector<Vec2>> parts;
  parts.push_back(path.resample(0.0, out.start_station, kBezierArcStep));
  if (out.end_station - out.start_station > kDuplicateEps)
    parts.push_back(sample_bezier(out.curve, kBezierArcStep));
  parts.push_back(path.resample(out.end_station, path.length(), kBezierArcStep));
  out.path = join(parts);
  return out;
}

Polyline perturb_path(const Polyline& path, double stop_station, const PathNoiseConfig& cfg,
                      Rng& rng) {
  if (!cfg.enabled) {
    if (!(stop_station > 0.0 && stop_station < path.length()))
      throw ConfigError("perturb_path: stop_station must lie strictly inside the path");
    return path;
  }
  return perturb_path_detailed(path, stop_station, cfg, rng).path;
}

}  // namespace rrl
