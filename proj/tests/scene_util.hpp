#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <vector>

#include <nlohmann/json.hpp>

#include "rrl/perception.hpp"
#include "rrl/world.hpp"

namespace rrl::testing {

/// A rasterizer scene that owns all of its geometry.
struct OwnedScene {
  std::shared_ptr<const RoundaboutLayout> layout;
  Pose ego;
  Polyline path;
  double path_from = 0.0;
  double path_half_width = 0.9;
  Segment stop_line;
  std::vector<VehicleBox> boxes;

  [[nodiscard]] RasterScene view() const {
    RasterScene s;
    s.layout = layout.get();
    s.ego = ego;
    s.path = &path;
    s.path_from = path_from;
    s.path_half_width = path_half_width;
    s.stop_line = stop_line;
    s.boxes = boxes;
    return s;
  }
};

inline std::shared_ptr<const RouteTable> bundled_routes(const char* name) {
  return std::make_shared<const RouteTable>(
      std::make_shared<const RoundaboutLayout>(load_layout_file(resolve_layout_path(name))));
}

/// Scene around the active vehicle of a freshly simulated random world.
inline OwnedScene random_scene(const std::shared_ptr<const RouteTable>& routes, std::uint64_t seed) {
  Rng rng(seed);
  World w(routes, WorldParams{}, traffic_level("high", 8), seed);
  const auto entry = std::uniform_int_distribution<std::size_t>(0, routes->entry_count() - 1)(rng);
  w.warm_up(entry, 20.0);
  const auto route = routes->active_route(entry);
  w.insert_active(route, 0.5, 3.0, uniform(rng, 0.0, route->ring_end));
  const VehicleState& ego = *w.active();
  OwnedScene s;
  s.layout = routes->layout_ptr();
  s.ego = ego.pose();
  s.path = route->path;
  s.path_from = ego.station;
  s.path_half_width = ego.width / 2;
  s.stop_line = routes->layout().stop_line(entry);
  s.boxes = vehicle_boxes(w, ego.id);
  return s;
}

/// Applies a rigid motion (rotation by `angle` about the origin, then a shift).
struct RigidMotion {
  double angle = 0.0;
  Vec2 shift;

  [[nodiscard]] Vec2 operator()(Vec2 p) const {
    if (angle == 0.0) return p + shift;
    const double c = std::cos(angle), s = std::sin(angle);
    return Vec2{c * p.x - s * p.y, s * p.x + c * p.y} + shift;
  }
};

inline nlohmann::json move_points(const nlohmann::json& pts, const RigidMotion& m) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& p : pts) {
    const Vec2 q = m({p[0].get<double>(), p[1].get<double>()});
    out.push_back({q.x, q.y});
  }
  return out;
}

inline OwnedScene move_scene(const OwnedScene& s, const RigidMotion& m) {
  nlohmann::json doc = layout_to_json(*s.layout);
  for (auto& poly : doc["navigable_polygons"]) poly = move_points(poly, m);
  for (auto& e : doc["entries"]) {
    e["approach"] = move_points(e["approach"], m);
    e["merged"] = move_points(e["merged"], m);
  }
  for (auto& c : doc["circulation"]) c = move_points(c, m);
  for (auto& x : doc["exits"]) x = move_points(x, m);
  OwnedScene out = s;
  out.layout = std::make_shared<const RoundaboutLayout>(load_layout(doc.dump()));
  out.ego = {m(s.ego.position), s.ego.heading + m.angle};
  std::vector<Vec2> pts;
  for (const Vec2& p : s.path.points()) pts.push_back(m(p));
  out.path = Polyline(std::move(pts));
  out.stop_line = {m(s.stop_line.a), m(s.stop_line.b)};
  for (auto& b : out.boxes) {
    b.box.center = m(b.box.center);
    b.box.heading += m.angle;
  }
  return out;
}

inline std::size_t differing_cells(const SemanticFrame& a, const SemanticFrame& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.cells.size(); ++i) n += a.cells[i] != b.cells[i] ? 1 : 0;
  return n;
}

}  // namespace rrl::testing
