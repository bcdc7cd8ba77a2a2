#include "rrl/perception.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "rrl/error.hpp"

namespace rrl {

namespace {

// Continuous grid coordinates (column, row) of a world point; cell (r, c)
// spans [c, c+1) x [r, r+1).
struct GridPoint {
  double col;
  double row;
};

GridPoint to_grid(const Pose& ego, const FrameSpec& spec, Vec2 p) {
  const Vec2 d = p - ego.position;
  const Vec2 h = heading_vector(ego.heading);
  const Vec2 left{-h.y, h.x};
  const double res = spec.resolution();
  const double half = spec.grid_size / 2.0;
  return {half - dot(d, left) / res, half - dot(d, h) / res};
}

struct CellRange {
  int r0, r1, c0, c1;  // inclusive
  [[nodiscard]] bool empty() const { return r0 > r1 || c0 > c1; }
};

CellRange cells_around(std::span<const GridPoint> pts, double pad, int g) {
  double cmin = pts[0].col, cmax = pts[0].col, rmin = pts[0].row, rmax = pts[0].row;
  for (const auto& p : pts) {
    cmin = std::min(cmin, p.col);
    cmax = std::max(cmax, p.col);
    rmin = std::min(rmin, p.row);
    rmax = std::max(rmax, p.row);
  }
  auto lo = [&](double v) { return std::max(0, static_cast<int>(std::floor(v - pad)) - 1); };
  auto hi = [&](double v) { return std::min(g - 1, static_cast<int>(std::floor(v + pad)) + 1); };
  return {lo(rmin), hi(rmax), lo(cmin), hi(cmax)};
}

void mark_segment(SemanticFrame& frame, int channel, const Pose& ego, const FrameSpec& spec, Vec2 a, Vec2 b,
                  double threshold) {
  const GridPoint pts[2] = {to_grid(ego, spec, a), to_grid(ego, spec, b)};
  const CellRange range = cells_around(pts, threshold / spec.resolution(), spec.grid_size);
  for (int r = range.r0; r <= range.r1; ++r) {
    for (int c = range.c0; c <= range.c1; ++c) {
      if (distance_to_segment(cell_center(ego, spec, r, c), a, b) <= threshold) frame.set(channel, r, c);
    }
  }
}

}  // namespace

void FrameSpec::validate() const {
  if (grid_size <= 0) throw ConfigError("frame.grid_size must be positive");
  if (!(window > 0.0)) throw ConfigError("frame.window must be positive");
}

SemanticFrame::SemanticFrame(const FrameSpec& spec)
    : grid_size(spec.grid_size),
      window(spec.window),
      cells(static_cast<std::size_t>(kChannelCount) * spec.grid_size * spec.grid_size, 0) {}

std::size_t SemanticFrame::count(int channel) const {
  const auto begin = cells.begin() + static_cast<std::ptrdiff_t>(channel * plane_size());
  return static_cast<std::size_t>(std::count(begin, begin + static_cast<std::ptrdiff_t>(plane_size()), 1));
}

Vec2 cell_center(const Pose& ego, const FrameSpec& spec, int row, int col) {
  const double res = spec.resolution();
  const double half = spec.grid_size / 2.0;
  const double forward = (half - row - 0.5) * res;
  const double left = (half - col - 0.5) * res;
  const Vec2 h = heading_vector(ego.heading);
  const Vec2 n{-h.y, h.x};
  return ego.position + h * forward + n * left;
}

std::vector<VehicleBox> vehicle_boxes(const World& world, int ego_id) {
  std::vector<VehicleBox> out;
  out.reserve(world.vehicles().size());
  for (const auto& v : world.vehicles()) out.push_back({v.id, v.id == ego_id, v.box(), v.speed});
  return out;
}

void PerceptionNoiseConfig::validate() const {
  if (!(pos_sigma >= 0.0 && size_sigma >= 0.0 && heading_sigma >= 0.0))
    throw ConfigError("perception noise sigmas must be non-negative");
}

std::vector<VehicleBox> apply_perception_noise(std::span<const VehicleBox> boxes,
                                               const PerceptionNoiseConfig& cfg, Rng& rng) {
  std::vector<VehicleBox> out(boxes.begin(), boxes.end());
  if (!cfg.enabled) return out;
  for (auto& b : out) {
    if (b.ego) continue;
    b.box.center.x += gaussian(rng, cfg.pos_sigma);
    b.box.center.y += gaussian(rng, cfg.pos_sigma);
    b.box.length = std::max(0.1, b.box.length + gaussian(rng, cfg.size_sigma));
    b.box.width = std::max(0.1, b.box.width + gaussian(rng, cfg.size_sigma));
    b.box.heading += gaussian(rng, cfg.heading_sigma);
  }
  return out;
}

SemanticFrame rasterize(const RasterScene& scene, const FrameSpec& spec) {
  require(scene.layout != nullptr, "rasterize: scene without layout");
  SemanticFrame frame(spec);
  const int g = spec.grid_size;
  const double res = spec.resolution();

  for (int r = 0; r < g; ++r) {
    for (int c = 0; c < g; ++c) {
      if (scene.layout->navigable(cell_center(scene.ego, spec, r, c))) frame.set(kNavigable, r, c);
    }
  }

  if (scene.path != nullptr) {
    const Polyline& path = *scene.path;
    const double threshold = std::max(scene.path_half_width, res / 2);
    const double reach = spec.window * 0.75 + threshold;
    const double from = std::clamp(scene.path_from, 0.0, path.length());
    Vec2 prev = path.point_at(from);
    for (std::size_t k = path.segment_at(from) + 1; k < path.size(); ++k) {
      const Vec2 next = path.points()[k];
      if (distance_to_segment(scene.ego.position, prev, next) <= reach)
        mark_segment(frame, kPath, scene.ego, spec, prev, next, threshold);
      prev = next;
    }
  }

  mark_segment(frame, kStopLine, scene.ego, spec, scene.stop_line.a, scene.stop_line.b, std::max(0.5, res / 2));

  for (const auto& vb : scene.boxes) {
    const auto corners = vb.box.corners();
    GridPoint pts[4];
    for (int i = 0; i < 4; ++i) pts[i] = to_grid(scene.ego, spec, corners[static_cast<std::size_t>(i)]);
    const CellRange range = cells_around(pts, 0.0, g);
    for (int r = range.r0; r <= range.r1; ++r) {
      for (int c = range.c0; c <= range.c1; ++c) {
        if (vb.box.contains(cell_center(scene.ego, spec, r, c))) frame.set(kObstacles, r, c);
      }
    }
    // A footprint smaller than a cell still marks the cell holding its center.
    const GridPoint center = to_grid(scene.ego, spec, vb.box.center);
    const int r = static_cast<int>(std::floor(center.row));
    const int c = static_cast<int>(std::floor(center.col));
    if (r >= 0 && r < g && c >= 0 && c < g) frame.set(kObstacles, r, c);
  }
  return frame;
}

SemanticFrame rasterize(const World& world, const VehicleState& ego, const FrameSpec& spec) {
  const auto boxes = vehicle_boxes(world, ego.id);
  RasterScene scene;
  scene.layout = &world.layout();
  scene.ego = ego.pose();
  scene.path = &ego.path();
  scene.path_from = ego.station;
  scene.path_half_width = ego.width / 2;
  scene.stop_line = world.layout().stop_line(ego.route->entry);
  scene.boxes = boxes;
  return rasterize(scene, spec);
}

std::array<double, kNonVisualSize> nonvisual_features(const NonVisual& nv) {
  require(nv.target_speed > 0.0, "nonvisual_features: target speed must be positive");
  const auto hot = one_hot(nv.last_action);
  return {nv.agent_speed / nv.target_speed, 1.0, nv.aggressiveness, hot[0], hot[1], hot[2]};
}

FrameHistory::FrameHistory(int k, const FrameSpec& spec) : k_(k), spec_(spec) {
  if (k < 1) throw ConfigError("history length k must be >= 1");
}

void FrameHistory::push(SemanticFrame frame) {
  require(frame.grid_size == spec_.grid_size, "FrameHistory: frame size mismatch");
  recent_.push_back(std::move(frame));
  while (static_cast<int>(recent_.size()) > k_) recent_.pop_front();
}

std::vector<SemanticFrame> FrameHistory::stacked() const {
  std::vector<SemanticFrame> out;
  out.reserve(static_cast<std::size_t>(k_));
  for (int i = static_cast<int>(recent_.size()); i < k_; ++i) out.emplace_back(spec_);
  out.insert(out.end(), recent_.begin(), recent_.end());
  return out;
}

ObservationBundle build_observation(const FrameHistory& history, const VehicleState& ego,
                                    double aggressiveness, ManeuverState last_action) {
  ObservationBundle obs;
  obs.frames = history.stacked();
  obs.nonvisual = {ego.speed, ego.target_speed, aggressiveness, last_action};
  return obs;
}

void write_frames(std::ostream& out, std::span<const SemanticFrame> frames) {
  nlohmann::json header;
  header["grid_size"] = frames.empty() ? 0 : frames.front().grid_size;
  header["window"] = frames.empty() ? 0.0 : frames.front().window;
  header["k"] = frames.size();
  out << header.dump() << '\n';
  for (const auto& f : frames) {
    require(f.grid_size == header["grid_size"].get<int>(), "write_frames: mixed grid sizes");
    out.write(reinterpret_cast<const char*>(f.cells.data()), static_cast<std::streamsize>(f.cells.size()));
  }
}

std::vector<SemanticFrame> read_frames(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("frame tensor: missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("frame tensor header: ") + e.what());
  }
  FrameSpec spec{header.at("grid_size").get<int>(), header.at("window").get<double>()};
  const auto k = header.at("k").get<std::size_t>();
  std::vector<SemanticFrame> frames;
  for (std::size_t i = 0; i < k; ++i) {
    SemanticFrame f(spec);
    in.read(reinterpret_cast<char*>(f.cells.data()), static_cast<std::streamsize>(f.cells.size()));
    if (in.gcount() != static_cast<std::streamsize>(f.cells.size())) throw ParseError("frame tensor: truncated data");
    frames.push_back(std::move(f));
  }
  return frames;
}

}  // namespace rrl
