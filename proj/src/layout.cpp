#include "rrl/layout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rrl/error.hpp"

#ifndef RRL_ASSET_DIR_DEFAULT
#define RRL_ASSET_DIR_DEFAULT "assets"
#endif

namespace rrl {

namespace {

using nlohmann::json;

constexpr double kBoundaryEps = 1e-9;
constexpr std::size_t kBandCount = 256;

bool on_edge(Vec2 p, Vec2 a, Vec2 b) { return distance_to_segment(p, a, b) <= kBoundaryEps; }

// Ray toward +x crosses edge (a, b)?
bool crosses(Vec2 p, Vec2 a, Vec2 b) {
  if ((a.y > p.y) == (b.y > p.y)) return false;
  const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
  return p.x < x;
}

std::vector<Vec2> parse_points(const json& j, const std::string& field) {
  if (!j.is_array()) throw ParseError(field + ": expected an array of [x, y] pairs");
  std::vector<Vec2> pts;
  pts.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const json& p = j[i];
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number())
      throw ParseError(field + "[" + std::to_string(i) + "]: expected [x, y]");
    const Vec2 v{p[0].get<double>(), p[1].get<double>()};
    if (!is_finite(v)) throw ParseError(field + "[" + std::to_string(i) + "]: non-finite coordinate");
    pts.push_back(v);
  }
  return pts;
}

Polyline parse_polyline(const json& j, const std::string& field) {
  try {
    return Polyline(parse_points(j, field));
  } catch (const ConfigError& e) {
    throw ParseError(field + ": " + e.what());
  }
}

const json& field_of(const json& obj, const std::string& key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(where + key + ": missing field");
  return *it;
}

json points_to_json(const std::vector<Vec2>& pts) {
  json arr = json::array();
  for (Vec2 p : pts) arr.push_back({p.x, p.y});
  return arr;
}

}  // namespace

bool point_in_polygons(std::span<const Polygon> polygons, Vec2 p) {
  bool inside = false;
  for (const Polygon& poly : polygons) {
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2 a = poly[i];
      const Vec2 b = poly[(i + 1) % n];
      if (on_edge(p, a, b)) return true;
      if (crosses(p, a, b)) inside = !inside;
    }
  }
  return inside;
}

RoundaboutLayout::RoundaboutLayout(std::string name, std::vector<Polygon> polygons,
                                   std::vector<EntrySpec> entries, std::vector<Polyline> circulation,
                                   std::vector<Polyline> exits, double lane_width)
    : name_(std::move(name)),
      navigable_(std::move(polygons)),
      entries_(std::move(entries)),
      circulation_(std::move(circulation)),
      exits_(std::move(exits)),
      lane_width_(lane_width) {
  if (navigable_.empty()) throw ConfigError("navigable_polygons: at least one polygon required");
  for (std::size_t i = 0; i < navigable_.size(); ++i) {
    if (navigable_[i].size() < 3)
      throw ConfigError("navigable_polygons[" + std::to_string(i) + "]: fewer than 3 vertices");
  }
  if (entries_.empty()) throw ConfigError("entries: at least one entry required");
  if (!(lane_width_ > 0.0)) throw ConfigError("lane_width: must be positive");
  build_index();

  auto check_inside = [&](const Polyline& path, const std::string& field) {
    for (std::size_t k = 0; k < path.size(); ++k) {
      if (!navigable(path.points()[k]))
        throw ConfigError(field + "[" + std::to_string(k) + "]: vertex outside navigable space");
    }
  };
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    const std::string where = "entries[" + std::to_string(i) + "].";
    if (!(e.stop_station > 0.0 && e.stop_station < e.approach.length()))
      throw ConfigError(where + "stop_station: must lie in (0, " +
                        std::to_string(e.approach.length()) + ")");
    check_inside(e.approach, where + "approach");
    check_inside(e.merged, where + "merged");
  }
  for (std::size_t i = 0; i < circulation_.size(); ++i)
    check_inside(circulation_[i], "circulation[" + std::to_string(i) + "]");
  for (std::size_t i = 0; i < exits_.size(); ++i)
    check_inside(exits_[i], "exits[" + std::to_string(i) + "]");
}

void RoundaboutLayout::build_index() {
  double y_min = std::numeric_limits<double>::infinity();
  double y_max = -y_min;
  x_min_ = y_min;
  x_max_ = y_max;
  for (const auto& poly : navigable_) {
    for (Vec2 v : poly) {
      y_min = std::min(y_min, v.y);
      y_max = std::max(y_max, v.y);
      x_min_ = std::min(x_min_, v.x);
      x_max_ = std::max(x_max_, v.x);
    }
  }
  band_y0_ = y_min;
  band_height_ = std::max((y_max - y_min) / kBandCount, 1e-6);
  bands_.assign(kBandCount, {});
  auto band_of = [&](double y) {
    const auto b = static_cast<std::ptrdiff_t>(std::floor((y - band_y0_) / band_height_));
    return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(b, 0, kBandCount - 1));
  };
  for (const auto& poly : navigable_) {
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const Edge e{poly[i], poly[(i + 1) % poly.size()]};
      const std::size_t lo = band_of(std::min(e.a.y, e.b.y) - kBoundaryEps);
      const std::size_t hi = band_of(std::max(e.a.y, e.b.y) + kBoundaryEps);
      for (std::size_t b = lo; b <= hi; ++b) bands_[b].push_back(e);
    }
  }
}

bool RoundaboutLayout::navigable(Vec2 p) const {
  const double y_top = band_y0_ + band_height_ * kBandCount;
  if (p.y < band_y0_ - kBoundaryEps || p.y > y_top + kBoundaryEps) return false;
  if (p.x < x_min_ - kBoundaryEps || p.x > x_max_ + kBoundaryEps) return false;
  const auto b = static_cast<std::ptrdiff_t>(std::floor((p.y - band_y0_) / band_height_));
  const auto& edges = bands_[static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(b, 0, kBandCount - 1))];
  bool inside = false;
  for (const Edge& e : edges) {
    if (on_edge(p, e.a, e.b)) return true;
    if (crosses(p, e.a, e.b)) inside = !inside;
  }
  return inside;
}

Segment RoundaboutLayout::stop_line(std::size_t entry) const {
  const auto& e = entries_.at(entry);
  const Pose pose = station_to_pose(e.approach, e.stop_station);
  const Vec2 normal{-std::sin(pose.heading), std::cos(pose.heading)};
  const double half = lane_width_ / 2;
  return {pose.position + normal * half, pose.position - normal * half};
}

bool point_in_navigable(const RoundaboutLayout& layout, Vec2 p) { return layout.navigable(p); }

RoundaboutLayout load_layout(std::string_view document) {
  if (document.find_first_not_of(" \t\r\n") == std::string_view::npos)
    throw ParseError("layout document is empty");
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("layout document is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("layout document must be an object");

  const json& version = field_of(doc, "schema_version", "");
  if (!version.is_number_integer() || version.get<int>() != kLayoutSchemaVersion)
    throw ParseError("schema_version: expected " + std::to_string(kLayoutSchemaVersion));
  const json& name = field_of(doc, "name", "");
  if (!name.is_string()) throw ParseError("name: expected a string");

  std::vector<Polygon> polygons;
  const json& polys = field_of(doc, "navigable_polygons", "");
  if (!polys.is_array() || polys.empty())
    throw ParseError("navigable_polygons: expected a non-empty array");
  for (std::size_t i = 0; i < polys.size(); ++i)
    polygons.push_back(parse_points(polys[i], "navigable_polygons[" + std::to_string(i) + "]"));

  std::vector<EntrySpec> entries;
  const json& ents = field_of(doc, "entries", "");
  if (!ents.is_array() || ents.empty()) throw ParseError("entries: expected a non-empty array");
  for (std::size_t i = 0; i < ents.size(); ++i) {
    const std::string where = "entries[" + std::to_string(i) + "].";
    if (!ents[i].is_object()) throw ParseError(where + ": expected an object");
    const json& stop = field_of(ents[i], "stop_station", where);
    if (!stop.is_number()) throw ParseError(where + "stop_station: expected a number");
    entries.push_back({parse_polyline(field_of(ents[i], "approach", where), where + "approach"),
                       stop.get<double>(),
                       parse_polyline(field_of(ents[i], "merged", where), where + "merged")});
  }

  std::vector<Polyline> circulation;
  const json& circ = field_of(doc, "circulation", "");
  if (!circ.is_array()) throw ParseError("circulation: expected an array of paths");
  for (std::size_t i = 0; i < circ.size(); ++i)
    circulation.push_back(parse_polyline(circ[i], "circulation[" + std::to_string(i) + "]"));

  std::vector<Polyline> exits;
  if (const auto it = doc.find("exits"); it != doc.end()) {
    if (!it->is_array()) throw ParseError("exits: expected an array of paths");
    for (std::size_t i = 0; i < it->size(); ++i)
      exits.push_back(parse_polyline((*it)[i], "exits[" + std::to_string(i) + "]"));
  }

  double lane_width = 4.0;
  if (const auto it = doc.find("lane_width"); it != doc.end()) {
    if (!it->is_number()) throw ParseError("lane_width: expected a number");
    lane_width = it->get<double>();
  }

  try {
    return RoundaboutLayout(name.get<std::string>(), std::move(polygons), std::move(entries),
                            std::move(circulation), std::move(exits), lane_width);
  } catch (const ConfigError& e) {
    throw ParseError(e.what());
  }
}

RoundaboutLayout load_layout_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open layout file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return load_layout(buf.str());
}

json layout_to_json(const RoundaboutLayout& layout) {
  json doc;
  doc["schema_version"] = kLayoutSchemaVersion;
  doc["name"] = layout.name();
  doc["lane_width"] = layout.lane_width();
  doc["navigable_polygons"] = json::array();
  for (const auto& poly : layout.navigable_polygons())
    doc["navigable_polygons"].push_back(points_to_json(poly));
  doc["entries"] = json::array();
  for (const auto& e : layout.entries()) {
    doc["entries"].push_back({{"approach", points_to_json(e.approach.points())},
                              {"stop_station", e.stop_station},
                              {"merged", points_to_json(e.merged.points())}});
  }
  doc["circulation"] = json::array();
  for (const auto& c : layout.circulation()) doc["circulation"].push_back(points_to_json(c.points()));
  doc["exits"] = json::array();
  for (const auto& x : layout.exits()) doc["exits"].push_back(points_to_json(x.points()));
  return doc;
}

std::filesystem::path asset_dir() {
  if (const char* env = std::getenv("RRL_ASSET_DIR"); env && *env) return env;
  return RRL_ASSET_DIR_DEFAULT;
}

std::filesystem::path resolve_layout_path(std::string_view name_or_path) {
  if (name_or_path == "training" || name_or_path == "unseen")
    return asset_dir() / "layouts" / (std::string(name_or_path) + ".json");
  return std::filesystem::path(name_or_path);
}

}  // namespace rrl
