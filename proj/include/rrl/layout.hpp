#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rrl/geometry.hpp"

namespace rrl {

using Polygon = std::vector<Vec2>;

inline constexpr int kLayoutSchemaVersion = 1;

struct EntrySpec {
  Polyline approach;      // from the arm origin to the merge point on the ring
  double stop_station;    // stop line position along `approach`
  Polyline merged;        // ring arc and exit leg driven after merging
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

/// Even-odd point-in-region test over a set of polygons, boundary inclusive.
/// Brute force over every edge; RoundaboutLayout answers the same question
/// through a banded edge index.
bool point_in_polygons(std::span<const Polygon> polygons, Vec2 p);

/// Static description of one single-lane roundabout.
///
/// Navigable space is the even-odd union of `navigable_polygons`, so the
/// central island is carved out by listing it as a second polygon. Paths are
/// lane center lines in meters.
class RoundaboutLayout {
 public:
  RoundaboutLayout(std::string name, std::vector<Polygon> navigable, std::vector<EntrySpec> entries,
                   std::vector<Polyline> circulation, std::vector<Polyline> exits,
                   double lane_width = 4.0);

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] const std::vector<Polygon>& navigable_polygons() const { return navigable_; }
  [[nodiscard]] const std::vector<EntrySpec>& entries() const { return entries_; }
  [[nodiscard]] const std::vector<Polyline>& circulation() const { return circulation_; }
  [[nodiscard]] const std::vector<Polyline>& exits() const { return exits_; }
  [[nodiscard]] double lane_width() const { return lane_width_; }

  [[nodiscard]] bool navigable(Vec2 p) const;
  /// Stop line of an entry: a lane-wide segment across the approach.
  [[nodiscard]] Segment stop_line(std::size_t entry) const;

 private:
  struct Edge {
    Vec2 a;
    Vec2 b;
  };

  void build_index();

  std::string name_;
  std::vector<Polygon> navigable_;
  std::vector<EntrySpec> entries_;
  std::vector<Polyline> circulation_;
  std::vector<Polyline> exits_;
  double lane_width_;

  double band_y0_ = 0.0;
  double band_height_ = 1.0;
  double x_min_ = 0.0;
  double x_max_ = 0.0;
  std::vector<std::vector<Edge>> bands_;
};

/// True iff p lies in the layout's navigable space (boundary included).
bool point_in_navigable(const RoundaboutLayout& layout, Vec2 p);

RoundaboutLayout load_layout(std::string_view document);
RoundaboutLayout load_layout_file(const std::filesystem::path& path);
nlohmann::json layout_to_json(const RoundaboutLayout& layout);

/// Resolves "training"/"unseen" to the bundled assets, anything else as a path.
std::filesystem::path resolve_layout_path(std::string_view name_or_path);
std::filesystem::path asset_dir();

}  // namespace rrl
