#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <span>
#include <vector>

#include "rrl/geometry.hpp"
#include "rrl/layout.hpp"
#include "rrl/maneuver.hpp"
#include "rrl/random.hpp"
#include "rrl/world.hpp"

namespace rrl {

inline constexpr int kChannelCount = 4;
enum Channel : int { kNavigable = 0, kPath = 1, kObstacles = 2, kStopLine = 3 };

struct FrameSpec {
  int grid_size = 84;    // cells per side
  double window = 50.0;  // meters per side

  [[nodiscard]] double resolution() const { return window / grid_size; }
  void validate() const;
};

/// Four binary ego-centric layers; the ego faces "up" (row 0 is ahead of it).
/// Cells are stored channel-major, then row-major.
struct SemanticFrame {
  int grid_size = 0;
  double window = 0.0;
  std::vector<std::uint8_t> cells;

  SemanticFrame() = default;
  explicit SemanticFrame(const FrameSpec& spec);

  [[nodiscard]] std::size_t plane_size() const {
    return static_cast<std::size_t>(grid_size) * static_cast<std::size_t>(grid_size);
  }
  [[nodiscard]] std::uint8_t at(int channel, int row, int col) const {
    return cells[static_cast<std::size_t>(channel) * plane_size() +
                 static_cast<std::size_t>(row) * grid_size + static_cast<std::size_t>(col)];
  }
  void set(int channel, int row, int col) {
    cells[static_cast<std::size_t>(channel) * plane_size() +
          static_cast<std::size_t>(row) * grid_size + static_cast<std::size_t>(col)] = 1;
  }
  [[nodiscard]] std::size_t count(int channel) const;
  [[nodiscard]] bool operator==(const SemanticFrame&) const = default;
};

/// World position of the center of a cell for an ego at `ego`.
Vec2 cell_center(const Pose& ego, const FrameSpec& spec, int row, int col);

/// A perceived vehicle footprint.
struct VehicleBox {
  int id = 0;
  bool ego = false;
  OrientedBox box;
  double speed = 0.0;
};

std::vector<VehicleBox> vehicle_boxes(const World& world, int ego_id);

struct PerceptionNoiseConfig {
  double pos_sigma = 0.5;       // meters
  double size_sigma = 0.2;      // meters
  double heading_sigma = 0.05;  // radians
  bool enabled = false;

  void validate() const;
};

/// Perturbs position, size and heading of every non-ego box with independent
/// zero-mean Gaussians. Sizes are kept at least 0.1 m. The input is not
/// modified; with the config disabled the output equals the input.
std::vector<VehicleBox> apply_perception_noise(std::span<const VehicleBox> boxes,
                                               const PerceptionNoiseConfig& cfg, Rng& rng);

/// Everything the rasterizer draws, already resolved to geometry.
struct RasterScene {
  const RoundaboutLayout* layout = nullptr;
  Pose ego;
  const Polyline* path = nullptr;  // ego path; drawn from `path_from` to its end
  double path_from = 0.0;
  double path_half_width = 0.9;
  Segment stop_line;
  std::span<const VehicleBox> boxes;
};

SemanticFrame rasterize(const RasterScene& scene, const FrameSpec& spec);

/// Noise-free frame of the world around `ego`.
SemanticFrame rasterize(const World& world, const VehicleState& ego, const FrameSpec& spec);

/// Non-visual channel: speeds, aggressiveness and the last maneuver state.
struct NonVisual {
  double agent_speed = 0.0;
  double target_speed = 1.0;
  double aggressiveness = 0.0;
  ManeuverState last_action = ManeuverState::NotPermitted;
};

inline constexpr int kNonVisualSize = 6;

/// Network input features: speeds divided by the target speed, aggressiveness,
/// then the one-hot last action.
std::array<double, kNonVisualSize> nonvisual_features(const NonVisual& nv);

struct ObservationBundle {
  std::vector<SemanticFrame> frames;  // oldest first; length k
  NonVisual nonvisual;

  [[nodiscard]] int grid_size() const { return frames.empty() ? 0 : frames.front().grid_size; }
  [[nodiscard]] int planes() const { return static_cast<int>(frames.size()) * kChannelCount; }
};

/// The k most recent frames, zero-filled at episode start.
class FrameHistory {
 public:
  FrameHistory(int k, const FrameSpec& spec);
  void push(SemanticFrame frame);
  void clear() { recent_.clear(); }
  [[nodiscard]] std::vector<SemanticFrame> stacked() const;
  [[nodiscard]] int k() const { return k_; }

 private:
  int k_;
  FrameSpec spec_;
  std::deque<SemanticFrame> recent_;
};

ObservationBundle build_observation(const FrameHistory& history, const VehicleState& ego,
                                    double aggressiveness, ManeuverState last_action);

/// Writes frames as a one-line JSON header `{grid_size, window, k}` followed by
/// the raw 8-bit cells (frame, channel, row, column order).
void write_frames(std::ostream& out, std::span<const SemanticFrame> frames);
std::vector<SemanticFrame> read_frames(std::istream& in);

}  // namespace rrl
