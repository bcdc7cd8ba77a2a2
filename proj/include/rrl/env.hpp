#pragma once

#include <cstdint>
#include <memory>
#include <optional>

#include "rrl/geometry.hpp"
#include "rrl/maneuver.hpp"
#include "rrl/perception.hpp"
#include "rrl/world.hpp"

namespace rrl {

struct EnvConfig {
  WorldParams world;
  TrafficConfig traffic;
  ComfortParams comfort;
  RewardWeights weights;
  FrameSpec frame{21, 50.0};
  int history = 4;
  PathNoiseConfig path_noise;
  PerceptionNoiseConfig perception_noise;
  /// Build observations each step. Baselines that read the world directly
  /// switch this off.
  bool observe = true;

  void validate() const;
};

struct StepResult {
  SafetyEvents events;
  RewardBreakdown reward;
  std::optional<EpisodeOutcome> outcome;
  [[nodiscard]] bool done() const { return outcome.has_value(); }
};

/// One roundabout-insertion episode around a World: warm-up traffic, the
/// active vehicle, the maneuver control law, rewards and observations.
class InsertionEnv {
 public:
  InsertionEnv(std::shared_ptr<const RouteTable> routes, EnvConfig cfg);

  /// Starts a new episode on `entry` with the given active aggressiveness.
  void reset(std::uint64_t seed, std::size_t entry, double aggressiveness);
  /// Applies a maneuver state for one step.
  StepResult step(ManeuverState action);

  /// Observation of the current state (requires `observe`).
  [[nodiscard]] const ObservationBundle& observation() const;
  [[nodiscard]] const World& world() const { return *world_; }
  [[nodiscard]] const VehicleState& active() const { return *world_->active(); }
  [[nodiscard]] double aggressiveness() const { return aggressiveness_; }
  [[nodiscard]] ManeuverState last_action() const { return last_action_; }
  [[nodiscard]] const EnvConfig& config() const { return cfg_; }
  [[nodiscard]] const RouteTable& routes() const { return *routes_; }
  [[nodiscard]] std::size_t entry() const { return entry_; }
  [[nodiscard]] bool done() const { return done_; }
  /// Distance to the active vehicle's stop line (<= 0 once past it).
  [[nodiscard]] double dist_to_stop() const;

 private:
  void observe();

  std::shared_ptr<const RouteTable> routes_;
  EnvConfig cfg_;
  std::optional<World> world_;
  FrameHistory history_;
  ObservationBundle obs_;
  Rng noise_rng_;
  std::size_t entry_ = 0;
  double aggressiveness_ = 0.0;
  ManeuverState last_action_ = ManeuverState::NotPermitted;
  bool done_ = true;
};

}  // namespace rrl
