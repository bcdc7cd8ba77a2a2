#include "rrl/env.hpp"

#include "rrl/error.hpp"

namespace rrl {

void EnvConfig::validate() const {
  if (!(world.dt > 0.0)) throw ConfigError("world.dt must be positive");
  if (!(world.target_speed > 0.0)) throw ConfigError("world.target_speed must be positive");
  if (traffic.max_passives < 0) throw ConfigError("traffic.max_passives must be >= 0");
  if (traffic.spawn_rate < 0.0) throw ConfigError("traffic.spawn_rate must be >= 0");
  if (history < 1) throw ConfigError("history must be >= 1");
  if (!(path_noise.anchor_sigma >= 0.0)) throw ConfigError("path_noise.anchor_sigma must be >= 0");
  comfort.validate();
  weights.validate();
  frame.validate();
  perception_noise.validate();
}

InsertionEnv::InsertionEnv(std::shared_ptr<const RouteTable> routes, EnvConfig cfg)
    : routes_(std::move(routes)), cfg_(std::move(cfg)), history_(cfg_.history, cfg_.frame) {
  cfg_.validate();
}

void InsertionEnv::reset(std::uint64_t seed, std::size_t entry, double aggressiveness) {
  require(entry < routes_->entry_count(), "reset: entry index out of range");
  entry_ = entry;
  aggressiveness_ = aggressiveness;
  last_action_ = ManeuverState::NotPermitted;
  done_ = false;
  noise_rng_.seed(derive_seed(seed, 1));

  world_.emplace(routes_, cfg_.world, cfg_.traffic, derive_seed(seed, 0));
  world_->warm_up(entry, cfg_.world.warmup);

  std::shared_ptr<const Route> route = routes_->active_route(entry);
  if (cfg_.path_noise.enabled) {
    const auto& spec = routes_->layout().entries()[entry];
    const Polyline approach = perturb_path(spec.approach, spec.stop_station, cfg_.path_noise, noise_rng_);
    route = std::make_shared<const Route>(routes_->make_active_route(entry, approach));
  }
  world_->insert_active(route, aggressiveness, cfg_.world.active_initial_speed);

  history_.clear();
  if (cfg_.observe) observe();
}

double InsertionEnv::dist_to_stop() const {
  const auto& a = active();
  return a.route->stop_station - a.station;
}

void InsertionEnv::observe() {
  const VehicleState& ego = active();
  const auto truth = vehicle_boxes(*world_, ego.id);
  const auto seen = apply_perception_noise(truth, cfg_.perception_noise, noise_rng_);
  RasterScene scene;
  scene.layout = &routes_->layout();
  scene.ego = ego.pose();
  scene.path = &ego.path();
  scene.path_from = ego.station;
  scene.path_half_width = ego.width / 2;
  scene.stop_line = routes_->layout().stop_line(entry_);
  scene.boxes = seen;
  history_.push(rasterize(scene, cfg_.frame));
  obs_ = build_observation(history_, ego, aggressiveness_, last_action_);
}

const ObservationBundle& InsertionEnv::observation() const {
  require(cfg_.observe, "observation: this environment does not build observations");
  return obs_;
}

StepResult InsertionEnv::step(ManeuverState action) {
  require(!done_, "step: episode already finished");
  const VehicleState& before = active();
  const double accel =
      acceleration_command(action, before.speed, before.target_speed, dist_to_stop(), cfg_.comfort);
  StepResult r;
  r.events = world_->step(accel);
  r.outcome = episode_terminal(*world_, r.events);
  const VehicleState& after = active();
  r.reward = step_reward(r.events, r.outcome, last_action_, action, after.speed, after.target_speed,
                         aggressiveness_, cfg_.weights);
  last_action_ = action;
  done_ = r.outcome.has_value();
  if (cfg_.observe) observe();
  return r;
}

}  // namespace rrl
