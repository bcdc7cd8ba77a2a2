#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rrl/geometry.hpp"
#include "rrl/layout.hpp"
#include "rrl/random.hpp"

namespace rrl {

enum class Role { Active, Passive };

/// A drivable route through the roundabout together with the stations where
/// it joins and leaves the circulating ring.
struct Route {
  Polyline path;
  double stop_station = 0.0;
  double ring_begin = 0.0;
  double ring_end = 0.0;
  std::size_t entry = 0;
  Vec2 stop_point;  // world position of the entry's stop line center
};

/// Immutable route set derived from one layout; shared by every world built on it.
class RouteTable {
 public:
  explicit RouteTable(std::shared_ptr<const RoundaboutLayout> layout);

  [[nodiscard]] const RoundaboutLayout& layout() const { return *layout_; }
  [[nodiscard]] std::shared_ptr<const RoundaboutLayout> layout_ptr() const { return layout_; }
  [[nodiscard]] std::size_t entry_count() const { return layout_->entries().size(); }
  [[nodiscard]] std::size_t exit_count() const;

  [[nodiscard]] std::shared_ptr<const Route> active_route(std::size_t entry) const;
  [[nodiscard]] std::shared_ptr<const Route> passive_route(std::size_t entry, std::size_t exit) const;
  /// Active route whose approach leg is replaced (e.g. by a perturbed path
  /// ending at the same merge point).
  [[nodiscard]] Route make_active_route(std::size_t entry, const Polyline& approach) const;

  [[nodiscard]] const Polyline& ring() const { return ring_; }
  /// Ring station of the point where the entry's approach joins the ring.
  [[nodiscard]] double ring_merge_station(std::size_t entry) const { return merge_station_.at(entry); }
  /// Position of a vehicle on the ring, if its current station is on the ring part.
  [[nodiscard]] std::optional<double> ring_station(const Route& route, double station) const;
  /// Distance travelled along the ring from `from` to `to` (wrapping).
  [[nodiscard]] double ring_distance(double from, double to) const;

 private:
  std::shared_ptr<const RoundaboutLayout> layout_;
  Polyline ring_;
  std::vector<double> merge_station_;
  std::vector<std::shared_ptr<const Route>> active_;
  std::vector<std::vector<std::shared_ptr<const Route>>> passive_;
};

enum class YieldDecision { Undecided, Yield, NoYield };

struct VehicleState {
  int id = 0;
  Role role = Role::Passive;
  std::shared_ptr<const Route> route;
  double station = 0.0;
  double speed = 0.0;
  double length = 4.5;
  double width = 1.8;
  double aggressiveness = 0.0;
  double target_speed = 8.33;
  // Passive bookkeeping.
  bool committed = false;
  YieldDecision yield = YieldDecision::Undecided;

  [[nodiscard]] const Polyline& path() const { return route->path; }
  [[nodiscard]] Pose pose() const;
  [[nodiscard]] OrientedBox box() const;
  [[nodiscard]] bool circulating() const {
    return station >= route->ring_begin && station <= route->ring_end;
  }
};

struct TrafficConfig {
  int max_passives = 8;
  std::string level_name = "high";
  double spawn_rate = 1.0;  // vehicles per second
  /// Restrict passive exits to routes that drive past the active vehicle's
  /// merge point, concentrating interactions when only a few passives exist.
  bool through_traffic = false;
};

/// Named traffic level with the default spawn rate. Throws ConfigError on a
/// negative cap.
TrafficConfig traffic_level(const std::string& name, int max_passives);

/// Car-following (intelligent driver model) and yielding parameters for passives.
struct PassiveParams {
  double a_max = 1.5;
  double comfort_brake = 2.0;
  double brake_max = 6.0;
  double time_headway = 1.2;
  double min_gap = 2.0;
  double lookahead = 50.0;
  double approach_speed = 4.0;     // speed at which an undecided passive reaches its stop line
  double merge_headway = 1.5;      // seconds of ring traffic kept clear behind a merging passive
  double critical_gap_min = 12.0;  // meters
  double lateral_margin = 0.5;     // added to the half widths when deciding who shares a corridor
  double yield_brake_max = 4.0;    // a yield needing harder braking is not attempted
  double yield_anticipation = 1.0; // seconds before the active vehicle reaches the ring lane
  double merge_zone = 3.0;         // meters before the merge point where the lanes touch
};

struct WorldParams {
  double dt = 0.1;
  double time_budget_factor = 4.0;
  double time_budget_floor = 20.0;
  double vehicle_length = 4.5;
  double vehicle_width = 1.8;
  double target_speed = 8.33;
  double warmup = 30.0;
  double active_initial_speed = 5.0;
  PassiveParams passive;
};

struct SafetyEvents {
  int d_s = 0;
  int c_f = 0;
  bool collided = false;
  bool reached_goal = false;
  bool time_expired = false;
};

enum class OutcomeKind { Reached, Crashed, TimeOver };

std::string to_string(OutcomeKind kind);
OutcomeKind outcome_from_string(const std::string& s);

struct EpisodeOutcome {
  OutcomeKind kind = OutcomeKind::TimeOver;
  double duration = 0.0;
  double mean_speed = 0.0;
};

/// The single mutable simulation state: vehicles, clock and random stream.
///
/// Copyable value. All randomness comes from the world's own generator, so two
/// worlds built with equal seeds and driven by equal actions evolve
/// bit-identically.
class World {
 public:
  World(std::shared_ptr<const RouteTable> routes, WorldParams params, TrafficConfig traffic,
        std::uint64_t seed);

  /// Runs traffic alone for `seconds`, spawning only at entries other than
  /// `active_entry`.
  void warm_up(std::size_t active_entry, double seconds);
  /// Places the active vehicle on its route (at `station`, default the start)
  /// and starts the clock.
  void insert_active(std::shared_ptr<const Route> route, double aggressiveness,
                     double initial_speed, double station = 0.0);

  /// Advances one fixed step. Throws ContractViolation on non-finite accel.
  SafetyEvents step(double active_accel);
  /// One Poisson spawn tick over the current step length.
  void spawn_traffic();

  [[nodiscard]] const std::vector<VehicleState>& vehicles() const { return vehicles_; }
  std::vector<VehicleState>& mutable_vehicles() { return vehicles_; }
  [[nodiscard]] const VehicleState* active() const;
  [[nodiscard]] int passive_count() const;
  [[nodiscard]] double clock() const { return static_cast<double>(steps_) * params_.dt; }
  [[nodiscard]] long steps() const { return steps_; }
  [[nodiscard]] double time_budget() const { return static_cast<double>(budget_steps_) * params_.dt; }
  [[nodiscard]] double odometer() const { return odometer_; }
  [[nodiscard]] const WorldParams& params() const { return params_; }
  [[nodiscard]] const TrafficConfig& traffic() const { return traffic_; }
  void set_traffic(const TrafficConfig& t) { traffic_ = t; }
  [[nodiscard]] const RouteTable& routes() const { return *routes_; }
  [[nodiscard]] std::shared_ptr<const RouteTable> routes_ptr() const { return routes_; }
  [[nodiscard]] const RoundaboutLayout& layout() const { return routes_->layout(); }
  [[nodiscard]] long passive_collision_steps() const { return passive_collision_steps_; }
  [[nodiscard]] long spawn_count() const { return spawned_; }
  Rng& rng() { return rng_; }

  /// Inserts a vehicle directly (tests, replays). Returns its id.
  int add_vehicle(VehicleState v);

 private:
  void advance(std::optional<double> active_accel);
  void integrate(VehicleState& v, double accel) const;

  std::shared_ptr<const RouteTable> routes_;
  WorldParams params_;
  TrafficConfig traffic_;
  Rng rng_;
  std::vector<VehicleState> vehicles_;
  long steps_ = 0;
  long budget_steps_ = 0;
  double odometer_ = 0.0;
  std::size_t active_entry_ = 0;
  int next_id_ = 1;
  long passive_collision_steps_ = 0;
  long spawned_ = 0;
};

/// Distance ahead along `me`'s path to `other` (bumper to bumper), if `other`
/// sits on `me`'s lane corridor within the look-ahead window.
std::optional<double> corridor_gap(const VehicleState& me, const VehicleState& other,
                                   double lookahead = 50.0, double lateral_margin = 0.0);

struct Lead {
  std::size_t index;
  double gap;
};
std::optional<Lead> find_lead(const std::vector<VehicleState>& vehicles, std::size_t me,
                              double lookahead = 50.0);

/// Passive acceleration: car following toward target speed, gap acceptance
/// at its own stop line, and a probabilistic yield to a merging active
/// vehicle (probability 1 - aggressiveness). May draw from the world's rng
/// and update the vehicle's yield decision.
double passive_policy(World& world, VehicleState& v);

/// 1 iff the bumper-to-bumper gap to `lead` is below one second of the
/// active vehicle's travel.
int safety_violation(const VehicleState& active, const VehicleState& lead);
/// 1 iff the active footprint strictly enters the region covering three
/// seconds of the passive's travel ahead of its front bumper.
int cut_front_violation(const VehicleState& active, const VehicleState& passive);
/// Closed oriented-rectangle overlap; symmetric.
bool detect_collision(const VehicleState& a, const VehicleState& b);

std::optional<EpisodeOutcome> episode_terminal(const World& world, const SafetyEvents& events);

/// Intelligent driver model acceleration toward `desired_speed` given the
/// gap and closing speed to a leader (gap = +inf for free road).
double idm_accel(const PassiveParams& p, double speed, double desired_speed, double gap,
                 double closing_speed);

}  // namespace rrl
