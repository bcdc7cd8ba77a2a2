#include "rrl/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rrl/error.hpp"

namespace rrl {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kOnRingTolerance = 0.05;

std::vector<Vec2> ring_arc(const Polyline& ring, double s0, double s1) {
  const double length = ring.length();
  if (s1 <= s0 + 1e-6) s1 += length;
  std::vector<Vec2> pts{ring.point_at(s0)};
  for (int lap = 0; lap < 2; ++lap) {
    for (std::size_t k = 0; k < ring.size(); ++k) {
      const double st = ring.stations()[k] + lap * length;
      if (st > s0 && st < s1) pts.push_back(ring.points()[k]);
    }
  }
  pts.push_back(ring.point_at(std::fmod(s1, length)));
  return pts;
}

}  // namespace

// ---------------------------------------------------------------------------
// RouteTable

RouteTable::RouteTable(std::shared_ptr<const RoundaboutLayout> layout) : layout_(std::move(layout)) {
  if (layout_->circulation().empty()) throw ConfigError("circulation: layout has no ring path");
  ring_ = layout_->circulation().front();
  const auto& entries = layout_->entries();
  for (std::size_t i = 0; i < entries.size(); ++i) {
    merge_station_.push_back(ring_.project(entries[i].approach.back()).station);
    active_.push_back(std::make_shared<const Route>(make_active_route(i, entries[i].approach)));
  }

  const auto& exits = layout_->exits();
  passive_.resize(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (exits.empty()) {
      passive_[i].push_back(active_[i]);
      continue;
    }
    for (std::size_t j = 0; j < exits.size(); ++j) {
      const double exit_station = ring_.project(exits[j].front()).station;
      const std::vector<std::vector<Vec2>> parts{
          entries[i].approach.points(), ring_arc(ring_, merge_station_[i], exit_station),
          exits[j].points()};
      Route r;
      r.path = join(parts);
      r.entry = i;
      r.stop_station = entries[i].stop_station;
      r.stop_point = entries[i].approach.point_at(entries[i].stop_station);
      r.ring_begin = entries[i].approach.length();
      r.ring_end = r.ring_begin + ring_distance(merge_station_[i], exit_station);
      if (r.ring_end <= r.ring_begin + 1e-6) r.ring_end += ring_.length();
      passive_[i].push_back(std::make_shared<const Route>(std::move(r)));
    }
  }
}

std::size_t RouteTable::exit_count() const { return passive_.empty() ? 0 : passive_.front().size(); }

std::shared_ptr<const Route> RouteTable::active_route(std::size_t entry) const {
  return active_.at(entry);
}

std::shared_ptr<const Route> RouteTable::passive_route(std::size_t entry, std::size_t exit) const {
  return passive_.at(entry).at(exit);
}

Route RouteTable::make_active_route(std::size_t entry, const Polyline& approach) const {
  const auto& spec = layout_->entries().at(entry);
  const std::vector<std::vector<Vec2>> parts{approach.points(), spec.merged.points()};
  Route r;
  r.path = join(parts);
  r.entry = entry;
  r.stop_point = spec.approach.point_at(spec.stop_station);
  r.stop_station = approach.project(r.stop_point).station;
  r.ring_begin = approach.length();

  std::size_t last_on_ring = 0;
  for (std::size_t k = 0; k < spec.merged.size(); ++k) {
    if (ring_.project(spec.merged.points()[k]).distance > kOnRingTolerance) break;
    last_on_ring = k;
  }
  r.ring_end = r.ring_begin + spec.merged.stations()[last_on_ring];
  return r;
}

std::optional<double> RouteTable::ring_station(const Route& route, double station) const {
  if (station < route.ring_begin || station > route.ring_end) return std::nullopt;
  return std::fmod(merge_station_.at(route.entry) + (station - route.ring_begin), ring_.length());
}

double RouteTable::ring_distance(double from, double to) const {
  const double length = ring_.length();
  double d = std::fmod(to - from, length);
  if (d < 0.0) d += length;
  return d;
}

// ---------------------------------------------------------------------------
// Vehicles and predicates

Pose VehicleState::pose() const {
  return station_to_pose(route->path, std::clamp(station, 0.0, route->path.length()));
}

OrientedBox VehicleState::box() const {
  const Pose p = pose();
  return {p.position, p.heading, length, width};
}

TrafficConfig traffic_level(const std::string& name, int max_passives) {
  if (max_passives < 0) throw ConfigError("traffic: max_passives must be >= 0");
  TrafficConfig t;
  t.max_passives = max_passives;
  t.level_name = name;
  return t;
}

std::string to_string(OutcomeKind kind) {
  switch (kind) {
    case OutcomeKind::Reached: return "reached";
    case OutcomeKind::Crashed: return "crashed";
    case OutcomeKind::TimeOver: return "timeover";
  }
  return "unknown";
}

OutcomeKind outcome_from_string(const std::string& s) {
  if (s == "reached") return OutcomeKind::Reached;
  if (s == "crashed") return OutcomeKind::Crashed;
  if (s == "timeover") return OutcomeKind::TimeOver;
  throw ParseError("outcome: unknown value '" + s + "'");
}

std::optional<double> corridor_gap(const VehicleState& me, const VehicleState& other, double lookahead,
                                   double lateral_margin) {
  const Pose mine = me.pose();
  const Pose theirs = other.pose();
  if (distance(mine.position, theirs.position) > lookahead + me.length + other.length) return std::nullopt;
  const double end = std::min(me.path().length(), me.station + lookahead);
  const Projection proj = me.path().project(theirs.position, me.station, end);
  if (proj.distance > (me.width + other.width) / 2 + lateral_margin) return std::nullopt;
  return proj.station - me.station - (me.length + other.length) / 2;
}

std::optional<Lead> find_lead(const std::vector<VehicleState>& vehicles, std::size_t me, double lookahead) {
  std::optional<Lead> best;
  for (std::size_t i = 0; i < vehicles.size(); ++i) {
    if (i == me) continue;
    const auto gap = corridor_gap(vehicles[me], vehicles[i], lookahead);
    if (gap && (!best || *gap < best->gap)) best = Lead{i, *gap};
  }
  return best;
}

int safety_violation(const VehicleState& active, const VehicleState& lead) {
  if (active.speed <= 0.0) return 0;
  const auto gap = corridor_gap(active, lead, std::max(50.0, active.speed * 2.0));
  if (!gap) return 0;
  return *gap < active.speed * 1.0 ? 1 : 0;
}

int cut_front_violation(const VehicleState& active, const VehicleState& passive) {
  const double reach = 3.0 * passive.speed * 1.0;
  if (reach <= 0.0) return 0;
  const Polyline& path = passive.path();
  const double s0 = passive.station + passive.length / 2;
  const double s1 = std::min(path.length(), s0 + reach);
  if (s1 <= s0) return 0;
  const OrientedBox target = active.box();
  const auto pts = path.resample(s0, s1, 1.0);
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const Vec2 d = pts[k + 1] - pts[k];
    const double len = norm(d);
    if (len <= 0.0) continue;
    const OrientedBox piece{lerp(pts[k], pts[k + 1], 0.5), std::atan2(d.y, d.x), len, passive.width};
    if (boxes_overlap(piece, target, /*closed=*/false)) return 1;
  }
  return 0;
}

bool detect_collision(const VehicleState& a, const VehicleState& b) {
  return boxes_overlap(a.box(), b.box(), /*closed=*/true);
}

double idm_accel(const PassiveParams& p, double speed, double desired_speed, double gap,
                 double closing_speed) {
  const double free_term = std::pow(speed / desired_speed, 4);
  double interaction = 0.0;
  if (std::isfinite(gap)) {
    if (gap <= 0.01) return -p.brake_max;
    const double dyn = speed * p.time_headway + speed * closing_speed / (2 * std::sqrt(p.a_max * p.comfort_brake));
    const double desired_gap = p.min_gap + std::max(0.0, dyn);
    interaction = (desired_gap / gap) * (desired_gap / gap);
  }
  return std::clamp(p.a_max * (1.0 - free_term - interaction), -p.brake_max, p.a_max);
}

namespace {

// Ring position of a circulating vehicle, or the virtual one of a committed
// vehicle on its approach (merge station minus the distance still to cover).
std::optional<double> ring_coordinate(const RouteTable& routes, const VehicleState& v) {
  const Route& r = *v.route;
  if (const auto on_ring = routes.ring_station(r, v.station)) return on_ring;
  if (v.committed && v.station < r.ring_begin)
    return routes.ring_merge_station(r.entry) - (r.ring_begin - v.station);
  return std::nullopt;
}

// Whether a passive waiting at its stop line may merge now.
bool ring_clear(const World& world, const VehicleState& v) {
  const auto& routes = world.routes();
  const auto& P = world.params().passive;
  const double merge = routes.ring_merge_station(v.route->entry);
  for (const auto& o : world.vehicles()) {
    if (&o == &v) continue;
    const Route& r = *o.route;
    double position;
    if (const auto on_ring = routes.ring_station(r, o.station)) {
      position = *on_ring;
    } else if (o.station < r.ring_begin &&
               (o.role == Role::Active ? o.station > r.stop_station - 1.0 : o.committed)) {
      position = routes.ring_merge_station(r.entry) - (r.ring_begin - o.station);
    } else {
      continue;
    }
    const double upstream = routes.ring_distance(position, merge);
    const double downstream = routes.ring_distance(merge, position);
    if (downstream < o.length + 3.0) return false;
    const double remaining_on_ring = r.ring_end - std::max(o.station, r.ring_begin);
    if (remaining_on_ring < upstream) continue;  // leaves the ring before reaching us
    const double time_to_merge = std::max(0.0, v.route->ring_begin - v.station) / std::max(v.speed, 2.0);
    const double needed = o.speed * (time_to_merge + P.merge_headway) + (o.length + v.length) / 2 + P.min_gap;
    if (upstream < std::max(P.critical_gap_min, needed)) return false;
  }
  return true;
}

}  // namespace

double passive_policy(World& world, VehicleState& v) {
  require(v.role == Role::Passive, "passive_policy: vehicle is not passive");
  const auto& P = world.params().passive;
  const auto& routes = world.routes();

  double gap = kInf;
  double closing = 0.0;
  for (const auto& o : world.vehicles()) {
    if (&o == &v) continue;
    const auto g = corridor_gap(v, o, P.lookahead, P.lateral_margin);
    if (g && *g < gap) {
      gap = *g;
      closing = v.speed - o.speed;
    }
  }
  // Committed passives still on their approach are projected onto the ring so
  // that circulating traffic makes room for them before the paths converge.
  if (const auto mine = ring_coordinate(routes, v)) {
    const double my_remaining = v.route->ring_end - v.station;
    for (const auto& o : world.vehicles()) {
      if (&o == &v || o.role != Role::Passive || !o.committed || o.station >= o.route->ring_begin) continue;
      const auto theirs = ring_coordinate(routes, o);
      const double d = routes.ring_distance(*mine, *theirs);
      if (d > P.lookahead || d > my_remaining) continue;
      const double g = d - (v.length + o.length) / 2;
      if (g < gap) {
        gap = g;
        closing = v.speed - o.speed;
      }
    }
  }

  // Undecided passives slow down toward the stop line.
  double desired = v.target_speed;
  const double to_stop = v.route->stop_station - v.station;
  if (!v.committed && to_stop > 0.0)
    desired = std::min(desired, std::sqrt(P.approach_speed * P.approach_speed + 2 * P.comfort_brake * to_stop));
  double accel = idm_accel(P, v.speed, desired, gap, closing);

  // Gap acceptance at the stop line.
  if (!v.committed && v.station < v.route->ring_begin) {
    const bool clear = ring_clear(world, v);
    if ((clear && to_stop <= 1.0) || to_stop < -0.5) {
      v.committed = true;
    } else if (!clear) {
      const double to_line = v.route->stop_station - v.station + P.min_gap;
      accel = std::min(accel, idm_accel(P, v.speed, v.target_speed, to_line, v.speed));
    }
  }

  // Yield to a merging active vehicle.
  const VehicleState* act = world.active();
  bool threatened = false;
  double to_conflict = 0.0;
  if (act && v.circulating()) {
    const Route& ar = *act->route;
    // The active vehicle is about to enter the ring lane in front of us.
    const double lane_entry = ar.ring_begin - act->length / 2 - P.merge_zone;
    const double time_to_lane = std::max(0.0, lane_entry - act->station) / std::max(act->speed, 0.1);
    const bool merging = time_to_lane <= P.yield_anticipation && act->station < ar.ring_begin + act->length;
    if (merging) {
      const double mine = *routes.ring_station(*v.route, v.station);
      to_conflict = routes.ring_distance(mine, routes.ring_merge_station(ar.entry));
      const double horizon = 3.0 * v.speed + v.length / 2 + P.merge_zone;
      threatened = to_conflict > v.length / 2 && to_conflict < horizon &&
                   v.route->ring_end - v.station >= to_conflict;
    }
  }
  if (!threatened) {
    v.yield = YieldDecision::Undecided;
  } else {
    const double stop_gap = to_conflict - v.length / 2 - 2.0;
    if (v.yield == YieldDecision::Undecided) {
      const double u = uniform(world.rng(), 0.0, 1.0);
      const bool feasible =
          stop_gap > 0.0 && v.speed * v.speed / (2 * stop_gap) <= P.yield_brake_max;
      v.yield = feasible && u < 1.0 - v.aggressiveness ? YieldDecision::Yield : YieldDecision::NoYield;
    }
    if (v.yield == YieldDecision::Yield)
      accel = std::min(accel, idm_accel(P, v.speed, v.target_speed, std::max(stop_gap, 0.0), v.speed));
  }
  return std::clamp(accel, -P.brake_max, P.a_max);
}

std::optional<EpisodeOutcome> episode_terminal(const World& world, const SafetyEvents& events) {
  const double clock = world.clock();
  const double mean_speed = clock > 0.0 ? world.odometer() / clock : 0.0;
  if (events.collided) return EpisodeOutcome{OutcomeKind::Crashed, clock, mean_speed};
  if (events.reached_goal) return EpisodeOutcome{OutcomeKind::Reached, clock, mean_speed};
  if (events.time_expired || clock >= world.time_budget())
    return EpisodeOutcome{OutcomeKind::TimeOver, world.time_budget(), mean_speed};
  return std::nullopt;
}

namespace {

// Whether the passive route (entry, exit) drives past the merge point of `merge_entry`.
bool passes_merge(const RouteTable& routes, std::size_t entry, std::size_t exit, std::size_t merge_entry) {
  if (entry == merge_entry || merge_entry >= routes.entry_count()) return true;
  const Route& r = *routes.passive_route(entry, exit);
  const double to_merge =
      routes.ring_distance(routes.ring_merge_station(entry), routes.ring_merge_station(merge_entry));
  return to_merge < r.ring_end - r.ring_begin;
}

}  // namespace

// ---------------------------------------------------------------------------
// World

World::World(std::shared_ptr<const RouteTable> routes, WorldParams params, TrafficConfig traffic,
             std::uint64_t seed)
    : routes_(std::move(routes)), params_(params), traffic_(std::move(traffic)), rng_(seed) {
  if (!(params_.dt > 0.0)) throw ConfigError("dt must be positive");
  if (traffic_.max_passives < 0) throw ConfigError("traffic: max_passives must be >= 0");
}

const VehicleState* World::active() const {
  for (const auto& v : vehicles_)
    if (v.role == Role::Active) return &v;
  return nullptr;
}

int World::passive_count() const {
  return static_cast<int>(std::count_if(vehicles_.begin(), vehicles_.end(),
                                        [](const VehicleState& v) { return v.role == Role::Passive; }));
}

int World::add_vehicle(VehicleState v) {
  v.id = next_id_++;
  vehicles_.push_back(std::move(v));
  return vehicles_.back().id;
}

void World::warm_up(std::size_t active_entry, double seconds) {
  active_entry_ = active_entry;
  const auto n = static_cast<long>(std::llround(seconds / params_.dt));
  for (long k = 0; k < n; ++k) advance(std::nullopt);
  steps_ = 0;
}

void World::insert_active(std::shared_ptr<const Route> route, double aggressiveness, double initial_speed,
                          double station) {
  require(station >= 0.0 && station <= route->path.length(), "insert_active: station outside the route");
  std::erase_if(vehicles_, [](const VehicleState& v) { return v.role == Role::Active; });
  active_entry_ = route->entry;
  VehicleState a;
  a.role = Role::Active;
  a.route = std::move(route);
  a.station = station;
  a.speed = std::max(0.0, initial_speed);
  a.length = params_.vehicle_length;
  a.width = params_.vehicle_width;
  a.aggressiveness = aggressiveness;
  a.target_speed = params_.target_speed;
  const double budget = std::max(params_.time_budget_floor,
                                 params_.time_budget_factor * a.route->path.length() / a.target_speed);
  budget_steps_ = static_cast<long>(std::ceil(budget / params_.dt - 1e-9));
  steps_ = 0;
  odometer_ = 0.0;
  add_vehicle(std::move(a));
}

void World::integrate(VehicleState& v, double accel) const {
  const double dt = params_.dt;
  const double next_speed = v.speed + accel * dt;
  double advance;
  if (next_speed >= 0.0) {
    advance = v.speed * dt + 0.5 * accel * dt * dt;
    v.speed = next_speed;
  } else {
    // Stops within the step; no reverse motion.
    advance = accel < 0.0 ? v.speed * v.speed / (-2.0 * accel) : 0.0;
    v.speed = 0.0;
  }
  v.station = std::min(v.station + std::max(0.0, advance), v.route->path.length());
}

void World::advance(std::optional<double> active_accel) {
  std::vector<double> accel(vehicles_.size(), 0.0);
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    if (vehicles_[i].role == Role::Passive) accel[i] = passive_policy(*this, vehicles_[i]);
    else accel[i] = active_accel.value_or(0.0);
  }
  for (std::size_t i = 0; i < vehicles_.size(); ++i) {
    auto& v = vehicles_[i];
    const double before = v.station;
    integrate(v, accel[i]);
    if (v.role == Role::Active) odometer_ += v.station - before;
  }
  ++steps_;
  std::erase_if(vehicles_, [](const VehicleState& v) {
    return v.role == Role::Passive && v.station >= v.route->path.length();
  });
  spawn_traffic();

  bool overlap = false;
  for (std::size_t i = 0; i < vehicles_.size() && !overlap; ++i) {
    if (vehicles_[i].role != Role::Passive) continue;
    for (std::size_t j = i + 1; j < vehicles_.size(); ++j) {
      if (vehicles_[j].role == Role::Passive && detect_collision(vehicles_[i], vehicles_[j])) {
        overlap = true;
        break;
      }
    }
  }
  if (overlap) ++passive_collision_steps_;
}

void World::spawn_traffic() {
  if (traffic_.max_passives <= 0 || traffic_.spawn_rate <= 0.0) return;
  const double p = 1.0 - std::exp(-traffic_.spawn_rate * params_.dt);
  if (!bernoulli(rng_, p)) return;

  const std::size_t n_entries = routes_->entry_count();
  std::vector<std::size_t> candidates;
  for (std::size_t e = 0; e < n_entries; ++e)
    if (e != active_entry_ || n_entries == 1) candidates.push_back(e);
  const std::size_t entry =
      candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng_)];
  std::vector<std::size_t> exits;
  for (std::size_t x = 0; x < routes_->exit_count(); ++x) {
    if (!traffic_.through_traffic || passes_merge(*routes_, entry, x, active_entry_)) exits.push_back(x);
  }
  if (exits.empty()) {
    for (std::size_t x = 0; x < routes_->exit_count(); ++x) exits.push_back(x);
  }
  const std::size_t exit = exits[std::uniform_int_distribution<std::size_t>(0, exits.size() - 1)(rng_)];
  const double aggressiveness = uniform(rng_, 0.0, 1.0);
  if (passive_count() >= traffic_.max_passives) return;

  VehicleState v;
  v.role = Role::Passive;
  v.route = routes_->passive_route(entry, exit);
  v.length = params_.vehicle_length;
  v.width = params_.vehicle_width;
  v.target_speed = params_.target_speed;
  v.aggressiveness = aggressiveness;
  const Vec2 origin = v.route->path.front();
  const double clearance = v.length + params_.passive.min_gap + 2.0;
  double gap = kInf;
  for (const auto& o : vehicles_) {
    if (distance(o.pose().position, origin) < clearance) return;  // blocked
    const auto g = corridor_gap(v, o, params_.passive.lookahead, params_.passive.lateral_margin);
    if (g && *g < gap) gap = *g;
  }
  const double usable = std::max(0.0, gap - params_.passive.min_gap);
  v.speed = std::min(v.target_speed, std::sqrt(2.0 * params_.passive.comfort_brake * usable));
  add_vehicle(std::move(v));
  ++spawned_;
}

SafetyEvents World::step(double active_accel) {
  require(std::isfinite(active_accel), "step: active acceleration must be finite");
  const VehicleState* before = active();
  require(before != nullptr, "step: no active vehicle in the world");
  advance(active_accel);

  SafetyEvents ev;
  std::size_t ai = 0;
  while (vehicles_[ai].role != Role::Active) ++ai;
  const VehicleState& a = vehicles_[ai];
  for (const auto& o : vehicles_) {
    if (o.role == Role::Passive && detect_collision(a, o)) ev.collided = true;
  }
  ev.reached_goal = !ev.collided && a.station >= a.route->path.length();
  ev.time_expired = !ev.collided && !ev.reached_goal && steps_ >= budget_steps_;

  if (const auto lead = find_lead(vehicles_, ai, std::max(50.0, a.speed * 2.0)))
    ev.d_s = safety_violation(a, vehicles_[lead->index]);
  for (const auto& o : vehicles_) {
    if (o.role == Role::Passive && o.circulating() && cut_front_violation(a, o)) {
      ev.c_f = 1;
      break;
    }
  }
  return ev;
}

}  // namespace rrl
