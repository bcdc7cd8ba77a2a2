#include "rrl/replay.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "rrl/error.hpp"

namespace rrl {

using nlohmann::json;

std::string to_string(Role role) { return role == Role::Active ? "active" : "passive"; }

Role role_from_string(const std::string& s) {
  if (s == "active") return Role::Active;
  if (s == "passive") return Role::Passive;
  throw ParseError("role: unknown value '" + s + "'");
}

ReplayRecord capture_record(const World& world, std::optional<ManeuverState> active_state,
                            const SafetyEvents& events) {
  ReplayRecord rec;
  rec.t = world.clock();
  rec.active_state = active_state;
  rec.events = events;
  for (const auto& v : world.vehicles()) {
    const Pose p = v.pose();
    rec.vehicles.push_back({v.id, v.role, p.position.x, p.position.y, p.heading, v.speed, v.length, v.width});
  }
  return rec;
}

namespace {

json record_to_json(const ReplayRecord& r) {
  json vehicles = json::array();
  for (const auto& v : r.vehicles)
    vehicles.push_back({{"id", v.id},
                        {"role", to_string(v.role)},
                        {"x", v.x},
                        {"y", v.y},
                        {"heading", v.heading},
                        {"speed", v.speed},
                        {"length", v.length},
                        {"width", v.width}});
  return {{"t", r.t},
          {"vehicles", std::move(vehicles)},
          {"active_state", r.active_state ? json(to_string(*r.active_state)) : json(nullptr)},
          {"events",
           {{"d_s", r.events.d_s},
            {"c_f", r.events.c_f},
            {"collided", r.events.collided},
            {"reached_goal", r.events.reached_goal},
            {"time_expired", r.events.time_expired}}}};
}

template <typename T>
T field(const json& j, const char* name, std::size_t line) {
  if (!j.contains(name)) throw ParseError("scenario line " + std::to_string(line) + ": missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw ParseError("scenario line " + std::to_string(line) + ": bad field '" + name + "'");
  }
}

ReplayRecord record_from_json(const json& j, std::size_t line) {
  ReplayRecord r;
  r.t = field<double>(j, "t", line);
  const json vehicles = field<json>(j, "vehicles", line);
  if (!vehicles.is_array()) throw ParseError("scenario line " + std::to_string(line) + ": bad field 'vehicles'");
  for (const auto& v : vehicles) {
    ReplayVehicle rv;
    rv.id = field<int>(v, "id", line);
    try {
      rv.role = role_from_string(field<std::string>(v, "role", line));
    } catch (const ParseError&) {
      throw ParseError("scenario line " + std::to_string(line) + ": bad field 'role'");
    }
    rv.x = field<double>(v, "x", line);
    rv.y = field<double>(v, "y", line);
    rv.heading = field<double>(v, "heading", line);
    rv.speed = field<double>(v, "speed", line);
    if (v.contains("length")) rv.length = field<double>(v, "length", line);
    if (v.contains("width")) rv.width = field<double>(v, "width", line);
    r.vehicles.push_back(rv);
  }
  if (j.contains("active_state") && !j.at("active_state").is_null()) {
    try {
      r.active_state = maneuver_from_string(field<std::string>(j, "active_state", line));
    } catch (const std::exception&) {
      throw ParseError("scenario line " + std::to_string(line) + ": bad field 'active_state'");
    }
  }
  if (j.contains("events")) {
    const json& e = j.at("events");
    r.events.d_s = field<int>(e, "d_s", line);
    r.events.c_f = field<int>(e, "c_f", line);
    r.events.collided = field<bool>(e, "collided", line);
    r.events.reached_goal = field<bool>(e, "reached_goal", line);
    r.events.time_expired = field<bool>(e, "time_expired", line);
  }
  return r;
}

}  // namespace

void write_scenario(std::ostream& out, const ScenarioLog& log) {
  require(log.layout != nullptr, "write_scenario: scenario has no layout");
  const json header{{"schema_version", kReplaySchemaVersion},
                    {"id", log.id},
                    {"layout", layout_to_json(*log.layout)},
                    {"entry", log.entry},
                    {"frame_period", log.frame_period}};
  out << header.dump() << '\n';
  for (const auto& r : log.records) out << record_to_json(r).dump() << '\n';
}

ScenarioLog read_scenario(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("scenario line 1: missing header");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception&) {
    throw ParseError("scenario line 1: header is not valid JSON");
  }
  if (field<int>(header, "schema_version", 1) != kReplaySchemaVersion)
    throw ParseError("scenario line 1: unsupported schema_version");
  ScenarioLog log;
  log.id = field<std::string>(header, "id", 1);
  try {
    log.layout = std::make_shared<const RoundaboutLayout>(load_layout(field<json>(header, "layout", 1).dump()));
  } catch (const ParseError& e) {
    throw ParseError(std::string("scenario line 1: bad field 'layout': ") + e.what());
  } catch (const ConfigError& e) {
    throw ParseError(std::string("scenario line 1: bad field 'layout': ") + e.what());
  }
  log.entry = field<std::size_t>(header, "entry", 1);
  if (log.entry >= log.layout->entries().size()) throw ParseError("scenario line 1: bad field 'entry'");
  if (header.contains("frame_period")) log.frame_period = field<double>(header, "frame_period", 1);
  if (!(log.frame_period > 0.0)) throw ParseError("scenario line 1: bad field 'frame_period'");
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception&) {
      throw ParseError("scenario line " + std::to_string(n) + ": not valid JSON");
    }
    log.records.push_back(record_from_json(j, n));
  }
  return log;
}

void write_scenario_file(const std::filesystem::path& path, const ScenarioLog& log) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write scenario file " + path.string());
  write_scenario(out, log);
  if (!out) throw ConfigError("failed writing scenario file " + path.string());
}

ScenarioLog read_scenario_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file " + path.string());
  return read_scenario(in);
}

ScenarioLog export_stopline_scenario(std::shared_ptr<const RouteTable> routes, const EnvConfig& cfg,
                                     std::size_t entry, int frames, std::uint64_t seed, std::string id) {
  require(frames >= 1, "export_stopline_scenario: frames must be >= 1");
  require(entry < routes->entry_count(), "export_stopline_scenario: entry out of range");
  World world(routes, cfg.world, cfg.traffic, seed);
  world.warm_up(entry, cfg.world.warmup);
  const auto route = routes->active_route(entry);
  world.insert_active(route, 0.5, 0.0, route->stop_station);
  ScenarioLog log;
  log.id = std::move(id);
  log.layout = routes->layout_ptr();
  log.entry = entry;
  log.frame_period = cfg.world.dt;
  log.records.push_back(capture_record(world, std::nullopt, SafetyEvents{}));
  while (static_cast<int>(log.records.size()) < frames) {
    const SafetyEvents ev = world.step(0.0);
    log.records.push_back(capture_record(world, std::nullopt, ev));
  }
  return log;
}

}  // namespace rrl
