#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "rrl/env.hpp"
#include "rrl/layout.hpp"
#include "rrl/maneuver.hpp"
#include "rrl/world.hpp"

namespace rrl {

inline constexpr int kReplaySchemaVersion = 1;

struct ReplayVehicle {
  int id = 0;
  Role role = Role::Passive;
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  double length = 4.5;
  double width = 1.8;
};

/// One simulation step as seen from outside: poses, the active maneuver state
/// applied in this step (absent for recorded traffic) and the step's events.
struct ReplayRecord {
  double t = 0.0;
  std::vector<ReplayVehicle> vehicles;
  std::optional<ManeuverState> active_state;
  SafetyEvents events;
};

/// A replay log. On disk it is line-delimited JSON: a header line
/// `{schema_version, id, layout, entry, frame_period}` followed by one line
/// `{t, vehicles:[{id, role, x, y, heading, speed, length, width}],
/// active_state, events:{d_s, c_f, collided, reached_goal, time_expired}}` per step.
struct ScenarioLog {
  std::string id;
  std::shared_ptr<const RoundaboutLayout> layout;
  std::size_t entry = 0;
  double frame_period = 0.1;
  std::vector<ReplayRecord> records;

  [[nodiscard]] std::size_t frame_count() const { return records.size(); }
};

std::string to_string(Role role);
Role role_from_string(const std::string& s);

ReplayRecord capture_record(const World& world, std::optional<ManeuverState> active_state,
                            const SafetyEvents& events);

/// Throws ParseError naming the offending line and field.
void write_scenario(std::ostream& out, const ScenarioLog& log);
ScenarioLog read_scenario(std::istream& in);
void write_scenario_file(const std::filesystem::path& path, const ScenarioLog& log);
ScenarioLog read_scenario_file(const std::filesystem::path& path);

/// Records `frames` steps of traffic with the active vehicle held stationary at
/// its stop line, the viewpoint used for human decision capture.
ScenarioLog export_stopline_scenario(std::shared_ptr<const RouteTable> routes, const EnvConfig& cfg,
                                     std::size_t entry, int frames, std::uint64_t seed, std::string id);

}  // namespace rrl
