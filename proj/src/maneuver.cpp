#include "rrl/maneuver.hpp"

#include <algorithm>

#include "rrl/error.hpp"

namespace rrl {

std::string to_string(ManeuverState s) {
  switch (s) {
    case ManeuverState::Permitted: return "permitted";
    case ManeuverState::NotPermitted: return "not_permitted";
    case ManeuverState::Caution: return "caution";
  }
  return "unknown";
}

ManeuverState maneuver_from_string(const std::string& s) {
  if (s == "permitted") return ManeuverState::Permitted;
  if (s == "not_permitted") return ManeuverState::NotPermitted;
  if (s == "caution") return ManeuverState::Caution;
  throw ParseError("maneuver state: unknown value '" + s + "'");
}

ManeuverState maneuver_from_index(int index) {
  require(index >= 0 && index < kActionCount, "maneuver index out of range");
  return static_cast<ManeuverState>(index);
}

std::array<double, kActionCount> one_hot(ManeuverState s) {
  std::array<double, kActionCount> v{};
  v[static_cast<std::size_t>(index_of(s))] = 1.0;
  return v;
}

void ComfortParams::validate() const {
  if (!(a_max > 0.0)) throw ConfigError("comfort.a_max must be positive");
  if (!(d_max > 0.0)) throw ConfigError("comfort.d_max must be positive");
  if (!(h >= 0.0)) throw ConfigError("comfort.h must be non-negative");
}

double stopline_decel(double speed, double dist) {
  require(dist > 0.0, "stopline_decel: distance must be positive");
  return speed * speed / (2.0 * dist);
}

double acceleration_command(ManeuverState state, double agent_speed, double target_speed,
                            double dist_to_stop, const ComfortParams& c) {
  require(target_speed > 0.0, "acceleration_command: target speed must be positive");
  switch (state) {
    case ManeuverState::Permitted:
      return agent_speed < target_speed ? c.a_max : 0.0;
    case ManeuverState::NotPermitted:
      if (dist_to_stop <= 0.0) return -c.d_max;
      return -std::min(c.d_max, stopline_decel(agent_speed, dist_to_stop));
    case ManeuverState::Caution: {
      const double half = target_speed / 2.0;
      if (agent_speed < half) return c.a_max / 2.0;
      if (agent_speed > half + c.h) return -c.d_max / 2.0;
      return 0.0;
    }
  }
  return 0.0;
}

void RewardWeights::validate() const {
  for (double v : {w_ds, w_cf, beta, gamma_crash, psi, pen_caution, pen_notpermitted}) {
    if (!(v >= 0.0)) throw ConfigError("reward weights must be non-negative");
  }
}

double danger_reward(const SafetyEvents& e, double aggressiveness, const RewardWeights& w) {
  const double alpha = 1.0 - aggressiveness;
  return -w.w_ds * alpha * e.d_s - w.w_cf * alpha * e.c_f;
}

double terminal_reward(const EpisodeOutcome& outcome, double aggressiveness, const RewardWeights& w) {
  switch (outcome.kind) {
    case OutcomeKind::Reached: return 1.0;
    case OutcomeKind::Crashed: return -w.beta - w.gamma_crash * (1.0 - aggressiveness);
    case OutcomeKind::TimeOver: return -1.0;
  }
  return 0.0;
}

double indecision_reward(ManeuverState prev, ManeuverState cur, const RewardWeights& w) {
  if (prev != ManeuverState::Permitted) return 0.0;
  if (cur == ManeuverState::Caution) return -w.pen_caution;
  if (cur == ManeuverState::NotPermitted) return -w.pen_notpermitted;
  return 0.0;
}

double speed_reward(double current_speed, double target_speed, const RewardWeights& w) {
  require(target_speed > 0.0, "speed_reward: target speed must be positive");
  return w.psi * current_speed / target_speed;
}

RewardBreakdown step_reward(const SafetyEvents& events, const std::optional<EpisodeOutcome>& outcome,
                            ManeuverState prev, ManeuverState cur, double current_speed,
                            double target_speed, double aggressiveness, const RewardWeights& w) {
  RewardBreakdown r;
  r.r_danger = danger_reward(events, aggressiveness, w);
  r.r_terminal = outcome ? terminal_reward(*outcome, aggressiveness, w) : 0.0;
  r.r_indecision = indecision_reward(prev, cur, w);
  r.r_speed = speed_reward(current_speed, target_speed, w);
  r.total = r.r_danger + r.r_terminal + r.r_indecision + r.r_speed;
  return r;
}

}  // namespace rrl
