#pragma once

#include <array>
#include <optional>
#include <string>

#include "rrl/world.hpp"

namespace rrl {

/// The three discrete maneuver states. The numeric values fix the one-hot
/// and network output ordering.
enum class ManeuverState { Permitted = 0, NotPermitted = 1, Caution = 2 };

inline constexpr int kActionCount = 3;

std::string to_string(ManeuverState s);
ManeuverState maneuver_from_string(const std::string& s);
ManeuverState maneuver_from_index(int index);
inline int index_of(ManeuverState s) { return static_cast<int>(s); }
std::array<double, kActionCount> one_hot(ManeuverState s);

struct ComfortParams {
  double a_max = 1.5;  // m/s^2
  double d_max = 3.0;  // m/s^2, magnitude
  double h = 0.5;      // m/s, hysteresis band above half the target speed

  /// Throws ConfigError unless a_max, d_max > 0 and h >= 0.
  void validate() const;
};

/// Constant deceleration magnitude that stops a vehicle moving at `speed`
/// after `dist` meters. Requires dist > 0.
double stopline_decel(double speed, double dist);

/// Acceleration for a maneuver state. `dist_to_stop` <= 0 means the vehicle
/// is already past its stop line.
double acceleration_command(ManeuverState state, double agent_speed, double target_speed,
                            double dist_to_stop, const ComfortParams& comfort);

struct RewardWeights {
  double w_ds = 0.002;
  double w_cf = 0.005;
  double beta = 0.2;
  double gamma_crash = 1.8;
  double psi = 0.0045;
  double pen_caution = 0.05;
  double pen_notpermitted = 0.15;

  void validate() const;
};

struct RewardBreakdown {
  double r_danger = 0.0;
  double r_terminal = 0.0;
  double r_indecision = 0.0;
  double r_speed = 0.0;
  double total = 0.0;
};

double danger_reward(const SafetyEvents& events, double aggressiveness, const RewardWeights& w);
double terminal_reward(const EpisodeOutcome& outcome, double aggressiveness, const RewardWeights& w);
/// Penalty for abandoning Permitted: toward Caution or toward NotPermitted.
double indecision_reward(ManeuverState prev, ManeuverState cur, const RewardWeights& w);
double speed_reward(double current_speed, double target_speed, const RewardWeights& w);

RewardBreakdown step_reward(const SafetyEvents& events, const std::optional<EpisodeOutcome>& outcome,
                            ManeuverState prev, ManeuverState cur, double current_speed,
                            double target_speed, double aggressiveness, const RewardWeights& w);

}  // namespace rrl
