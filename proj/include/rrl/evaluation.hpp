#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "rrl/env.hpp"
#include "rrl/policy_net.hpp"
#include "rrl/replay.hpp"

namespace rrl {

/// Outcome ratios over a batch of episodes. avg_speed is the mean of the
/// per-episode mean speeds.
struct Metrics {
  double reaches = 0.0;
  double crashes = 0.0;
  double timeovers = 0.0;
  double avg_speed = 0.0;
  long episodes = 0;
};

Metrics metrics_from_outcomes(const std::vector<EpisodeOutcome>& outcomes);
/// Unweighted mean of the ratios and speeds; episodes are summed.
Metrics average_metrics(const std::vector<Metrics>& per_level);

struct BaselineKind {
  enum class Kind { RuleBased, AlwaysPermitted, Random };
  Kind kind = Kind::AlwaysPermitted;
  double threshold = 0.0;  // meters, RuleBased only

  /// Accepts "rule:<meters>", "permitted", "random". Throws ConfigError otherwise.
  static BaselineKind parse(const std::string& text);
  [[nodiscard]] std::string name() const;
};

/// Distance below which the rule-based baseline counts a passive as near a
/// merge point even though it is not yet circulating.
inline constexpr double kRuleMergeRadius = 10.0;

/// Permitted iff every passive that circulates or is within 10 m of a merge
/// point lies at Euclidean center distance >= threshold from the ego;
/// otherwise NotPermitted. Requires the ego at or before its stop line.
ManeuverState rule_based_decision(const World& world, const VehicleState& ego, double threshold);

/// A decision maker driven step by step through an environment.
class Controller {
 public:
  virtual ~Controller() = default;
  /// Called after each env reset with the episode seed.
  virtual void begin_episode(std::uint64_t seed) { (void)seed; }
  virtual ManeuverState decide(const InsertionEnv& env) = 0;
  /// Whether the environment has to build observations for this controller.
  [[nodiscard]] virtual bool needs_observation() const { return false; }
  [[nodiscard]] virtual std::string name() const = 0;
};

/// Greedy (argmax) network policy.
class NetController : public Controller {
 public:
  NetController(PolicyNetwork net, std::vector<double> params);
  ManeuverState decide(const InsertionEnv& env) override;
  [[nodiscard]] bool needs_observation() const override { return true; }
  [[nodiscard]] std::string name() const override { return "net"; }

 private:
  PolicyNetwork net_;
  std::vector<double> params_;
};

/// Rule-based before the stop line; Permitted once past it.
class RuleController : public Controller {
 public:
  explicit RuleController(double threshold);
  ManeuverState decide(const InsertionEnv& env) override;
  [[nodiscard]] std::string name() const override;

 private:
  double threshold_;
};

class PermittedController : public Controller {
 public:
  ManeuverState decide(const InsertionEnv&) override { return ManeuverState::Permitted; }
  [[nodiscard]] std::string name() const override { return "permitted"; }
};

/// Uniform random maneuver state, seeded per episode.
class RandomController : public Controller {
 public:
  void begin_episode(std::uint64_t seed) override { rng_.seed(derive_seed(seed, 3)); }
  ManeuverState decide(const InsertionEnv&) override;
  [[nodiscard]] std::string name() const override { return "random"; }

 private:
  Rng rng_{0};
};

std::unique_ptr<Controller> make_baseline(const BaselineKind& kind);
std::unique_ptr<Controller> make_net_controller(const Checkpoint& ckpt);

/// Traffic caps used for a layout: {4, 6, 8} for "training", {10, 15, 20} otherwise.
std::vector<int> default_traffic_levels(const std::string& layout);
/// "low", "medium", "high" for three levels, otherwise "cap<N>".
std::string traffic_level_name(const std::vector<int>& levels, std::size_t index);

struct EvalConfig {
  EnvConfig env;
  std::string layout = "training";
  std::vector<std::size_t> entries;  // empty: every entry
  std::vector<int> traffic_levels;   // empty: default_traffic_levels(layout)
  long episodes_per_level = 3000;
  double aggressiveness = 0.5;
  std::uint64_t seed = 1;

  void validate() const;
};

struct LevelMetrics {
  std::string level;
  int max_passives = 0;
  Metrics metrics;
};

struct EvalReport {
  std::vector<LevelMetrics> levels;
  Metrics average;
};

/// Runs one episode and returns its outcome. The env must be reset already.
EpisodeOutcome run_controller_episode(InsertionEnv& env, Controller& controller);

/// Episode `i` of a level uses seed derive_seed(derive_seed(seed, cap), i) and
/// entry entries[i % entries.size()], so equal configs see identical traffic
/// whatever the controller.
EvalReport evaluate(Controller& controller, const EvalConfig& cfg);

struct SweepRecord {
  double aggressiveness = 0.0;
  double positive_ratio = 0.0;
  double avg_speed = 0.0;
};

/// Evaluates at each aggressiveness level (values outside [0, 1] allowed),
/// pooling the configured traffic levels.
std::vector<SweepRecord> aggressiveness_sweep(Controller& controller, const EvalConfig& cfg,
                                              const std::vector<double>& levels);

/// CSV with columns `level,max_passives,reaches,crashes,timeovers,avg_speed,episodes`
/// and a final `average` row (max_passives 0).
void write_eval_csv(std::ostream& out, const EvalReport& report);
EvalReport read_eval_csv(std::istream& in);
/// CSV with columns `aggressiveness,positive_ratio,avg_speed`.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRecord>& records);
std::vector<SweepRecord> read_sweep_csv(std::istream& in);

// ---------------------------------------------------------------------------
// Human decision comparison

/// Per-frame enter (true) / wait (false) decisions.
struct DecisionTimeline {
  std::vector<bool> enter;
  std::string source;

  [[nodiscard]] std::size_t frame_count() const { return enter.size(); }
};

/// Permitted becomes enter; NotPermitted and Caution become wait.
DecisionTimeline collapse_states(const std::vector<ManeuverState>& states, std::string source);

struct HumanProfile {
  enum class Threshold { P75, P50, AnyUser };
  Threshold threshold = Threshold::P75;
  int user_count = 1;

  [[nodiscard]] std::string name() const;
  /// Minimum counter value that yields enter.
  [[nodiscard]] int required_count() const;
};

/// The three profiles in pairing order: 75%, 50%, any user.
std::vector<HumanProfile> standard_profiles(int user_count);

/// Number of users choosing enter at each frame. Requires equal lengths.
std::vector<int> decision_counters(const std::vector<DecisionTimeline>& users);
/// Enter iff counter >= profile.required_count(). Throws ContractViolation for
/// a counter outside [0, user_count].
DecisionTimeline profile_from_counters(const std::vector<int>& counters, const HumanProfile& profile);
/// 100 * matching frames / frames. Throws ContractViolation on length mismatch
/// or empty timelines.
double match_percentage(const DecisionTimeline& a, const DecisionTimeline& b);

enum class Overlap { BothEnter, BothWait, NetOnly, UserOnly };
std::string to_string(Overlap o);
std::vector<Overlap> overlap_bands(const DecisionTimeline& net, const DecisionTimeline& user);

/// Greedy net decisions on recorded frames with the ego stationary at the
/// stop line; the last-action feature follows the net's own decisions.
std::vector<ManeuverState> replay_states(const PolicyNetwork& net, std::span<const double> params,
                                         const ScenarioLog& log, double aggressiveness, double window = 50.0);
DecisionTimeline replay_decisions(const PolicyNetwork& net, std::span<const double> params,
                                  const ScenarioLog& log, double aggressiveness, double window = 50.0);

struct ComparisonTable {
  std::vector<std::string> profile_names;  // rows
  std::vector<double> aggressiveness;      // columns
  std::vector<std::vector<double>> match;  // [profile][aggr]
  /// Row i pairs profile i with aggressiveness level i (when both exist).
  [[nodiscard]] std::vector<double> diagonal() const;
};

/// Fixed aggressiveness pairing for the three profiles.
inline const std::vector<double> kComparisonAggressiveness{-1.0, 0.5, 1.0};

ComparisonTable compare_human(const PolicyNetwork& net, std::span<const double> params, const ScenarioLog& log,
                              const std::vector<DecisionTimeline>& users, const std::vector<double>& aggr_levels);
void print_comparison(std::ostream& out, const ComparisonTable& table);

}  // namespace rrl
