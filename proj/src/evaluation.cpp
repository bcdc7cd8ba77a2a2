#include "rrl/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "rrl/error.hpp"

namespace rrl {

// ---------------------------------------------------------------------------
// Metrics

Metrics metrics_from_outcomes(const std::vector<EpisodeOutcome>& outcomes) {
  Metrics m;
  m.episodes = static_cast<long>(outcomes.size());
  if (outcomes.empty()) return m;
  long reached = 0, crashed = 0, timeover = 0;
  double speed = 0.0;
  for (const auto& o : outcomes) {
    switch (o.kind) {
      case OutcomeKind::Reached: ++reached; break;
      case OutcomeKind::Crashed: ++crashed; break;
      case OutcomeKind::TimeOver: ++timeover; break;
    }
    speed += o.mean_speed;
  }
  const auto n = static_cast<double>(outcomes.size());
  m.reaches = static_cast<double>(reached) / n;
  m.crashes = static_cast<double>(crashed) / n;
  m.timeovers = static_cast<double>(timeover) / n;
  m.avg_speed = speed / n;
  return m;
}

Metrics average_metrics(const std::vector<Metrics>& per_level) {
  Metrics m;
  if (per_level.empty()) return m;
  for (const auto& l : per_level) {
    m.reaches += l.reaches;
    m.crashes += l.crashes;
    m.timeovers += l.timeovers;
    m.avg_speed += l.avg_speed;
    m.episodes += l.episodes;
  }
  const auto n = static_cast<double>(per_level.size());
  m.reaches /= n;
  m.crashes /= n;
  m.timeovers /= n;
  m.avg_speed /= n;
  return m;
}

// ---------------------------------------------------------------------------
// Baselines

BaselineKind BaselineKind::parse(const std::string& text) {
  BaselineKind k;
  if (text == "permitted") {
    k.kind = Kind::AlwaysPermitted;
  } else if (text == "random") {
    k.kind = Kind::Random;
  } else if (text.rfind("rule:", 0) == 0) {
    k.kind = Kind::RuleBased;
    std::size_t used = 0;
    try {
      k.threshold = std::stod(text.substr(5), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size() - 5 || !(k.threshold > 0.0) || !std::isfinite(k.threshold))
      throw ConfigError("baseline: rule threshold must be a positive number in '" + text + "'");
  } else {
    throw ConfigError("baseline: unknown kind '" + text + "' (expected rule:<meters>, permitted or random)");
  }
  return k;
}

std::string BaselineKind::name() const {
  switch (kind) {
    case Kind::RuleBased: {
      std::ostringstream ss;
      ss << "rule:" << threshold;
      return ss.str();
    }
    case Kind::AlwaysPermitted: return "permitted";
    case Kind::Random: return "random";
  }
  return "unknown";
}

ManeuverState rule_based_decision(const World& world, const VehicleState& ego, double threshold) {
  require(ego.station <= ego.route->stop_station, "rule_based_decision: ego is past its stop line");
  const Vec2 me = ego.pose().position;
  for (const auto& o : world.vehicles()) {
    if (o.role != Role::Passive || o.id == ego.id) continue;
    const Vec2 p = o.pose().position;
    bool relevant = o.circulating();
    if (!relevant && o.station < o.route->ring_begin)
      relevant = distance(p, o.path().point_at(o.route->ring_begin)) < kRuleMergeRadius;
    if (relevant && distance(p, me) < threshold) return ManeuverState::NotPermitted;
  }
  return ManeuverState::Permitted;
}

NetController::NetController(PolicyNetwork net, std::vector<double> params)
    : net_(std::move(net)), params_(std::move(params)) {
  require(params_.size() == net_.param_count(), "NetController: parameter count mismatch");
}

ManeuverState NetController::decide(const InsertionEnv& env) {
  return argmax_action(net_.forward(params_, to_input(env.observation())).probs);
}

RuleController::RuleController(double threshold) : threshold_(threshold) {
  require(threshold > 0.0, "RuleController: threshold must be positive");
}

ManeuverState RuleController::decide(const InsertionEnv& env) {
  if (env.dist_to_stop() < 0.0) return ManeuverState::Permitted;
  return rule_based_decision(env.world(), env.active(), threshold_);
}

std::string RuleController::name() const { return BaselineKind{BaselineKind::Kind::RuleBased, threshold_}.name(); }

ManeuverState RandomController::decide(const InsertionEnv&) {
  return maneuver_from_index(std::uniform_int_distribution<int>(0, kActionCount - 1)(rng_));
}

std::unique_ptr<Controller> make_baseline(const BaselineKind& kind) {
  switch (kind.kind) {
    case BaselineKind::Kind::RuleBased: return std::make_unique<RuleController>(kind.threshold);
    case BaselineKind::Kind::AlwaysPermitted: return std::make_unique<PermittedController>();
    case BaselineKind::Kind::Random: return std::make_unique<RandomController>();
  }
  throw ContractViolation("make_baseline: unknown kind");
}

std::unique_ptr<Controller> make_net_controller(const Checkpoint& ckpt) {
  PolicyNetwork net(ckpt.config);
  return std::make_unique<NetController>(std::move(net), to_double(ckpt.params));
}

// ---------------------------------------------------------------------------
// Evaluation protocol

std::vector<int> default_traffic_levels(const std::string& layout) {
  if (layout == "training") return {4, 6, 8};
  return {10, 15, 20};
}

std::string traffic_level_name(const std::vector<int>& levels, std::size_t index) {
  static const char* kNames[] = {"low", "medium", "high"};
  if (levels.size() == 3) return kNames[index];
  return "cap" + std::to_string(levels.at(index));
}

void EvalConfig::validate() const {
  if (episodes_per_level < 1) throw ConfigError("episodes_per_level must be >= 1");
  for (int l : traffic_levels)
    if (l < 0) throw ConfigError("traffic levels must be >= 0");
  if (!std::isfinite(aggressiveness)) throw ConfigError("aggressiveness must be finite");
  env.validate();
}

EpisodeOutcome run_controller_episode(InsertionEnv& env, Controller& controller) {
  while (true) {
    const StepResult r = env.step(controller.decide(env));
    if (r.done()) return *r.outcome;
  }
}

namespace {

struct LevelRun {
  std::shared_ptr<const RouteTable> routes;
  std::vector<std::size_t> entries;
};

LevelRun prepare(const EvalConfig& cfg) {
  cfg.validate();
  auto layout = std::make_shared<const RoundaboutLayout>(load_layout_file(resolve_layout_path(cfg.layout)));
  LevelRun run{std::make_shared<const RouteTable>(layout), cfg.entries};
  if (run.entries.empty())
    for (std::size_t e = 0; e < run.routes->entry_count(); ++e) run.entries.push_back(e);
  for (auto e : run.entries)
    if (e >= run.routes->entry_count()) throw ConfigError("entries: index " + std::to_string(e) + " out of range");
  return run;
}

std::vector<EpisodeOutcome> run_level(Controller& controller, const EvalConfig& cfg, const LevelRun& run, int cap,
                                      double aggressiveness) {
  EnvConfig env_cfg = cfg.env;
  env_cfg.traffic.max_passives = cap;
  env_cfg.observe = controller.needs_observation();
  InsertionEnv env(run.routes, env_cfg);
  const std::uint64_t level_seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(cap));
  std::vector<EpisodeOutcome> outcomes;
  outcomes.reserve(static_cast<std::size_t>(cfg.episodes_per_level));
  for (long i = 0; i < cfg.episodes_per_level; ++i) {
    const std::uint64_t seed = derive_seed(level_seed, static_cast<std::uint64_t>(i));
    env.reset(seed, run.entries[static_cast<std::size_t>(i) % run.entries.size()], aggressiveness);
    controller.begin_episode(seed);
    outcomes.push_back(run_controller_episode(env, controller));
  }
  return outcomes;
}

std::vector<int> levels_of(const EvalConfig& cfg) {
  return cfg.traffic_levels.empty() ? default_traffic_levels(cfg.layout) : cfg.traffic_levels;
}

}  // namespace

EvalReport evaluate(Controller& controller, const EvalConfig& cfg) {
  const LevelRun run = prepare(cfg);
  const std::vector<int> levels = levels_of(cfg);
  EvalReport report;
  std::vector<Metrics> per_level;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const Metrics m = metrics_from_outcomes(run_level(controller, cfg, run, levels[i], cfg.aggressiveness));
    report.levels.push_back({traffic_level_name(levels, i), levels[i], m});
    per_level.push_back(m);
  }
  report.average = average_metrics(per_level);
  return report;
}

std::vector<SweepRecord> aggressiveness_sweep(Controller& controller, const EvalConfig& cfg,
                                              const std::vector<double>& levels) {
  const LevelRun run = prepare(cfg);
  std::vector<SweepRecord> out;
  for (double aggr : levels) {
    require(std::isfinite(aggr), "aggressiveness_sweep: aggressiveness must be finite");
    std::vector<EpisodeOutcome> pooled;
    for (int cap : levels_of(cfg)) {
      auto o = run_level(controller, cfg, run, cap, aggr);
      pooled.insert(pooled.end(), o.begin(), o.end());
    }
    const Metrics m = metrics_from_outcomes(pooled);
    out.push_back({aggr, m.reaches, m.avg_speed});
  }
  return out;
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

double parse_double(const std::string& s, const std::string& field) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != s.size()) throw ParseError("csv: bad number '" + s + "' in field " + field);
  return v;
}

}  // namespace

void write_eval_csv(std::ostream& out, const EvalReport& report) {
  out << "level,max_passives,reaches,crashes,timeovers,avg_speed,episodes\n";
  auto row = [&](const std::string& name, int cap, const Metrics& m) {
    out << name << ',' << cap << ',' << num(m.reaches) << ',' << num(m.crashes) << ',' << num(m.timeovers) << ','
        << num(m.avg_speed) << ',' << m.episodes << '\n';
  };
  for (const auto& l : report.levels) row(l.level, l.max_passives, l.metrics);
  row("average", 0, report.average);
}

EvalReport read_eval_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "level,max_passives,reaches,crashes,timeovers,avg_speed,episodes")
    throw ParseError("eval csv: unexpected header");
  EvalReport report;
  bool saw_average = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 7) throw ParseError("eval csv: expected 7 fields in '" + line + "'");
    Metrics m{parse_double(c[2], "reaches"), parse_double(c[3], "crashes"), parse_double(c[4], "timeovers"),
              parse_double(c[5], "avg_speed"), static_cast<long>(parse_double(c[6], "episodes"))};
    if (c[0] == "average") {
      report.average = m;
      saw_average = true;
    } else {
      report.levels.push_back({c[0], static_cast<int>(parse_double(c[1], "max_passives")), m});
    }
  }
  if (!saw_average) throw ParseError("eval csv: missing average row");
  return report;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRecord>& records) {
  out << "aggressiveness,positive_ratio,avg_speed\n";
  for (const auto& r : records) out << num(r.aggressiveness) << ',' << num(r.positive_ratio) << ',' << num(r.avg_speed) << '\n';
}

std::vector<SweepRecord> read_sweep_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "aggressiveness,positive_ratio,avg_speed")
    throw ParseError("sweep csv: unexpected header");
  std::vector<SweepRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto c = split_csv(line);
    if (c.size() != 3) throw ParseError("sweep csv: expected 3 fields in '" + line + "'");
    out.push_back({parse_double(c[0], "aggressiveness"), parse_double(c[1], "positive_ratio"),
                   parse_double(c[2], "avg_speed")});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Human decision comparison

DecisionTimeline collapse_states(const std::vector<ManeuverState>& states, std::string source) {
  DecisionTimeline t;
  t.source = std::move(source);
  t.enter.reserve(states.size());
  for (auto s : states) t.enter.push_back(s == ManeuverState::Permitted);
  return t;
}

std::string HumanProfile::name() const {
  switch (threshold) {
    case Threshold::P75: return "75%";
    case Threshold::P50: return "50%";
    case Threshold::AnyUser: return ">0";
  }
  return "unknown";
}

int HumanProfile::required_count() const {
  require(user_count >= 1, "HumanProfile: user_count must be >= 1");
  // Integer ceilings: ceil(3U/4) and ceil(U/2).
  switch (threshold) {
    case Threshold::P75: return (3 * user_count + 3) / 4;
    case Threshold::P50: return (user_count + 1) / 2;
    case Threshold::AnyUser: return 1;
  }
  return 1;
}

std::vector<HumanProfile> standard_profiles(int user_count) {
  return {{HumanProfile::Threshold::P75, user_count},
          {HumanProfile::Threshold::P50, user_count},
          {HumanProfile::Threshold::AnyUser, user_count}};
}

std::vector<int> decision_counters(const std::vector<DecisionTimeline>& users) {
  require(!users.empty(), "decision_counters: no user timelines");
  const std::size_t n = users.front().frame_count();
  std::vector<int> counters(n, 0);
  for (const auto& u : users) {
    require(u.frame_count() == n, "decision_counters: timelines differ in length");
    for (std::size_t i = 0; i < n; ++i) counters[i] += u.enter[i] ? 1 : 0;
  }
  return counters;
}

DecisionTimeline profile_from_counters(const std::vector<int>& counters, const HumanProfile& profile) {
  const int need = profile.required_count();
  DecisionTimeline t;
  t.source = "profile " + profile.name();
  t.enter.reserve(counters.size());
  for (int c : counters) {
    require(c >= 0 && c <= profile.user_count, "profile_from_counters: counter outside [0, user_count]");
    t.enter.push_back(c >= need);
  }
  return t;
}

double match_percentage(const DecisionTimeline& a, const DecisionTimeline& b) {
  require(a.frame_count() == b.frame_count(), "match_percentage: timelines differ in length");
  require(a.frame_count() > 0, "match_percentage: empty timelines");
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.frame_count(); ++i) same += a.enter[i] == b.enter[i] ? 1 : 0;
  return 100.0 * static_cast<double>(same) / static_cast<double>(a.frame_count());
}

std::string to_string(Overlap o) {
  switch (o) {
    case Overlap::BothEnter: return "both_enter";
    case Overlap::BothWait: return "both_wait";
    case Overlap::NetOnly: return "net_only";
    case Overlap::UserOnly: return "user_only";
  }
  return "unknown";
}

std::vector<Overlap> overlap_bands(const DecisionTimeline& net, const DecisionTimeline& user) {
  require(net.frame_count() == user.frame_count(), "overlap_bands: timelines differ in length");
  std::vector<Overlap> out;
  out.reserve(net.frame_count());
  for (std::size_t i = 0; i < net.frame_count(); ++i) {
    const bool a = net.enter[i], b = user.enter[i];
    out.push_back(a && b ? Overlap::BothEnter : (!a && !b ? Overlap::BothWait : (a ? Overlap::NetOnly : Overlap::UserOnly)));
  }
  return out;
}

std::vector<ManeuverState> replay_states(const PolicyNetwork& net, std::span<const double> params,
                                         const ScenarioLog& log, double aggressiveness, double window) {
  require(log.layout != nullptr, "replay_states: scenario has no layout");
  const NetworkConfig& nc = net.config();
  require(nc.input_planes % kChannelCount == 0, "replay_states: input planes must be a multiple of 4");
  const FrameSpec spec{nc.grid_size, window};
  spec.validate();
  const RouteTable routes(log.layout);
  if (log.entry >= routes.entry_count()) throw ParseError("scenario: entry out of range");
  const auto route = routes.active_route(log.entry);

  VehicleState ego;
  ego.id = -1;
  ego.role = Role::Active;
  ego.route = route;
  ego.station = route->stop_station;
  ego.speed = 0.0;
  ego.aggressiveness = aggressiveness;

  FrameHistory history(nc.input_planes / kChannelCount, spec);
  ManeuverState last = ManeuverState::NotPermitted;
  std::vector<ManeuverState> out;
  out.reserve(log.frame_count());
  for (const auto& rec : log.records) {
    std::vector<VehicleBox> boxes;
    Pose ego_pose = ego.pose();
    for (const auto& v : rec.vehicles) {
      const OrientedBox box{{v.x, v.y}, v.heading, v.length, v.width};
      if (v.role == Role::Active) {
        ego_pose = {{v.x, v.y}, v.heading};
        ego.length = v.length;
        ego.width = v.width;
        boxes.push_back({v.id, true, box, 0.0});
      } else {
        boxes.push_back({v.id, false, box, v.speed});
      }
    }
    RasterScene scene;
    scene.layout = log.layout.get();
    scene.ego = ego_pose;
    scene.path = &route->path;
    scene.path_from = ego.station;
    scene.path_half_width = ego.width / 2;
    scene.stop_line = log.layout->stop_line(log.entry);
    scene.boxes = boxes;
    history.push(rasterize(scene, spec));
    const ObservationBundle obs = build_observation(history, ego, aggressiveness, last);
    last = argmax_action(net.forward(params, to_input(obs)).probs);
    out.push_back(last);
  }
  return out;
}

DecisionTimeline replay_decisions(const PolicyNetwork& net, std::span<const double> params,
                                  const ScenarioLog& log, double aggressiveness, double window) {
  std::ostringstream src;
  src << "net(" << aggressiveness << ")";
  return collapse_states(replay_states(net, params, log, aggressiveness, window), src.str());
}

std::vector<double> ComparisonTable::diagonal() const {
  std::vector<double> d;
  for (std::size_t i = 0; i < match.size() && i < aggressiveness.size(); ++i) d.push_back(match[i][i]);
  return d;
}

ComparisonTable compare_human(const PolicyNetwork& net, std::span<const double> params, const ScenarioLog& log,
                              const std::vector<DecisionTimeline>& users, const std::vector<double>& aggr_levels) {
  require(!users.empty(), "compare_human: no decision logs");
  for (const auto& u : users)
    require(u.frame_count() == log.frame_count(), "compare_human: decision log length differs from frame count");
  const auto counters = decision_counters(users);
  ComparisonTable table;
  table.aggressiveness = aggr_levels;
  std::vector<DecisionTimeline> nets;
  for (double a : aggr_levels) nets.push_back(replay_decisions(net, params, log, a));
  for (const auto& p : standard_profiles(static_cast<int>(users.size()))) {
    const DecisionTimeline prof = profile_from_counters(counters, p);
    table.profile_names.push_back(p.name());
    std::vector<double> row;
    for (const auto& n : nets) row.push_back(match_percentage(prof, n));
    table.match.push_back(std::move(row));
  }
  return table;
}

void print_comparison(std::ostream& out, const ComparisonTable& table) {
  const auto flags = out.flags();
  out << std::fixed << std::setprecision(3);
  out << "profile";
  for (double a : table.aggressiveness) out << "\taggr " << a;
  out << '\n';
  for (std::size_t i = 0; i < table.match.size(); ++i) {
    out << table.profile_names[i];
    for (double m : table.match[i]) out << '\t' << m;
    out << '\n';
  }
  const auto diag = table.diagonal();
  for (std::size_t i = 0; i < diag.size(); ++i)
    out << "Comparison #" << i + 1 << ": profile " << table.profile_names[i] << " vs aggr "
        << table.aggressiveness[i] << " -> " << diag[i] << '\n';
  out.flags(flags);
}

}  // namespace rrl
