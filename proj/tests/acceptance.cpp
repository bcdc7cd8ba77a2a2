// Acceptance runner: executes the ten acceptance criteria and prints one
// PASS/FAIL line for each. Usage: acceptance [--only 1,2,...] [--skip 7,...]

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "rrl/evaluation.hpp"
#include "rrl/trainer.hpp"
#include "scene_util.hpp"

namespace {

using namespace rrl;

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double time_limit;  // seconds
  std::function<Verdict()> run;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

// ---------------------------------------------------------------------------
// 1. Reward oracle

// Independent single-expression reward with the published constants.
double reward_oracle(int d_s, int c_f, int outcome /*-1 none, 0 reached, 1 crashed, 2 time-over*/, int prev,
                     int cur, double v, double target, double aggr) {
  const double alpha = 1.0 - aggr;
  return -0.002 * alpha * d_s - 0.005 * alpha * c_f +
         (outcome == 0 ? 1.0 : outcome == 1 ? -0.2 - 1.8 * alpha : outcome == 2 ? -1.0 : 0.0) +
         (prev == 0 && cur == 2 ? -0.05 : prev == 0 && cur == 1 ? -0.15 : 0.0) + 0.0045 * v / target;
}

Verdict reward_oracle_check() {
  Rng rng(2024);
  const RewardWeights w;
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const int d_s = bernoulli(rng, 0.5) ? 1 : 0, c_f = bernoulli(rng, 0.5) ? 1 : 0;
    const int outcome = std::uniform_int_distribution<int>(-1, 2)(rng);
    const int prev = std::uniform_int_distribution<int>(0, 2)(rng), cur = std::uniform_int_distribution<int>(0, 2)(rng);
    const double target = uniform(rng, 1.0, 15.0), v = uniform(rng, 0.0, 2.0 * target), aggr = uniform(rng, -1.0, 1.5);
    SafetyEvents ev;
    ev.d_s = d_s;
    ev.c_f = c_f;
    std::optional<EpisodeOutcome> out;
    if (outcome >= 0) out = EpisodeOutcome{static_cast<OutcomeKind>(outcome), 1.0, v};
    const RewardBreakdown r = step_reward(ev, out, maneuver_from_index(prev), maneuver_from_index(cur), v, target, aggr, w);
    worst = std::max(worst, std::abs(r.total - reward_oracle(d_s, c_f, outcome, prev, cur, v, target, aggr)));
    worst = std::max(worst, std::abs(r.total - (r.r_danger + r.r_terminal + r.r_indecision + r.r_speed)));
  }
  const SafetyEvents none;
  const auto total = [&](std::optional<EpisodeOutcome> o, ManeuverState p, ManeuverState c, double v, double aggr) {
    return step_reward(none, o, p, c, v, 10.0, aggr, w).total;
  };
  const EpisodeOutcome crash{OutcomeKind::Crashed, 1.0, 0.0};
  const bool pinned = std::abs(total(crash, ManeuverState::NotPermitted, ManeuverState::NotPermitted, 0, 0) - -2.0) < 1e-12 &&
                      std::abs(total(crash, ManeuverState::NotPermitted, ManeuverState::NotPermitted, 0, 1) - -0.2) < 1e-12 &&
                      std::abs(total(std::nullopt, ManeuverState::Permitted, ManeuverState::NotPermitted, 0, 0.5) - -0.15) < 1e-12 &&
                      std::abs(total(std::nullopt, ManeuverState::Permitted, ManeuverState::Permitted, 10.0, 0.5) - 0.0045) < 1e-12;
  return {worst <= 1e-12 && pinned, fmt("max |reward - oracle| %.2e over 10000 tuples (tol 1e-12); pinned values %s", worst,
                                        pinned ? "match" : "MISMATCH")};
}

// ---------------------------------------------------------------------------
// 2. Control law

double control_oracle(int state, double v, double target, double dist, const ComfortParams& c) {
  if (state == 0) return v < target ? c.a_max : 0.0;
  if (state == 1) return dist <= 0.0 ? -c.d_max : -std::min(c.d_max, v * v / (2.0 * dist));
  const double half = target / 2.0;
  return v < half ? c.a_max / 2.0 : v > half + c.h ? -c.d_max / 2.0 : 0.0;
}

Verdict control_law_check() {
  const ComfortParams c;
  long mismatches = 0, checked = 0, out_of_range = 0;
  for (double target : {10.0, 8.33, 13.0}) {
    for (double dist : {-1.0, 0.0, 0.5, 5.0, 25.0, 200.0}) {
      for (int i = 0; i <= static_cast<int>(std::round(2.0 * target / 0.01)); ++i) {
        const double v = i * 0.01;
        for (int s = 0; s < 3; ++s) {
          const double got = acceleration_command(maneuver_from_index(s), v, target, dist, c);
          ++checked;
          if (got != control_oracle(s, v, target, dist, c)) ++mismatches;
          if (got < -c.d_max || got > c.a_max) ++out_of_range;
        }
      }
    }
  }
  // Boundaries of the Caution band at target 10: [5.0, 5.5] commands zero.
  const auto caution = [&](double v) { return acceleration_command(ManeuverState::Caution, v, 10.0, 30.0, c); };
  const bool bounds = caution(4.99) == c.a_max / 2 && caution(5.0) == 0.0 && caution(5.5) == 0.0 &&
                      caution(5.51) == -c.d_max / 2 &&
                      acceleration_command(ManeuverState::Permitted, 10.0, 10.0, 30.0, c) == 0.0;
  Rng rng(7);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double v = uniform(rng, 0.0, 15.0), dist = uniform(rng, 0.01, 60.0);
    const double got = acceleration_command(ManeuverState::NotPermitted, v, 8.33, dist, c);
    worst = std::max(worst, std::abs(got - -std::min(c.d_max, v * v / (2 * dist))));
    worst = std::max(worst, std::abs(stopline_decel(v, dist) - v * v / (2 * dist)));
  }
  return {mismatches == 0 && out_of_range == 0 && bounds && worst <= 1e-12,
          fmt("%ld/%ld sweep mismatches, %ld out of [-d_max, a_max], band boundaries %s, stop-line max err %.1e",
              mismatches, checked, out_of_range, bounds ? "ok" : "WRONG", worst)};
}

// ---------------------------------------------------------------------------
// 3. Bezier

Vec2 bernstein(const CubicBezier& c, double t) {
  const double u = 1.0 - t;
  const double b0 = u * u * u, b1 = 3 * u * u * t, b2 = 3 * u * t * t, b3 = t * t * t;
  return {b0 * c.p0.x + b1 * c.p1.x + b2 * c.p2.x + b3 * c.p3.x, b0 * c.p0.y + b1 * c.p1.y + b2 * c.p2.y + b3 * c.p3.y};
}

Verdict bezier_check() {
  Rng rng(33);
  bool endpoints = true;
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    auto p = [&] { return Vec2{uniform(rng, -100, 100), uniform(rng, -100, 100)}; };
    const CubicBezier c{p(), p(), p(), p()};
    endpoints = endpoints && decasteljau_eval(c, 0.0) == c.p0 && decasteljau_eval(c, 1.0) == c.p3;
    for (int k = 0; k < 10; ++k) {
      const double t = uniform(rng, 0.0, 1.0);
      worst = std::max(worst, distance(decasteljau_eval(c, t), bernstein(c, t)));
    }
  }
  const auto layout = load_layout_file(resolve_layout_path("unseen"));
  const PathNoiseConfig cfg{1.0, true};
  long violations = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const auto& entry = layout.entries()[seed % layout.entries().size()];
    const Polyline& path = entry.approach;
    Rng r(seed);
    const PathPerturbation pp = perturb_path_detailed(path, entry.stop_station, cfg, r);
    bool ok = pp.start_station >= 0.0 && pp.start_station <= entry.stop_station &&
              pp.end_station >= entry.stop_station && pp.end_station <= path.length();
    ok = ok && distance(pp.curve.p0, path.point_at(pp.start_station)) <= 1e-9 &&
         distance(pp.curve.p3, path.point_at(pp.end_station)) <= 1e-9;
    ok = ok && pp.path.front() == path.front() && pp.path.back() == path.back();
    const auto& pts = pp.path.points();
    for (std::size_t k = 1; k < pts.size() && ok; ++k) ok = distance(pts[k - 1], pts[k]) <= 2 * kBezierArcStep + 1e-9;
    violations += ok ? 0 : 1;
  }
  return {endpoints && worst <= 1e-9 && violations == 0,
          fmt("endpoints %s; max |De Casteljau - Bernstein| %.2e (tol 1e-9); perturbation violations %ld/1000",
              endpoints ? "exact" : "INEXACT", worst, violations)};
}

// ---------------------------------------------------------------------------
// 4. Rasterizer

Verdict rasterizer_check() {
  const FrameSpec spec{84, 50.0};
  const std::array<std::shared_ptr<const RouteTable>, 2> routes{testing::bundled_routes("training"),
                                                                testing::bundled_routes("unseen")};
  Rng rng(404);
  long nonbinary = 0, missing_ego = 0, nav_mismatch = 0, translation_diff = 0;
  double worst_rotation = 0.0;
  for (std::uint64_t w = 0; w < 100; ++w) {
    const testing::OwnedScene s = testing::random_scene(routes[w % 2], 1000 + w);
    const SemanticFrame f = rasterize(s.view(), spec);
    for (auto c : f.cells) nonbinary += (c == 0 || c == 1) ? 0 : 1;
    const int mid = spec.grid_size / 2;
    missing_ego += f.at(kObstacles, mid, mid) == 1 ? 0 : 1;
    for (int i = 0; i < 1000; ++i) {
      const int r = std::uniform_int_distribution<int>(0, spec.grid_size - 1)(rng);
      const int c = std::uniform_int_distribution<int>(0, spec.grid_size - 1)(rng);
      const bool inside = point_in_polygons(s.layout->navigable_polygons(), cell_center(s.ego, spec, r, c));
      nav_mismatch += (f.at(kNavigable, r, c) == 1) == inside ? 0 : 1;
    }
    // Shifts by whole powers of two keep every coordinate exactly representable.
    const Vec2 shift{std::ldexp(1.0, 4 + static_cast<int>(w % 5)), -std::ldexp(1.0, 3 + static_cast<int>(w % 3))};
    const testing::OwnedScene moved = testing::move_scene(s, {0.0, shift});
    translation_diff += static_cast<long>(testing::differing_cells(f, rasterize(moved.view(), spec)));
    const double angle = uniform(rng, -std::numbers::pi, std::numbers::pi);
    const testing::OwnedScene turned = testing::move_scene(s, {angle, {0.0, 0.0}});
    worst_rotation = std::max(worst_rotation, static_cast<double>(testing::differing_cells(f, rasterize(turned.view(), spec))) /
                                                  static_cast<double>(f.cells.size()));
  }
  return {nonbinary == 0 && missing_ego == 0 && nav_mismatch == 0 && translation_diff == 0 && worst_rotation <= 0.02,
          fmt("non-binary %ld, frames without ego %ld, navigable mismatches %ld/100000, translated diffs %ld, "
              "worst rotated diff %.4f (tol 0.02)",
              nonbinary, missing_ego, nav_mismatch, translation_diff, worst_rotation)};
}

// ---------------------------------------------------------------------------
// 5. Sync semantics

TrainerConfig small_trainer(const std::string& sync, int learners, long episodes) {
  TrainerConfig c;
  c.sync = SyncPolicy::parse(sync);
  c.learners = learners;
  c.total_episodes = episodes;
  c.lr = 1e-3;
  c.env.traffic = traffic_level("low", 2);
  c.env.world.warmup = 5.0;
  c.env.frame = {9, 50.0};
  c.env.history = 1;
  c.net.grid_size = 9;
  c.net.input_planes = 4;
  c.net.conv = {{2, 3, 2}};
  c.net.trunk_width = 8;
  c.net.merge_width = 8;
  c.ma_window = 100;
  return c;
}

Verdict sync_check() {
  const TrainStats d = train(small_trainer("d-a3c", 8, 500));
  long bad_exchange = 0, moving_snapshot = 0, syncs_d = 0;
  for (const auto& r : d.records) {
    bad_exchange += r.sync_count == 1 ? 0 : 1;
    moving_snapshot += r.first_version == r.last_version ? 0 : 1;
    syncs_d += r.sync_count;
  }
  const TrainStats a = train(small_trainer("a3c:5", 8, 100));
  long bad_nstep = 0, syncs_a = 0;
  for (const auto& r : a.records) {
    bad_nstep += r.sync_count == (r.steps + 4) / 5 ? 0 : 1;
    syncs_a += r.sync_count;
  }
  const bool reconcile = d.records.size() == 500 && d.store_version == syncs_d && d.applied_updates == syncs_d &&
                         a.store_version == syncs_a && a.applied_updates == syncs_a;

  // Additivity: plain SGD with dyadic gradients is exact in any order.
  PolicyParams init;
  init.values.assign(256, 0.0f);
  std::vector<GradientBuffer> bufs;
  for (int k = 0; k < 400; ++k) {
    GradientBuffer g;
    for (int i = 0; i < 256; ++i) g.values.push_back(static_cast<double>((k * 31 + i * 7) % 17 - 8) / 32.0);
    bufs.push_back(std::move(g));
  }
  GlobalStore seq(init, Optimizer(OptimizerKind::Sgd, 1.0)), par(init, Optimizer(OptimizerKind::Sgd, 1.0));
  for (const auto& g : bufs) seq.apply(g);
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 8; ++t)
      threads.emplace_back([&, t] {
        for (std::size_t k = static_cast<std::size_t>(t); k < bufs.size(); k += 8) par.apply(bufs[k]);
      });
  }
  const bool additive = par.params().values == seq.params().values && par.version() == 400;
  return {bad_exchange == 0 && moving_snapshot == 0 && bad_nstep == 0 && reconcile && additive,
          fmt("D-A3C: %ld episodes with != 1 exchange, %ld with a moving snapshot (500 episodes, 8 learners); "
              "A3C(5): %ld episodes off ceil(T/5); versions reconcile %s; concurrent SGD additivity %s",
              bad_exchange, moving_snapshot, bad_nstep, reconcile ? "yes" : "NO", additive ? "exact" : "BROKEN")};
}

// ---------------------------------------------------------------------------
// 6. Gradient check

Verdict gradient_check() {
  Rng rng(606);
  double worst = 0.0;
  int configs = 0, checked = 0;
  std::size_t largest = 0;
  for (int trial = 0; trial < 6; ++trial) {
    NetworkConfig c;
    c.grid_size = std::uniform_int_distribution<int>(7, 15)(rng);
    c.input_planes = 4 * std::uniform_int_distribution<int>(1, 2)(rng);
    c.conv = {{std::uniform_int_distribution<int>(2, 4)(rng), 3, std::uniform_int_distribution<int>(1, 2)(rng)}};
    if (trial % 2 == 1) c.conv.push_back({std::uniform_int_distribution<int>(2, 3)(rng), 2, 1});
    c.trunk_width = std::uniform_int_distribution<int>(6, 16)(rng);
    c.merge_width = std::uniform_int_distribution<int>(4, 12)(rng);
    c.seed = 900 + static_cast<std::uint64_t>(trial);
    const PolicyNetwork net(c);
    if (net.param_count() > 50000) continue;
    largest = std::max(largest, net.param_count());
    const auto w = to_double(net.initial_params());
    std::vector<Transition> traj;
    for (int t = 0; t < 5; ++t) {
      Transition tr;
      tr.input.visual.resize(net.visual_size());
      for (auto& v : tr.input.visual) v = bernoulli(rng, 0.3) ? 1.0 : 0.0;
      tr.input.nonvisual = {uniform(rng, 0, 1.2), 1.0, uniform(rng, 0, 1), 0, 0, 0};
      tr.input.nonvisual[3 + std::uniform_int_distribution<int>(0, 2)(rng)] = 1.0;
      tr.action = maneuver_from_index(std::uniform_int_distribution<int>(0, 2)(rng));
      tr.reward = uniform(rng, -0.3, 0.1);
      tr.value = net.forward(w, tr.input).value;
      traj.push_back(std::move(tr));
    }
    const GradCheckResult r = finite_diff_check(net, w, traj, 0.95, 0.01, 300, 77 + static_cast<std::uint64_t>(trial));
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    ++configs;
  }
  return {configs >= 5 && worst < 1e-4,
          fmt("%d configs (largest %zu params), %d coordinates, max relative error %.2e (tol 1e-4)", configs, largest,
              checked, worst)};
}

// ---------------------------------------------------------------------------
// 7. Learning smoke test

TrainerConfig desk_learning_config() {
  TrainerConfig c;
  c.sync = SyncPolicy::parse("d-a3c");
  c.learners = 8;
  c.lr = 3e-4;
  c.optimizer = OptimizerKind::Adam;
  c.entropy_coef = 0.01;
  c.total_episodes = 6000;
  c.layout = "training";
  c.entries = {0};
  c.seed = 1;
  c.ma_window = 1000;
  c.env.traffic = traffic_level("low", 2);
  c.env.traffic.spawn_rate = 2.0;
  c.env.traffic.through_traffic = true;
  c.env.frame = {21, 50.0};
  c.env.history = 4;
  c.net = NetworkConfig::desk();
  return c;
}

// Reach ratio of a baseline replaying the given training episodes.
double baseline_reach(Controller& controller, const TrainerConfig& cfg, long first, long last) {
  const auto routes = std::make_shared<const RouteTable>(
      std::make_shared<const RoundaboutLayout>(load_layout_file(resolve_layout_path(cfg.layout))));
  EnvConfig env = cfg.env;
  env.observe = controller.needs_observation();
  InsertionEnv e(routes, env);
  long reached = 0;
  for (long ep = first; ep < last; ++ep) {
    const EpisodeSpec spec = training_episode_spec(cfg, ep);
    e.reset(spec.seed, cfg.entries.front(), spec.aggressiveness);
    controller.begin_episode(spec.seed);
    reached += run_controller_episode(e, controller).kind == OutcomeKind::Reached ? 1 : 0;
  }
  return static_cast<double>(reached) / static_cast<double>(last - first);
}

Verdict learning_check() {
  const TrainerConfig cfg = desk_learning_config();
  const TrainStats st = train(cfg);
  const std::size_t n = st.ratio_ma.size();
  const std::size_t tail = n / 10;
  double ma = 0.0;
  for (std::size_t i = n - tail; i < n; ++i) ma += st.ratio_ma[i];
  ma /= static_cast<double>(tail);
  const long first = cfg.total_episodes - static_cast<long>(tail);
  PermittedController permitted;
  RandomController random;
  const double p = baseline_reach(permitted, cfg, first, cfg.total_episodes);
  const double r = baseline_reach(random, cfg, first, cfg.total_episodes);
  return {ma - p >= 0.10 && ma - r >= 0.20,
          fmt("%ld episodes; final-10%% moving-average positive ratio %.3f; permitted %.3f (margin %.3f, need 0.10); "
              "random %.3f (margin %.3f, need 0.20)",
              cfg.total_episodes, ma, p, ma - p, r, ma - r)};
}

// ---------------------------------------------------------------------------
// 8. Baseline trend

Verdict baseline_trend_check() {
  EvalConfig cfg;
  cfg.env.observe = false;
  cfg.layout = "training";
  cfg.traffic_levels = {8};
  cfg.episodes_per_level = 3000;
  cfg.seed = 8;
  RuleController r10(10.0), r25(25.0);
  const Metrics a = evaluate(r10, cfg).levels.front().metrics;
  const Metrics b = evaluate(r25, cfg).levels.front().metrics;
  const double sum_err = std::max(std::abs(a.reaches + a.crashes + a.timeovers - 1.0),
                                  std::abs(b.reaches + b.crashes + b.timeovers - 1.0));
  return {a.crashes > b.crashes && b.timeovers > a.timeovers && sum_err <= 1e-9,
          fmt("rule:10 reaches %.3f crashes %.3f time-overs %.3f; rule:25 reaches %.3f crashes %.3f time-overs %.3f; "
              "ratio sum error %.1e",
              a.reaches, a.crashes, a.timeovers, b.reaches, b.crashes, b.timeovers, sum_err)};
}

// ---------------------------------------------------------------------------
// 9. Aggressiveness monotonicity

Verdict monotonicity_check() {
  Rng rng(909);
  const RewardWeights w;
  const std::vector<double> grid{0.0, 0.25, 0.5, 0.75, 0.99};
  long non_monotone = 0, speed_dependent = 0;
  for (int trace = 0; trace < 100; ++trace) {
    struct Step {
      SafetyEvents ev;
      ManeuverState prev, cur;
      double v;
    };
    std::vector<Step> steps(static_cast<std::size_t>(std::uniform_int_distribution<int>(20, 200)(rng)));
    bool penalized = false;
    for (auto& s : steps) {
      s.ev.d_s = bernoulli(rng, 0.1) ? 1 : 0;
      s.ev.c_f = bernoulli(rng, 0.05) ? 1 : 0;
      s.prev = maneuver_from_index(std::uniform_int_distribution<int>(0, 2)(rng));
      s.cur = maneuver_from_index(std::uniform_int_distribution<int>(0, 2)(rng));
      s.v = uniform(rng, 0.0, 10.0);
      penalized = penalized || s.ev.d_s || s.ev.c_f;
    }
    OutcomeKind end = static_cast<OutcomeKind>(std::uniform_int_distribution<int>(0, 2)(rng));
    if (!penalized && end != OutcomeKind::Crashed) steps[steps.size() / 2].ev.d_s = 1;
    double prev_penalty = std::numeric_limits<double>::infinity();
    double speed_ref = std::numeric_limits<double>::quiet_NaN();
    for (double aggr : grid) {
      double penalty = 0.0, speed = 0.0;
      for (std::size_t t = 0; t < steps.size(); ++t) {
        std::optional<EpisodeOutcome> out;
        if (t + 1 == steps.size()) out = EpisodeOutcome{end, 10.0, 5.0};
        const auto r = step_reward(steps[t].ev, out, steps[t].prev, steps[t].cur, steps[t].v, 8.33, aggr, w);
        penalty -= std::min(r.r_danger, 0.0) + std::min(r.r_terminal, 0.0) + std::min(r.r_indecision, 0.0);
        speed += r.r_speed;
      }
      non_monotone += penalty < prev_penalty ? 0 : 1;
      prev_penalty = penalty;
      if (std::isnan(speed_ref)) speed_ref = speed;
      speed_dependent += speed == speed_ref ? 0 : 1;
    }
  }
  return {non_monotone == 0 && speed_dependent == 0,
          fmt("%ld non-decreasing penalty steps over 100 traces x 5 levels; speed term aggressiveness-dependent %ld times",
              non_monotone, speed_dependent)};
}

// ---------------------------------------------------------------------------
// 10. Human comparison pipeline

Verdict human_pipeline_check() {
  constexpr int kUsers = 10, kFrames = 100;
  // User u waits until frame 10 * (u + 1) - 5, then holds enter.
  std::vector<DecisionTimeline> users;
  for (int u = 0; u < kUsers; ++u) {
    DecisionTimeline t;
    for (int f = 0; f < kFrames; ++f) t.enter.push_back(f >= 10 * (u + 1) - 5);
    users.push_back(t);
  }
  const auto counters = decision_counters(users);
  bool counters_ok = true;
  for (int f = 0; f < kFrames; ++f) {
    int expect = 0;
    for (int u = 0; u < kUsers; ++u) expect += f >= 10 * (u + 1) - 5 ? 1 : 0;
    counters_ok = counters_ok && counters[static_cast<std::size_t>(f)] == expect;
  }
  const auto profiles = standard_profiles(kUsers);
  const bool ceiling = profile_from_counters({8}, profiles[0]).enter[0] && !profile_from_counters({7}, profiles[0]).enter[0] &&
                       profile_from_counters({5}, profiles[1]).enter[0] && !profile_from_counters({4}, profiles[1]).enter[0] &&
                       profile_from_counters({1}, profiles[2]).enter[0] && !profile_from_counters({0}, profiles[2]).enter[0];

  // Scripted net: Permitted from frame 40, Caution on frames 30..39, otherwise NotPermitted.
  std::vector<ManeuverState> states;
  for (int f = 0; f < kFrames; ++f)
    states.push_back(f >= 40 ? ManeuverState::Permitted : f >= 30 ? ManeuverState::Caution : ManeuverState::NotPermitted);
  const DecisionTimeline net = collapse_states(states, "net");
  std::vector<ManeuverState> no_caution = states;
  std::replace(no_caution.begin(), no_caution.end(), ManeuverState::Caution, ManeuverState::NotPermitted);
  const bool collapse = net.enter == collapse_states(no_caution, "net").enter;

  // Hand oracle: profile 75% enters once 8 users entered (frame 75), 50% at frame 45, any user at frame 5.
  const std::array<int, 3> first_enter{75, 45, 5};
  bool match_ok = true;
  for (std::size_t p = 0; p < 3; ++p) {
    const double got = match_percentage(net, profile_from_counters(counters, profiles[p]));
    const double expect = 100.0 * (kFrames - std::abs(first_enter[p] - 40)) / kFrames;
    match_ok = match_ok && std::abs(got - expect) < 1e-12;
  }
  return {counters_ok && ceiling && collapse && match_ok,
          fmt("counters %s; ceiling rule %s; Caution collapse %s; match vs hand oracle %s", counters_ok ? "ok" : "WRONG",
              ceiling ? "ok" : "WRONG", collapse ? "ok" : "WRONG", match_ok ? "ok" : "WRONG")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("Acceptance criteria runner");
  std::vector<int> only, skip;
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--skip", skip, "Skip these criteria")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, "reward oracle", 5, reward_oracle_check},
      {2, "control law", 5, control_law_check},
      {3, "bezier", 5, bezier_check},
      {4, "rasterizer", 30, rasterizer_check},
      {5, "sync semantics", 60, sync_check},
      {6, "gradient check", 60, gradient_check},
      {7, "learning smoke test", 7200, learning_check},
      {8, "baseline trend", 1200, baseline_trend_check},
      {9, "aggressiveness monotonicity", 5, monotonicity_check},
      {10, "human comparison pipeline", 5, human_pipeline_check},
  };
  const std::set<int> only_set(only.begin(), only.end()), skip_set(skip.begin(), skip.end());
  int failures = 0;
  for (const auto& c : criteria) {
    if ((!only_set.empty() && !only_set.count(c.id)) || skip_set.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.time_limit;
    const bool pass = v.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("criterion %2d %s  %s: %s [%.1f s, limit %.0f s%s]\n", c.id, pass ? "PASS" : "FAIL", c.name.c_str(),
                v.detail.c_str(), secs, c.time_limit, in_time ? "" : ", OVER TIME");
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
