#include "rrl/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

#include "rrl/error.hpp"

namespace rrl {

// ---------------------------------------------------------------------------
// Configuration

SyncPolicy SyncPolicy::parse(const std::string& text) {
  SyncPolicy p;
  std::string head = text;
  std::optional<int> n;
  if (const auto colon = text.find(':'); colon != std::string::npos) {
    head = text.substr(0, colon);
    try {
      n = std::stoi(text.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("sync: bad step count in '" + text + "'");
    }
  }
  if (head == "d-a3c") {
    if (n) throw ConfigError("sync: d-a3c takes no step count");
    p.kind = SyncKind::EpisodeEnd;
  } else if (head == "a3c") {
    p.kind = SyncKind::NStep;
  } else if (head == "a2c") {
    p.kind = SyncKind::SynchronousBatch;
  } else {
    throw ConfigError("sync: unknown schedule '" + text + "' (expected d-a3c, a3c or a2c)");
  }
  if (n) p.n = *n;
  p.validate();
  return p;
}

std::string SyncPolicy::name() const {
  switch (kind) {
    case SyncKind::EpisodeEnd: return "d-a3c";
    case SyncKind::NStep: return "a3c:" + std::to_string(n);
    case SyncKind::SynchronousBatch: return "a2c:" + std::to_string(n);
  }
  return "unknown";
}

void SyncPolicy::validate() const {
  if (kind != SyncKind::EpisodeEnd && n < 1) throw ConfigError("sync: n must be >= 1");
}

void TrainerConfig::validate() const {
  sync.validate();
  if (learners < 0) throw ConfigError("learners must be >= 0");
  if (learners == 0 && envs_per_entry < 1) throw ConfigError("envs_per_entry must be >= 1");
  if (!(discount > 0.0 && discount <= 1.0)) throw ConfigError("discount must lie in (0, 1]");
  if (!(lr >= 0.0)) throw ConfigError("lr must be >= 0");
  if (!(entropy_coef >= 0.0)) throw ConfigError("entropy_coef must be >= 0");
  if (total_episodes < 0) throw ConfigError("total_episodes must be >= 0");
  if (ma_window < 1) throw ConfigError("ma_window must be >= 1");
  if (net.input_planes != env.history * kChannelCount)
    throw ConfigError("network.input_planes must equal history * 4");
  if (net.grid_size != env.frame.grid_size) throw ConfigError("network.grid_size must equal frame.grid_size");
  env.validate();
  net.validate();
}

int TrainerConfig::learner_count(std::size_t entry_count) const {
  if (learners > 0) return learners;
  return static_cast<int>(entry_count) * envs_per_entry;
}

CurriculumStage curriculum_schedule(int stage) {
  switch (stage) {
    case 0: return {false, false};
    case 1: return {true, false};
    case 2: return {true, true};
    default: throw ConfigError("curriculum: unknown stage " + std::to_string(stage) + " (expected 0, 1 or 2)");
  }
}

void apply_curriculum(TrainerConfig& cfg, int stage) {
  const CurriculumStage s = curriculum_schedule(stage);
  cfg.curriculum_stage = stage;
  cfg.env.path_noise.enabled = s.path_noise;
  cfg.env.perception_noise.enabled = s.perception_noise;
}

// ---------------------------------------------------------------------------
// Global store

GlobalStore::GlobalStore(PolicyParams initial, Optimizer optimizer, long version)
    : params_(std::move(initial)),
      optimizer_(std::move(optimizer)),
      version_(version),
      cached_(std::make_shared<const std::vector<double>>(to_double(params_))) {}

GlobalStore::Snapshot GlobalStore::snapshot() const {
  std::lock_guard lock(mu_);
  return {cached_, version_};
}

long GlobalStore::apply(const GradientBuffer& grads) {
  std::lock_guard lock(mu_);
  optimizer_.apply(params_.values, grads);
  cached_ = std::make_shared<const std::vector<double>>(to_double(params_));
  ++applied_;
  return ++version_;
}

long GlobalStore::apply_combined(std::span<const GradientBuffer> grads) {
  require(!grads.empty(), "apply_combined: no gradients");
  GradientBuffer sum;
  sum.values.assign(grads.front().values.size(), 0.0);
  for (const auto& g : grads) {
    require(g.values.size() == sum.values.size(), "apply_combined: dimension mismatch");
    for (std::size_t i = 0; i < sum.values.size(); ++i) sum.values[i] += g.values[i];
    sum.step_count += g.step_count;
  }
  return apply(sum);
}

long GlobalStore::version() const {
  std::lock_guard lock(mu_);
  return version_;
}

long GlobalStore::applied_updates() const {
  std::lock_guard lock(mu_);
  return applied_;
}

PolicyParams GlobalStore::params() const {
  std::lock_guard lock(mu_);
  return params_;
}

// ---------------------------------------------------------------------------
// Statistics

RatioTracker::RatioTracker(int window) : window_(window), ring_(static_cast<std::size_t>(window), 0) {
  require(window >= 1, "RatioTracker: window must be >= 1");
}

double RatioTracker::push(bool positive) {
  if (count_ >= window_) positives_ -= ring_[next_];
  ring_[next_] = positive ? 1 : 0;
  positives_ += positive ? 1 : 0;
  next_ = (next_ + 1) % ring_.size();
  ++count_;
  return value();
}

double RatioTracker::value() const {
  const long n = std::min<long>(count_, window_);
  return n == 0 ? 0.0 : static_cast<double>(positives_) / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// Learners

namespace {

// Per-episode random choices shared by every schedule.
struct EpisodeStart {
  std::uint64_t seed;
  Rng action_rng;
  double aggressiveness;
};

EpisodeStart episode_draws(const TrainerConfig& cfg, long episode) {
  const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(episode));
  Rng rng(derive_seed(seed, 2));
  const double aggr = uniform(rng, 0.0, 1.0);
  return {seed, std::move(rng), aggr};
}

EpisodeStart start_episode(InsertionEnv& env, const TrainerConfig& cfg, long episode, std::size_t entry) {
  EpisodeStart start = episode_draws(cfg, episode);
  env.reset(start.seed, entry, start.aggressiveness);
  return start;
}

}  // namespace

EpisodeSpec training_episode_spec(const TrainerConfig& cfg, long episode) {
  const EpisodeStart start = episode_draws(cfg, episode);
  return {start.seed, start.aggressiveness};
}

EpisodeRecord run_episode(GlobalStore& store, const PolicyNetwork& net, InsertionEnv& env,
                          const TrainerConfig& cfg, long episode, int learner, std::size_t entry) {
  require(cfg.sync.kind != SyncKind::SynchronousBatch, "run_episode: lockstep schedules run through train()");
  EpisodeStart start = start_episode(env, cfg, episode, entry);
  EpisodeRecord rec;
  rec.episode = episode;
  rec.learner = learner;
  rec.entry = entry;
  rec.aggressiveness = start.aggressiveness;

  GlobalStore::Snapshot snap = store.snapshot();
  rec.first_version = snap.version;
  std::vector<Transition> segment;
  while (true) {
    NetInput input = to_input(env.observation());
    const PolicyOutput out = net.forward(*snap.params, input);
    const ManeuverState action = sample_action(out.probs, start.action_rng);
    const StepResult r = env.step(action);
    rec.last_version = snap.version;
    rec.total_reward += r.reward.total;
    ++rec.steps;
    segment.push_back({std::move(input), action, r.reward.total, out.value});
    if (r.done()) {
      store.apply(episode_gradients(net, *snap.params, segment, cfg.discount, cfg.entropy_coef));
      ++rec.sync_count;
      rec.outcome = r.outcome->kind;
      break;
    }
    if (cfg.sync.kind == SyncKind::NStep && static_cast<int>(segment.size()) == cfg.sync.n) {
      const double bootstrap = net.forward(*snap.params, to_input(env.observation())).value;
      store.apply(episode_gradients(net, *snap.params, segment, cfg.discount, cfg.entropy_coef, bootstrap));
      ++rec.sync_count;
      segment.clear();
      snap = store.snapshot();
    }
  }
  return rec;
}

namespace {

struct Shared {
  std::mutex mu;
  TrainStats stats;
  RatioTracker tracker;
  const TrainHooks* hooks;
  const TrainerConfig* cfg;
  GlobalStore* store;
  long completed = 0;

  Shared(int window, const TrainHooks* h, const TrainerConfig* c, GlobalStore* s)
      : tracker(window), hooks(h), cfg(c), store(s) {}

  void record(const EpisodeRecord& rec) {
    std::lock_guard lock(mu);
    const double ma = tracker.push(rec.outcome == OutcomeKind::Reached);
    stats.records.push_back(rec);
    stats.ratio_ma.push_back(ma);
    ++completed;
    if (hooks->on_episode) hooks->on_episode(rec, ma);
    if (cfg->checkpoint_every > 0 && completed % cfg->checkpoint_every == 0 && !hooks->checkpoint_path.empty()) {
      const auto snap = store->snapshot();
      Checkpoint ck{cfg->net, snap.version, {}};
      ck.params.values.assign(snap.params->begin(), snap.params->end());
      save_checkpoint(hooks->checkpoint_path, ck);
    }
  }
};

// Lockstep schedule: every learner advances one step per tick; every n ticks
// the gradients of all learners are summed into one update.
void run_lockstep(Shared& shared, const PolicyNetwork& net, std::shared_ptr<const RouteTable> routes,
                  const TrainerConfig& cfg, const std::vector<std::size_t>& entries, int learners) {
  struct Lane {
    std::unique_ptr<InsertionEnv> env;
    std::optional<EpisodeStart> start;
    EpisodeRecord rec;
    std::vector<Transition> segment;
    bool active = false;
    bool touched = false;  // the current episode has data in this interval
  };
  std::atomic<long> next{0};
  std::vector<Lane> lanes(static_cast<std::size_t>(learners));
  auto begin = [&](Lane& lane, int id) {
    const long ep = next++;
    if (ep >= cfg.total_episodes) {
      lane.active = false;
      return;
    }
    const std::size_t entry = entries[static_cast<std::size_t>(id) % entries.size()];
    lane.start = start_episode(*lane.env, cfg, ep, entry);
    lane.rec = EpisodeRecord{};
    lane.rec.episode = ep;
    lane.rec.learner = id;
    lane.rec.entry = entry;
    lane.rec.aggressiveness = lane.start->aggressiveness;
    lane.rec.first_version = shared.store->version();
    lane.active = true;
  };
  for (int i = 0; i < learners; ++i) {
    lanes[static_cast<std::size_t>(i)].env = std::make_unique<InsertionEnv>(routes, cfg.env);
    begin(lanes[static_cast<std::size_t>(i)], i);
  }

  std::vector<GradientBuffer> pending;
  std::vector<EpisodeRecord> finished;
  auto snap = shared.store->snapshot();
  bool any = true;
  while (any) {
    for (int tick = 0; tick < cfg.sync.n; ++tick) {
      for (int i = 0; i < learners; ++i) {
        Lane& lane = lanes[static_cast<std::size_t>(i)];
        if (!lane.active) continue;
        NetInput input = to_input(lane.env->observation());
        const PolicyOutput out = net.forward(*snap.params, input);
        const ManeuverState action = sample_action(out.probs, lane.start->action_rng);
        const StepResult r = lane.env->step(action);
        lane.rec.last_version = snap.version;
        lane.rec.total_reward += r.reward.total;
        ++lane.rec.steps;
        lane.touched = true;
        lane.segment.push_back({std::move(input), action, r.reward.total, out.value});
        if (r.done()) {
          pending.push_back(episode_gradients(net, *snap.params, lane.segment, cfg.discount, cfg.entropy_coef));
          lane.segment.clear();
          lane.rec.outcome = r.outcome->kind;
          lane.rec.sync_count += 1;  // the update closing this interval
          finished.push_back(lane.rec);
          lane.touched = false;
          begin(lane, i);
        }
      }
    }
    for (auto& lane : lanes) {
      if (lane.segment.empty()) continue;
      const double bootstrap = net.forward(*snap.params, to_input(lane.env->observation())).value;
      pending.push_back(
          episode_gradients(net, *snap.params, lane.segment, cfg.discount, cfg.entropy_coef, bootstrap));
      lane.segment.clear();
      if (lane.touched) ++lane.rec.sync_count;
      lane.touched = false;
    }
    if (!pending.empty()) shared.store->apply_combined(pending);
    pending.clear();
    snap = shared.store->snapshot();
    for (const auto& rec : finished) shared.record(rec);
    finished.clear();
    any = false;
    for (const auto& lane : lanes) any = any || lane.active;
  }
}

}  // namespace

TrainStats train(const TrainerConfig& cfg, const TrainHooks& hooks, const std::optional<Checkpoint>& resume) {
  cfg.validate();
  auto layout = std::make_shared<const RoundaboutLayout>(load_layout_file(resolve_layout_path(cfg.layout)));
  auto routes = std::make_shared<const RouteTable>(layout);
  std::vector<std::size_t> entries = cfg.entries;
  if (entries.empty())
    for (std::size_t e = 0; e < routes->entry_count(); ++e) entries.push_back(e);
  for (auto e : entries)
    if (e >= routes->entry_count()) throw ConfigError("entries: index " + std::to_string(e) + " out of range");

  const PolicyNetwork net(cfg.net);
  PolicyParams initial = net.initial_params();
  long version = 0;
  if (resume) {
    if (!(resume->config == cfg.net)) {
      NetworkConfig a = resume->config, b = cfg.net;
      a.seed = b.seed = 0;
      if (!(a == b)) throw ConfigError("resume: checkpoint architecture differs from the configured network");
    }
    initial.values = resume->params.values;
    version = resume->version;
  }
  GlobalStore store(std::move(initial), Optimizer(cfg.optimizer, cfg.lr, cfg.grad_clip), version);
  Shared shared(cfg.ma_window, &hooks, &cfg, &store);
  const int learners = cfg.learner_count(entries.size());

  if (cfg.sync.kind == SyncKind::SynchronousBatch) {
    run_lockstep(shared, net, routes, cfg, entries, learners);
  } else {
    std::atomic<long> next{0};
    auto worker = [&](int id) {
      InsertionEnv env(routes, cfg.env);
      const std::size_t entry = entries[static_cast<std::size_t>(id) % entries.size()];
      for (long ep = next++; ep < cfg.total_episodes; ep = next++)
        shared.record(run_episode(store, net, env, cfg, ep, id, entry));
    };
    if (learners == 1) {
      worker(0);
    } else {
      std::vector<std::jthread> threads;
      for (int i = 0; i < learners; ++i) threads.emplace_back(worker, i);
    }
  }

  shared.stats.store_version = store.version();
  shared.stats.applied_updates = store.applied_updates();
  if (!hooks.checkpoint_path.empty()) save_checkpoint(hooks.checkpoint_path, {cfg.net, store.version(), store.params()});
  return std::move(shared.stats);
}

// ---------------------------------------------------------------------------
// Metrics CSV

void write_metrics_header(std::ostream& out) { out << "episode,outcome,steps,ratio_ma\n"; }

void write_metrics_row(std::ostream& out, const EpisodeRecord& rec, double ratio_ma) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", ratio_ma);
  out << rec.episode << ',' << to_string(rec.outcome) << ',' << rec.steps << ',' << buf << '\n';
}

std::vector<MetricsRow> read_metrics_csv(std::istream& in) {
  std::vector<MetricsRow> rows;
  std::string line;
  if (!std::getline(in, line) || line != "episode,outcome,steps,ratio_ma")
    throw ParseError("metrics csv: unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string f[4];
    for (auto& s : f)
      if (!std::getline(ss, s, ',')) throw ParseError("metrics csv: short row '" + line + "'");
    try {
      rows.push_back({std::stol(f[0]), outcome_from_string(f[1]), std::stol(f[2]), std::stod(f[3])});
    } catch (const std::invalid_argument&) {
      throw ParseError("metrics csv: bad number in '" + line + "'");
    }
  }
  return rows;
}

}  // namespace rrl
