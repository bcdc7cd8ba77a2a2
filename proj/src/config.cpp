#include "rrl/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "rrl/error.hpp"

namespace rrl {

using nlohmann::json;

namespace {

/// Reads optional keys from one JSON object and rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& target) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      target = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(path_ + "." + key + ": wrong type");
    }
  }

  std::optional<Section> sub(const char* key) {
    seen_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Section(j_.at(key), path_ + "." + key);
  }

  [[nodiscard]] const json& raw() const { return j_; }
  [[nodiscard]] const std::string& path() const { return path_; }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown key '" + path_ + "." + k + "'");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

json world_json(const WorldParams& w) {
  return {{"dt", w.dt},
          {"time_budget_factor", w.time_budget_factor},
          {"time_budget_floor", w.time_budget_floor},
          {"vehicle_length", w.vehicle_length},
          {"vehicle_width", w.vehicle_width},
          {"target_speed", w.target_speed},
          {"warmup", w.warmup},
          {"active_initial_speed", w.active_initial_speed}};
}

json passive_json(const PassiveParams& p) {
  return {{"a_max", p.a_max},
          {"comfort_brake", p.comfort_brake},
          {"brake_max", p.brake_max},
          {"time_headway", p.time_headway},
          {"min_gap", p.min_gap},
          {"lookahead", p.lookahead},
          {"approach_speed", p.approach_speed},
          {"merge_headway", p.merge_headway},
          {"critical_gap_min", p.critical_gap_min},
          {"lateral_margin", p.lateral_margin},
          {"yield_brake_max", p.yield_brake_max},
          {"yield_anticipation", p.yield_anticipation},
          {"merge_zone", p.merge_zone}};
}

void read_world(Section s, WorldParams& w) {
  s.get("dt", w.dt);
  s.get("time_budget_factor", w.time_budget_factor);
  s.get("time_budget_floor", w.time_budget_floor);
  s.get("vehicle_length", w.vehicle_length);
  s.get("vehicle_width", w.vehicle_width);
  s.get("target_speed", w.target_speed);
  s.get("warmup", w.warmup);
  s.get("active_initial_speed", w.active_initial_speed);
  s.finish();
}

void read_passive(Section s, PassiveParams& p) {
  s.get("a_max", p.a_max);
  s.get("comfort_brake", p.comfort_brake);
  s.get("brake_max", p.brake_max);
  s.get("time_headway", p.time_headway);
  s.get("min_gap", p.min_gap);
  s.get("lookahead", p.lookahead);
  s.get("approach_speed", p.approach_speed);
  s.get("merge_headway", p.merge_headway);
  s.get("critical_gap_min", p.critical_gap_min);
  s.get("lateral_margin", p.lateral_margin);
  s.get("yield_brake_max", p.yield_brake_max);
  s.get("yield_anticipation", p.yield_anticipation);
  s.get("merge_zone", p.merge_zone);
  s.finish();
}

}  // namespace

json env_config_to_json(const EnvConfig& c) {
  return {{"world", world_json(c.world)},
          {"passive", passive_json(c.world.passive)},
          {"traffic",
           {{"max_passives", c.traffic.max_passives},
            {"level_name", c.traffic.level_name},
            {"spawn_rate", c.traffic.spawn_rate},
            {"through_traffic", c.traffic.through_traffic}}},
          {"comfort", {{"a_max", c.comfort.a_max}, {"d_max", c.comfort.d_max}, {"h", c.comfort.h}}},
          {"reward",
           {{"w_ds", c.weights.w_ds},
            {"w_cf", c.weights.w_cf},
            {"beta", c.weights.beta},
            {"gamma_crash", c.weights.gamma_crash},
            {"psi", c.weights.psi},
            {"pen_caution", c.weights.pen_caution},
            {"pen_notpermitted", c.weights.pen_notpermitted}}},
          {"frame", {{"grid_size", c.frame.grid_size}, {"window", c.frame.window}}},
          {"history", c.history},
          {"path_noise", {{"anchor_sigma", c.path_noise.anchor_sigma}, {"enabled", c.path_noise.enabled}}},
          {"perception_noise",
           {{"pos_sigma", c.perception_noise.pos_sigma},
            {"size_sigma", c.perception_noise.size_sigma},
            {"heading_sigma", c.perception_noise.heading_sigma},
            {"enabled", c.perception_noise.enabled}}}};
}

namespace {

EnvConfig read_env(Section s) {
  EnvConfig c;
  if (auto w = s.sub("world")) read_world(*w, c.world);
  if (auto p = s.sub("passive")) read_passive(*p, c.world.passive);
  if (auto t = s.sub("traffic")) {
    t->get("max_passives", c.traffic.max_passives);
    t->get("level_name", c.traffic.level_name);
    t->get("spawn_rate", c.traffic.spawn_rate);
    t->get("through_traffic", c.traffic.through_traffic);
    t->finish();
  }
  if (auto k = s.sub("comfort")) {
    k->get("a_max", c.comfort.a_max);
    k->get("d_max", c.comfort.d_max);
    k->get("h", c.comfort.h);
    k->finish();
  }
  if (auto r = s.sub("reward")) {
    r->get("w_ds", c.weights.w_ds);
    r->get("w_cf", c.weights.w_cf);
    r->get("beta", c.weights.beta);
    r->get("gamma_crash", c.weights.gamma_crash);
    r->get("psi", c.weights.psi);
    r->get("pen_caution", c.weights.pen_caution);
    r->get("pen_notpermitted", c.weights.pen_notpermitted);
    r->finish();
  }
  if (auto f = s.sub("frame")) {
    f->get("grid_size", c.frame.grid_size);
    f->get("window", c.frame.window);
    f->finish();
  }
  s.get("history", c.history);
  if (auto p = s.sub("path_noise")) {
    p->get("anchor_sigma", c.path_noise.anchor_sigma);
    p->get("enabled", c.path_noise.enabled);
    p->finish();
  }
  if (auto p = s.sub("perception_noise")) {
    p->get("pos_sigma", c.perception_noise.pos_sigma);
    p->get("size_sigma", c.perception_noise.size_sigma);
    p->get("heading_sigma", c.perception_noise.heading_sigma);
    p->get("enabled", c.perception_noise.enabled);
    p->finish();
  }
  s.finish();
  c.validate();
  return c;
}

}  // namespace

EnvConfig env_config_from_json(const json& j) { return read_env(Section(j, "env")); }

json trainer_config_to_json(const TrainerConfig& c) {
  return {{"schema_version", kConfigSchemaVersion},
          {"trainer",
           {{"sync", c.sync.name()},
            {"learners", c.learners},
            {"envs_per_entry", c.envs_per_entry},
            {"discount", c.discount},
            {"lr", c.lr},
            {"entropy_coef", c.entropy_coef},
            {"optimizer", to_string(c.optimizer)},
            {"grad_clip", c.grad_clip},
            {"total_episodes", c.total_episodes},
            {"layout", c.layout},
            {"entries", c.entries},
            {"seed", c.seed},
            {"curriculum_stage", c.curriculum_stage},
            {"checkpoint_every", c.checkpoint_every},
            {"ma_window", c.ma_window}}},
          {"network", to_json(c.net)},
          {"env", env_config_to_json(c.env)}};
}

TrainerConfig trainer_config_from_json(const json& j) {
  Section root(j, "config");
  int schema = kConfigSchemaVersion;
  root.get("schema_version", schema);
  if (schema != kConfigSchemaVersion) throw ConfigError("config.schema_version: unsupported value");
  TrainerConfig c;
  if (auto e = root.sub("env")) c.env = read_env(*e);
  if (auto n = root.sub("network")) {
    static const std::set<std::string> kKeys{"grid_size",   "input_planes", "conv", "trunk_width",
                                             "merge_width", "action_count", "seed"};
    for (const auto& [k, v] : n->raw().items())
      if (!kKeys.count(k)) throw ConfigError("unknown key 'config.network." + k + "'");
    try {
      c.net = network_config_from_json(n->raw());
    } catch (const ParseError& err) {
      throw ConfigError(std::string("config.") + err.what());
    }
  }
  // Input shape keys left out of the network section follow the env.
  const auto* net_json = j.contains("network") ? &j.at("network") : nullptr;
  if (!net_json || !net_json->contains("grid_size")) c.net.grid_size = c.env.frame.grid_size;
  if (!net_json || !net_json->contains("input_planes")) c.net.input_planes = c.env.history * kChannelCount;
  if (auto t = root.sub("trainer")) {
    std::string sync = c.sync.name();
    t->get("sync", sync);
    c.sync = SyncPolicy::parse(sync);
    t->get("learners", c.learners);
    t->get("envs_per_entry", c.envs_per_entry);
    t->get("discount", c.discount);
    t->get("lr", c.lr);
    t->get("entropy_coef", c.entropy_coef);
    std::string opt = to_string(c.optimizer);
    t->get("optimizer", opt);
    try {
      c.optimizer = optimizer_from_string(opt);
    } catch (const std::exception&) {
      throw ConfigError("config.trainer.optimizer: unknown value '" + opt + "'");
    }
    t->get("grad_clip", c.grad_clip);
    t->get("total_episodes", c.total_episodes);
    t->get("layout", c.layout);
    t->get("entries", c.entries);
    t->get("seed", c.seed);
    t->get("curriculum_stage", c.curriculum_stage);
    t->get("checkpoint_every", c.checkpoint_every);
    t->get("ma_window", c.ma_window);
    t->finish();
  }
  root.finish();
  if (c.curriculum_stage != 0) apply_curriculum(c, c.curriculum_stage);
  c.validate();
  return c;
}

TrainerConfig load_trainer_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception&) {
    throw ConfigError("config file " + path.string() + " is not valid JSON");
  }
  try {
    return trainer_config_from_json(j);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void save_trainer_config(const std::filesystem::path& path, const TrainerConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file " + path.string());
  out << trainer_config_to_json(cfg).dump(2) << '\n';
}

}  // namespace rrl
