// Command-line entry points: training, evaluation, baselines, sweeps, scenario
// export, the decision service and the human comparison report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rrl/config.hpp"
#include "rrl/error.hpp"
#include "rrl/evaluation.hpp"
#include "rrl/replay.hpp"
#include "rrl/service.hpp"
#include "rrl/trainer.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;

struct TrainArgs {
  std::string config;
  std::string sync;
  long episodes = -1;
  long long seed = -1;
  int learners = -1;
  double lr = -1.0;
  int stage = -1;
  std::string out = "runs/train";
  std::string resume;
};

struct EvalArgs {
  std::string config;
  std::string checkpoint;
  std::string kind;
  std::string layout = "training";
  std::vector<int> traffic;
  std::vector<std::size_t> entries;
  long episodes = 3000;
  double aggr = 0.5;
  std::vector<double> aggr_levels{-1.0, 0.0, 0.5, 1.0};
  long long seed = 1;
  std::string out;
};

struct ExportArgs {
  std::string layout = "training";
  std::size_t entry = 0;
  int frames = 200;
  int traffic = 8;
  long long seed = 1;
  std::string id = "scenario";
  std::string out;
  std::string data_dir = "data";
};

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string data_dir = "data";
  std::string checkpoint;
};

struct CompareArgs {
  std::string scenario;
  std::string logs;
  std::string checkpoint;
  std::vector<double> aggr{-1.0, 0.5, 1.0};
};

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw rrl::ConfigError(std::string(what) + " not found: " + path);
}

// Writes to `path`, or to stdout when empty.
template <typename Fn>
void emit(const std::string& path, Fn&& fn) {
  if (path.empty()) {
    fn(std::cout);
    return;
  }
  if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
  std::ofstream out(path);
  if (!out) throw rrl::ConfigError("cannot write " + path);
  fn(out);
}

int cmd_train(const TrainArgs& a) {
  rrl::TrainerConfig cfg;
  if (!a.config.empty()) {
    require_file(a.config, "config file");
    cfg = rrl::load_trainer_config(a.config);
  }
  if (!a.sync.empty()) cfg.sync = rrl::SyncPolicy::parse(a.sync);
  if (a.episodes >= 0) cfg.total_episodes = a.episodes;
  if (a.seed >= 0) cfg.seed = static_cast<std::uint64_t>(a.seed);
  if (a.learners >= 0) cfg.learners = a.learners;
  if (a.lr >= 0.0) cfg.lr = a.lr;
  if (a.stage >= 0) rrl::apply_curriculum(cfg, a.stage);
  cfg.validate();

  std::optional<rrl::Checkpoint> resume;
  if (!a.resume.empty()) {
    require_file(a.resume, "checkpoint");
    resume = rrl::load_checkpoint(a.resume);
  }
  fs::create_directories(a.out);
  rrl::save_trainer_config(fs::path(a.out) / "config.json", cfg);
  std::ofstream metrics(fs::path(a.out) / "metrics.csv");
  if (!metrics) throw rrl::ConfigError("cannot write " + (fs::path(a.out) / "metrics.csv").string());
  rrl::write_metrics_header(metrics);
  rrl::TrainHooks hooks;
  hooks.checkpoint_path = fs::path(a.out) / "checkpoint.bin";
  hooks.on_episode = [&](const rrl::EpisodeRecord& rec, double ma) { rrl::write_metrics_row(metrics, rec, ma); };
  const rrl::TrainStats stats = rrl::train(cfg, hooks, resume);
  std::printf("episodes %zu  updates %ld  final moving-average positive ratio %.4f\n", stats.records.size(),
              stats.applied_updates, stats.final_ratio_ma());
  return 0;
}

rrl::EvalConfig eval_config(const EvalArgs& a) {
  rrl::EvalConfig cfg;
  if (!a.config.empty()) {
    require_file(a.config, "config file");
    cfg.env = rrl::load_trainer_config(a.config).env;
  }
  cfg.layout = a.layout;
  cfg.traffic_levels = a.traffic;
  cfg.entries = a.entries;
  cfg.episodes_per_level = a.episodes;
  cfg.aggressiveness = a.aggr;
  cfg.seed = static_cast<std::uint64_t>(a.seed);
  return cfg;
}

std::unique_ptr<rrl::Controller> net_controller(const std::string& path, rrl::EvalConfig& cfg) {
  require_file(path, "checkpoint");
  const rrl::Checkpoint ck = rrl::load_checkpoint(path);
  cfg.env.frame.grid_size = ck.config.grid_size;
  cfg.env.history = ck.config.input_planes / rrl::kChannelCount;
  return rrl::make_net_controller(ck);
}

int cmd_eval(const EvalArgs& a) {
  rrl::EvalConfig cfg = eval_config(a);
  auto controller = net_controller(a.checkpoint, cfg);
  const auto report = rrl::evaluate(*controller, cfg);
  emit(a.out, [&](std::ostream& o) { rrl::write_eval_csv(o, report); });
  return 0;
}

int cmd_baseline(const EvalArgs& a) {
  rrl::EvalConfig cfg = eval_config(a);
  auto controller = rrl::make_baseline(rrl::BaselineKind::parse(a.kind));
  const auto report = rrl::evaluate(*controller, cfg);
  emit(a.out, [&](std::ostream& o) { rrl::write_eval_csv(o, report); });
  return 0;
}

int cmd_sweep(const EvalArgs& a) {
  rrl::EvalConfig cfg = eval_config(a);
  auto controller = net_controller(a.checkpoint, cfg);
  const auto records = rrl::aggressiveness_sweep(*controller, cfg, a.aggr_levels);
  emit(a.out, [&](std::ostream& o) { rrl::write_sweep_csv(o, records); });
  return 0;
}

int cmd_replay_export(const ExportArgs& a) {
  auto layout =
      std::make_shared<const rrl::RoundaboutLayout>(rrl::load_layout_file(rrl::resolve_layout_path(a.layout)));
  auto routes = std::make_shared<const rrl::RouteTable>(layout);
  if (a.entry >= routes->entry_count()) throw rrl::ConfigError("entry out of range for layout " + a.layout);
  rrl::EnvConfig env;
  env.traffic = rrl::traffic_level("high", a.traffic);
  const auto log = rrl::export_stopline_scenario(routes, env, a.entry, a.frames, static_cast<std::uint64_t>(a.seed), a.id);
  fs::path out = a.out.empty() ? rrl::resolve_data_dir(a.data_dir) / "scenarios" / (a.id + ".jsonl") : fs::path(a.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  rrl::write_scenario_file(out, log);
  std::printf("wrote %zu frames to %s\n", log.frame_count(), out.string().c_str());
  return 0;
}

int cmd_serve(const ServeArgs& a) {
  std::optional<rrl::Checkpoint> ck;
  if (!a.checkpoint.empty()) {
    require_file(a.checkpoint, "checkpoint");
    ck = rrl::load_checkpoint(a.checkpoint);
  }
  rrl::DecisionService service(rrl::resolve_data_dir(a.data_dir), std::move(ck));
  std::printf("serving %s on http://%s:%d\n", service.data_dir().string().c_str(), a.host.c_str(), a.port);
  std::fflush(stdout);
  service.serve(a.host, a.port);
  return 0;
}

int cmd_compare_human(const CompareArgs& a) {
  require_file(a.scenario, "scenario");
  require_file(a.checkpoint, "checkpoint");
  const rrl::ScenarioLog log = rrl::read_scenario_file(a.scenario);
  fs::path logs = a.logs;
  if (fs::is_directory(logs)) logs /= fs::path(a.scenario).stem().string() + ".jsonl";
  std::vector<rrl::DecisionTimeline> users;
  for (const auto& r : rrl::read_decision_log(logs))
    if (r.decisions.size() == log.frame_count()) users.push_back({r.decisions, "user " + r.user_id});
  if (users.empty()) {
    std::fprintf(stderr, "error: no decision logs matching %zu frames in %s\n", log.frame_count(),
                 logs.string().c_str());
    return 1;
  }
  const rrl::Checkpoint ck = rrl::load_checkpoint(a.checkpoint);
  const rrl::PolicyNetwork net(ck.config);
  const auto table = rrl::compare_human(net, rrl::to_double(ck.params), log, users, a.aggr);
  std::printf("users %zu  frames %zu\n", users.size(), log.frame_count());
  rrl::print_comparison(std::cout, table);
  return 0;
}

void add_eval_options(CLI::App* cmd, EvalArgs& a) {
  cmd->add_option("--config", a.config, "Training config whose env section is used");
  cmd->add_option("--layout", a.layout, "Layout name (training, unseen) or path");
  cmd->add_option("--traffic", a.traffic, "Traffic caps, e.g. 10,15,20")->delimiter(',');
  cmd->add_option("--entries", a.entries, "Entry indices to use")->delimiter(',');
  cmd->add_option("--episodes", a.episodes, "Episodes per traffic level")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", a.seed, "Evaluation seed")->check(CLI::NonNegativeNumber);
  cmd->add_option("--out", a.out, "Output CSV (default stdout)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Roundabout insertion training and evaluation"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* c_train = app.add_subcommand("train", "Train a policy");
  c_train->add_option("--config", train.config, "Training config JSON");
  c_train->add_option("--sync", train.sync, "d-a3c, a3c[:n] or a2c[:n]");
  c_train->add_option("--episodes", train.episodes, "Total episodes")->check(CLI::NonNegativeNumber);
  c_train->add_option("--seed", train.seed, "Seed")->check(CLI::NonNegativeNumber);
  c_train->add_option("--learners", train.learners, "Learner count")->check(CLI::NonNegativeNumber);
  c_train->add_option("--lr", train.lr, "Learning rate")->check(CLI::NonNegativeNumber);
  c_train->add_option("--stage", train.stage, "Curriculum stage 0, 1 or 2")->check(CLI::Range(0, 2));
  c_train->add_option("--out", train.out, "Output directory");
  c_train->add_option("--resume", train.resume, "Checkpoint to continue from");

  EvalArgs eval;
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  c_eval->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  c_eval->add_option("--aggr", eval.aggr, "Aggressiveness");
  add_eval_options(c_eval, eval);

  EvalArgs base;
  auto* c_base = app.add_subcommand("baseline", "Evaluate a baseline controller");
  c_base->add_option("--kind", base.kind, "rule:<meters>, permitted or random")->required();
  c_base->add_option("--aggr", base.aggr, "Aggressiveness");
  add_eval_options(c_base, base);

  EvalArgs sweep;
  auto* c_sweep = app.add_subcommand("sweep", "Aggressiveness sweep of a checkpoint");
  c_sweep->add_option("--checkpoint", sweep.checkpoint, "Checkpoint file")->required();
  c_sweep->add_option("--aggr", sweep.aggr_levels, "Aggressiveness levels")->delimiter(',')->allow_extra_args(false);
  add_eval_options(c_sweep, sweep);

  ExportArgs ex;
  auto* c_export = app.add_subcommand("replay-export", "Record a stop-line scenario for decision capture");
  c_export->add_option("--layout", ex.layout, "Layout name or path");
  c_export->add_option("--entry", ex.entry, "Entry index");
  c_export->add_option("--frames", ex.frames, "Frame count")->check(CLI::PositiveNumber);
  c_export->add_option("--traffic", ex.traffic, "Traffic cap")->check(CLI::NonNegativeNumber);
  c_export->add_option("--seed", ex.seed, "Seed")->check(CLI::NonNegativeNumber);
  c_export->add_option("--id", ex.id, "Scenario id");
  c_export->add_option("--out", ex.out, "Output file (default <data-dir>/scenarios/<id>.jsonl)");
  c_export->add_option("--data-dir", ex.data_dir, "Data directory");

  ServeArgs serve;
  auto* c_serve = app.add_subcommand("serve", "Serve scenarios and collect decisions");
  c_serve->add_option("--host", serve.host, "Bind address");
  c_serve->add_option("--port", serve.port, "Port")->check(CLI::Range(1, 65535));
  c_serve->add_option("--data-dir", serve.data_dir, "Data directory (RRL_DATA_DIR overrides)");
  c_serve->add_option("--checkpoint", serve.checkpoint, "Checkpoint used for comparisons");

  CompareArgs cmp;
  auto* c_cmp = app.add_subcommand("compare-human", "Compare net decisions with user profiles");
  c_cmp->add_option("--scenario", cmp.scenario, "Scenario log")->required();
  c_cmp->add_option("--logs", cmp.logs, "Decision log file or directory")->required();
  c_cmp->add_option("--checkpoint", cmp.checkpoint, "Checkpoint file")->required();
  c_cmp->add_option("--aggr", cmp.aggr, "Aggressiveness levels")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    if (*c_train) return cmd_train(train);
    if (*c_eval) return cmd_eval(eval);
    if (*c_base) return cmd_baseline(base);
    if (*c_sweep) return cmd_sweep(sweep);
    if (*c_export) return cmd_replay_export(ex);
    if (*c_serve) return cmd_serve(serve);
    if (*c_cmp) return cmd_compare_human(cmp);
  } catch (const rrl::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
