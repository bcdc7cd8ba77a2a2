#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rrl/env.hpp"
#include "rrl/policy_net.hpp"

namespace rrl {

enum class SyncKind { EpisodeEnd, NStep, SynchronousBatch };

/// When learners exchange gradients with the global store.
///  - EpisodeEnd (D-A3C): once per episode, acting with one snapshot throughout.
///  - NStep(n) (A3C): every n steps and at episode end, refreshing the snapshot.
///  - SynchronousBatch (A2C): all learners step in lockstep; every n steps their
///    gradients are summed into a single update.
struct SyncPolicy {
  SyncKind kind = SyncKind::EpisodeEnd;
  int n = 5;

  /// Accepts "d-a3c", "a3c", "a3c:<n>", "a2c", "a2c:<n>".
  static SyncPolicy parse(const std::string& text);
  [[nodiscard]] std::string name() const;
  void validate() const;
};

struct TrainerConfig {
  SyncPolicy sync;
  int learners = 8;
  int envs_per_entry = 1;  // used to size the learner pool when learners == 0
  double discount = 0.99;
  double lr = 1e-4;
  double entropy_coef = 0.01;
  OptimizerKind optimizer = OptimizerKind::Sgd;
  double grad_clip = 0.0;
  long total_episodes = 1000;
  std::string layout = "training";
  std::vector<std::size_t> entries;  // empty: every entry of the layout
  EnvConfig env;
  NetworkConfig net = NetworkConfig::desk();
  std::uint64_t seed = 1;
  int curriculum_stage = 0;
  long checkpoint_every = 0;  // completed episodes between checkpoints; 0 = final only
  int ma_window = 1000;

  void validate() const;
  /// Learner count after resolving learners == 0.
  [[nodiscard]] int learner_count(std::size_t entry_count) const;
};

struct CurriculumStage {
  bool path_noise = false;
  bool perception_noise = false;
};

/// Stage 0: no noise; stage 1: path noise; stage 2: path and perception noise.
/// Throws ConfigError for other stages.
CurriculumStage curriculum_schedule(int stage);
void apply_curriculum(TrainerConfig& cfg, int stage);

/// The only object shared between learners. Snapshot reads and update
/// applications are each atomic with respect to one another.
class GlobalStore {
 public:
  struct Snapshot {
    std::shared_ptr<const std::vector<double>> params;
    long version = 0;
  };

  GlobalStore(PolicyParams initial, Optimizer optimizer, long version = 0);

  [[nodiscard]] Snapshot snapshot() const;
  /// Applies one gradient buffer and returns the new version.
  long apply(const GradientBuffer& grads);
  /// Applies several buffers as one combined (summed) update.
  long apply_combined(std::span<const GradientBuffer> grads);

  [[nodiscard]] long version() const;
  [[nodiscard]] long applied_updates() const;
  [[nodiscard]] PolicyParams params() const;

 private:
  mutable std::mutex mu_;
  PolicyParams params_;
  Optimizer optimizer_;
  long version_;
  long applied_ = 0;
  std::shared_ptr<const std::vector<double>> cached_;
};

struct EpisodeRecord {
  long episode = 0;
  int learner = 0;
  std::size_t entry = 0;
  OutcomeKind outcome = OutcomeKind::TimeOver;
  long steps = 0;
  int sync_count = 0;
  long first_version = 0;  // snapshot version acting at the first step
  long last_version = 0;   // snapshot version acting at the last step
  double total_reward = 0.0;
  double aggressiveness = 0.0;
};

struct TrainStats {
  std::vector<EpisodeRecord> records;  // completion order
  std::vector<double> ratio_ma;        // moving-average positive ratio after each record
  long store_version = 0;
  long applied_updates = 0;
  [[nodiscard]] double final_ratio_ma() const { return ratio_ma.empty() ? 0.0 : ratio_ma.back(); }
};

/// Moving average of Reached outcomes over the last `window` records.
class RatioTracker {
 public:
  explicit RatioTracker(int window);
  double push(bool positive);
  [[nodiscard]] double value() const;

 private:
  int window_;
  std::vector<char> ring_;
  std::size_t next_ = 0;
  long count_ = 0;
  long positives_ = 0;
};

struct TrainHooks {
  /// Called in completion order, serialized, after each episode.
  std::function<void(const EpisodeRecord&, double ratio_ma)> on_episode;
  /// Where checkpoints go; empty disables checkpoint files.
  std::filesystem::path checkpoint_path;
};

/// Runs training. `resume` continues from a checkpoint (same architecture).
TrainStats train(const TrainerConfig& cfg, const TrainHooks& hooks = {},
                 const std::optional<Checkpoint>& resume = std::nullopt);

/// Environment seed and active aggressiveness of training episode `episode`.
/// Every schedule resets its environment with these values.
struct EpisodeSpec {
  std::uint64_t seed = 0;
  double aggressiveness = 0.0;
};
EpisodeSpec training_episode_spec(const TrainerConfig& cfg, long episode);

/// Single learner episode against a store; exposed for schedule tests.
EpisodeRecord run_episode(GlobalStore& store, const PolicyNetwork& net, InsertionEnv& env,
                          const TrainerConfig& cfg, long episode, int learner, std::size_t entry);

/// Metrics CSV: `episode,outcome,steps,ratio_ma`.
void write_metrics_header(std::ostream& out);
void write_metrics_row(std::ostream& out, const EpisodeRecord& rec, double ratio_ma);
struct MetricsRow {
  long episode = 0;
  OutcomeKind outcome = OutcomeKind::TimeOver;
  long steps = 0;
  double ratio_ma = 0.0;
};
std::vector<MetricsRow> read_metrics_csv(std::istream& in);

}  // namespace rrl
