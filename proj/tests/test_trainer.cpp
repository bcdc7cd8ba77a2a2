#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "rrl/error.hpp"
#include "rrl/trainer.hpp"

namespace rrl {
namespace {

TrainerConfig tiny_trainer(const std::string& sync, int learners, long episodes) {
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
  c.ma_window = 10;
  return c;
}

TEST(SyncPolicy, ParseAndName) {
  EXPECT_EQ(SyncPolicy::parse("d-a3c").kind, SyncKind::EpisodeEnd);
  const SyncPolicy a3c = SyncPolicy::parse("a3c:7");
  EXPECT_EQ(a3c.kind, SyncKind::NStep);
  EXPECT_EQ(a3c.n, 7);
  EXPECT_EQ(SyncPolicy::parse(a3c.name()).n, 7);
  EXPECT_EQ(SyncPolicy::parse("a2c").kind, SyncKind::SynchronousBatch);
  EXPECT_THROW(SyncPolicy::parse("ppo"), ConfigError);
  EXPECT_THROW(SyncPolicy::parse("a3c:0"), ConfigError);
  EXPECT_THROW(SyncPolicy::parse("d-a3c:3"), ConfigError);
}

TEST(Curriculum, StagesEnableNoiseProgressively) {
  EXPECT_FALSE(curriculum_schedule(0).path_noise);
  EXPECT_FALSE(curriculum_schedule(0).perception_noise);
  EXPECT_TRUE(curriculum_schedule(1).path_noise);
  EXPECT_FALSE(curriculum_schedule(1).perception_noise);
  EXPECT_TRUE(curriculum_schedule(2).path_noise);
  EXPECT_TRUE(curriculum_schedule(2).perception_noise);
  EXPECT_THROW(curriculum_schedule(3), ConfigError);
  EXPECT_THROW(curriculum_schedule(-1), ConfigError);
  TrainerConfig c;
  apply_curriculum(c, 2);
  EXPECT_TRUE(c.env.path_noise.enabled);
  EXPECT_TRUE(c.env.perception_noise.enabled);
}

TEST(TrainerConfig, ShapeMismatchIsRejected) {
  TrainerConfig c = tiny_trainer("d-a3c", 1, 1);
  c.env.history = 2;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_trainer("d-a3c", 1, 1);
  c.env.frame.grid_size = 11;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny_trainer("d-a3c", 1, 1);
  c.entries = {9};
  EXPECT_THROW(train(c), ConfigError);
}

TEST(RatioTracker, MatchesWindowOracle) {
  RatioTracker t(4);
  const std::vector<bool> seq{true, false, true, true, false, false, true, false, true};
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const double got = t.push(seq[i]);
    const std::size_t lo = i + 1 >= 4 ? i + 1 - 4 : 0;
    const double want = static_cast<double>(std::count(seq.begin() + lo, seq.begin() + i + 1, true)) /
                        static_cast<double>(i + 1 - lo);
    EXPECT_DOUBLE_EQ(got, want);
  }
}

TEST(GlobalStore, SgdUpdatesCommuteAcrossThreads) {
  // Values are dyadic rationals, so float sums are exact in any order.
  const std::size_t dim = 64;
  PolicyParams init;
  init.values.assign(dim, 0.0f);
  std::vector<GradientBuffer> bufs;
  for (int k = 0; k < 64; ++k) {
    GradientBuffer g;
    for (std::size_t i = 0; i < dim; ++i) g.values.push_back(static_cast<double>((k * 7 + static_cast<int>(i)) % 13 - 6) / 64.0);
    g.step_count = 1;
    bufs.push_back(g);
  }
  GlobalStore seq(init, Optimizer(OptimizerKind::Sgd, 1.0));
  for (const auto& g : bufs) seq.apply(g);

  GlobalStore par(init, Optimizer(OptimizerKind::Sgd, 1.0));
  {
    std::vector<std::jthread> threads;
    for (int t = 0; t < 8; ++t)
      threads.emplace_back([&, t] {
        for (std::size_t k = static_cast<std::size_t>(t); k < bufs.size(); k += 8) par.apply(bufs[k]);
      });
  }
  EXPECT_EQ(par.version(), 64);
  EXPECT_EQ(par.applied_updates(), 64);
  EXPECT_EQ(par.params().values, seq.params().values);
}

TEST(GlobalStore, CombinedUpdateIsOneVersion) {
  PolicyParams init;
  init.values.assign(3, 1.0f);
  GlobalStore s(init, Optimizer(OptimizerKind::Sgd, 0.5), 10);
  const std::vector<GradientBuffer> g{{{1, 2, 3}, 1}, {{1, 0, -1}, 1}};
  EXPECT_EQ(s.apply_combined(g), 11);
  EXPECT_EQ(s.params().values, (std::vector<float>{0.0f, 0.0f, 0.0f}));
  EXPECT_THROW(s.apply_combined({}), ContractViolation);
}

TEST(Schedules, EpisodeEndExchangesOncePerEpisodeWithAFixedSnapshot) {
  const TrainStats st = train(tiny_trainer("d-a3c", 1, 12));
  ASSERT_EQ(st.records.size(), 12u);
  for (const auto& r : st.records) {
    EXPECT_EQ(r.sync_count, 1);
    EXPECT_EQ(r.first_version, r.last_version);
  }
  EXPECT_EQ(st.store_version, 12);
  EXPECT_EQ(st.applied_updates, 12);
}

TEST(Schedules, NStepExchangesCeilStepsOverN) {
  const TrainStats st = train(tiny_trainer("a3c:5", 1, 8));
  long total = 0;
  for (const auto& r : st.records) {
    EXPECT_EQ(r.sync_count, (r.steps + 4) / 5) << "steps " << r.steps;
    total += r.sync_count;
  }
  EXPECT_EQ(st.applied_updates, total);
}

TEST(Schedules, LockstepAppliesOneCombinedUpdatePerInterval) {
  const TrainStats st = train(tiny_trainer("a2c:5", 3, 6));
  ASSERT_EQ(st.records.size(), 6u);
  EXPECT_EQ(st.store_version, st.applied_updates);
  long max_steps = 0, sum_steps = 0;
  for (const auto& r : st.records) {
    max_steps = std::max(max_steps, r.steps);
    sum_steps += r.steps;
  }
  EXPECT_GE(st.applied_updates, (max_steps + 4) / 5);
  EXPECT_LE(st.applied_updates, (sum_steps + 4) / 5 + 6);
}

TEST(Schedules, RunEpisodeRejectsLockstep) {
  const TrainerConfig c = tiny_trainer("a2c", 1, 1);
  const PolicyNetwork net(c.net);
  GlobalStore store(net.initial_params(), Optimizer(OptimizerKind::Sgd, 0.0));
  const auto routes = std::make_shared<const RouteTable>(
      std::make_shared<const RoundaboutLayout>(load_layout_file(resolve_layout_path("training"))));
  InsertionEnv env(routes, c.env);
  EXPECT_THROW(run_episode(store, net, env, c, 0, 0, 0), ContractViolation);
}

TEST(Concurrency, VersionReconcilesUnderEightLearners) {
  const TrainStats st = train(tiny_trainer("a3c:5", 8, 16));
  ASSERT_EQ(st.records.size(), 16u);
  long syncs = 0;
  std::vector<long> episodes;
  for (const auto& r : st.records) {
    syncs += r.sync_count;
    episodes.push_back(r.episode);
    EXPECT_EQ(r.entry, static_cast<std::size_t>(r.learner) % 3);
  }
  std::sort(episodes.begin(), episodes.end());
  for (long i = 0; i < 16; ++i) EXPECT_EQ(episodes[static_cast<std::size_t>(i)], i);
  EXPECT_EQ(st.store_version, syncs);
  EXPECT_EQ(st.applied_updates, syncs);
}

TEST(Determinism, SingleLearnerRunsAreBitIdentical) {
  const TrainerConfig c = tiny_trainer("d-a3c", 1, 6);
  const auto dir = std::filesystem::temp_directory_path() / "rrl_trainer_det";
  std::filesystem::create_directories(dir);
  TrainHooks ha, hb;
  ha.checkpoint_path = dir / "a.bin";
  hb.checkpoint_path = dir / "b.bin";
  const TrainStats a = train(c, ha), b = train(c, hb);
  ASSERT_EQ(a.records.size(), b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    EXPECT_EQ(a.records[i].steps, b.records[i].steps);
    EXPECT_EQ(a.records[i].total_reward, b.records[i].total_reward);
  }
  EXPECT_EQ(load_checkpoint(dir / "a.bin").params.values, load_checkpoint(dir / "b.bin").params.values);
  std::filesystem::remove_all(dir);
}

TEST(Resume, VersionContinuesAndArchitectureMustMatch) {
  TrainerConfig c = tiny_trainer("d-a3c", 1, 3);
  const auto dir = std::filesystem::temp_directory_path() / "rrl_trainer_resume";
  std::filesystem::create_directories(dir);
  TrainHooks h;
  h.checkpoint_path = dir / "c.bin";
  train(c, h);
  const Checkpoint ck = load_checkpoint(dir / "c.bin");
  EXPECT_EQ(ck.version, 3);
  apply_curriculum(c, 1);
  const TrainStats st = train(c, {}, ck);
  EXPECT_EQ(st.store_version, 6);
  c.net.trunk_width = 9;
  EXPECT_THROW(train(c, {}, ck), ConfigError);
  std::filesystem::remove_all(dir);
}

TEST(Metrics, CsvRoundTrip) {
  std::stringstream ss;
  write_metrics_header(ss);
  EpisodeRecord r;
  r.episode = 4;
  r.outcome = OutcomeKind::Crashed;
  r.steps = 57;
  write_metrics_row(ss, r, 0.125);
  const auto rows = read_metrics_csv(ss);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].episode, 4);
  EXPECT_EQ(rows[0].outcome, OutcomeKind::Crashed);
  EXPECT_EQ(rows[0].steps, 57);
  EXPECT_DOUBLE_EQ(rows[0].ratio_ma, 0.125);
  std::stringstream bad("a,b\n");
  EXPECT_THROW(read_metrics_csv(bad), ParseError);
}

}  // namespace
}  // namespace rrl
