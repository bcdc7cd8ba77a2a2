#include <gtest/gtest.h>

#include "rrl/env.hpp"
#include "rrl/error.hpp"

namespace rrl {
namespace {

std::shared_ptr<const RouteTable> training_routes() {
  static const auto routes = std::make_shared<const RouteTable>(
      std::make_shared<const RoundaboutLayout>(load_layout_file(resolve_layout_path("training"))));
  return routes;
}

EnvConfig small_env(int max_passives) {
  EnvConfig cfg;
  cfg.traffic = traffic_level("low", max_passives);
  cfg.frame = {21, 50.0};
  cfg.history = 2;
  return cfg;
}

TEST(Env, ObservationShape) {
  InsertionEnv env(training_routes(), small_env(4));
  env.reset(1, 0, 0.5);
  const auto& obs = env.observation();
  EXPECT_EQ(obs.planes(), 8);
  EXPECT_EQ(obs.grid_size(), 21);
  EXPECT_EQ(obs.frames.front().count(kNavigable), 0u);  // zero padding before the first push
  EXPECT_GT(obs.frames.back().count(kNavigable), 0u);
  EXPECT_DOUBLE_EQ(obs.nonvisual.aggressiveness, 0.5);
  EXPECT_EQ(obs.nonvisual.last_action, ManeuverState::NotPermitted);
}

TEST(Env, SameSeedSameActionsSameTrajectory) {
  InsertionEnv a(training_routes(), small_env(6)), b(training_routes(), small_env(6));
  a.reset(77, 1, 0.3);
  b.reset(77, 1, 0.3);
  Rng rng(4);
  for (int t = 0; t < 400 && !a.done(); ++t) {
    const auto act = maneuver_from_index(std::uniform_int_distribution<int>(0, 2)(rng));
    const StepResult ra = a.step(act), rb = b.step(act);
    ASSERT_EQ(ra.reward.total, rb.reward.total);
    ASSERT_EQ(ra.done(), rb.done());
    ASSERT_EQ(a.observation().frames.back(), b.observation().frames.back());
  }
}

TEST(Env, EmptyRoundaboutPermittedReaches) {
  InsertionEnv env(training_routes(), small_env(0));
  for (std::size_t entry = 0; entry < 3; ++entry) {
    env.reset(entry, entry, 0.5);
    StepResult r;
    while (!env.done()) r = env.step(ManeuverState::Permitted);
    EXPECT_EQ(r.outcome->kind, OutcomeKind::Reached);
    EXPECT_GT(r.reward.total, 0.5);
  }
}

TEST(Env, NotPermittedHoldsAtTheStopLineUntilTimeOver) {
  InsertionEnv env(training_routes(), small_env(0));
  env.reset(3, 0, 0.5);
  StepResult r;
  double min_dist = 1e9;
  while (!env.done()) {
    r = env.step(ManeuverState::NotPermitted);
    min_dist = std::min(min_dist, env.dist_to_stop());
  }
  EXPECT_EQ(r.outcome->kind, OutcomeKind::TimeOver);
  EXPECT_GE(min_dist, -0.5);
  EXPECT_NEAR(env.active().speed, 0.0, 1e-9);
}

TEST(Env, StepAfterTerminalIsAContractViolation) {
  InsertionEnv env(training_routes(), small_env(0));
  env.reset(3, 0, 0.5);
  while (!env.done()) env.step(ManeuverState::Permitted);
  EXPECT_THROW(env.step(ManeuverState::Permitted), ContractViolation);
  EXPECT_THROW(env.reset(1, 7, 0.5), ContractViolation);
}

TEST(Env, PathNoiseKeepsTheRouteEnd) {
  EnvConfig cfg = small_env(0);
  cfg.path_noise.enabled = true;
  InsertionEnv env(training_routes(), cfg);
  const Vec2 goal = training_routes()->active_route(0)->path.back();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    env.reset(seed, 0, 0.5);
    EXPECT_LT(distance(env.active().path().back(), goal), 1e-9);
  }
}

TEST(Env, BlindModeRefusesObservations) {
  EnvConfig cfg = small_env(2);
  cfg.observe = false;
  InsertionEnv env(training_routes(), cfg);
  env.reset(1, 0, 0.5);
  EXPECT_THROW((void)env.observation(), ContractViolation);
}

TEST(Env, InvalidConfigIsRejected) {
  EnvConfig cfg = small_env(2);
  cfg.history = 0;
  EXPECT_THROW(InsertionEnv(training_routes(), cfg), ConfigError);
  cfg = small_env(2);
  cfg.world.dt = 0.0;
  EXPECT_THROW(InsertionEnv(training_routes(), cfg), ConfigError);
}

}  // namespace
}  // namespace rrl
