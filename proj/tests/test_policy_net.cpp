#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "rrl/error.hpp"
#include "rrl/policy_net.hpp"

namespace rrl {
namespace {

NetworkConfig tiny_config() {
  NetworkConfig c;
  c.grid_size = 9;
  c.input_planes = 4;
  c.conv = {{3, 3, 2}};
  c.trunk_width = 10;
  c.merge_width = 6;
  return c;
}

NetInput random_input(const PolicyNetwork& net, Rng& rng) {
  NetInput in;
  in.visual.resize(net.visual_size());
  for (auto& v : in.visual) v = bernoulli(rng, 0.3) ? 1.0 : 0.0;
  in.nonvisual = {uniform(rng, 0, 1.2), 1.0, uniform(rng, 0, 1), 0, 0, 0};
  in.nonvisual[3 + std::uniform_int_distribution<int>(0, 2)(rng)] = 1.0;
  return in;
}

std::vector<Transition> random_trajectory(const PolicyNetwork& net, std::span<const double> w, Rng& rng, int len) {
  std::vector<Transition> traj;
  for (int t = 0; t < len; ++t) {
    Transition tr;
    tr.input = random_input(net, rng);
    tr.action = maneuver_from_index(std::uniform_int_distribution<int>(0, 2)(rng));
    tr.reward = uniform(rng, -0.3, 0.1);
    tr.value = net.forward(w, tr.input).value;
    traj.push_back(std::move(tr));
  }
  return traj;
}

TEST(NetworkConfig, DeskParamCountMatchesLayerOracle) {
  const PolicyNetwork net(NetworkConfig::desk());
  const std::size_t conv = 8 * (16 * 3 * 3) + 8;
  const std::size_t out = (21 - 3) / 2 + 1;
  const std::size_t flat = 8 * out * out;
  const std::size_t trunk = flat * 64 + 64;
  const std::size_t merge = (64 + kNonVisualSize) * 32 + 32;
  const std::size_t heads = 32 * 3 + 3 + 32 + 1;
  EXPECT_EQ(net.param_count(), conv + trunk + merge + heads);
  std::size_t total = 0;
  for (const auto& b : net.blocks()) {
    EXPECT_EQ(b.offset, total) << b.name;
    total += b.size;
  }
  EXPECT_EQ(total, net.param_count());
}

TEST(NetworkConfig, FullProfileShape) {
  const PolicyNetwork net(NetworkConfig::full());
  EXPECT_EQ(net.visual_size(), 16u * 84 * 84);
  EXPECT_EQ(net.config().conv.size(), 2u);
}

TEST(NetworkConfig, RejectsInvalidShapes) {
  NetworkConfig c = tiny_config();
  c.conv = {{3, 11, 1}};
  EXPECT_THROW(PolicyNetwork{c}, ConfigError);
  c = tiny_config();
  c.trunk_width = 0;
  EXPECT_THROW(PolicyNetwork{c}, ConfigError);
  c = tiny_config();
  c.action_count = 4;
  EXPECT_THROW(PolicyNetwork{c}, ConfigError);
}

TEST(NetworkConfig, JsonRoundTrip) {
  const NetworkConfig c = NetworkConfig::full();
  EXPECT_EQ(network_config_from_json(to_json(c)), c);
  EXPECT_THROW(network_config_from_json(nlohmann::json{{"grid_size", "big"}}), ParseError);
}

TEST(Forward, ProbabilitiesFormADistribution) {
  const PolicyNetwork net(tiny_config());
  const auto w = to_double(net.initial_params());
  Rng rng(1);
  for (int i = 0; i < 50; ++i) {
    const NetInput in = random_input(net, rng);
    ForwardCache cache;
    const PolicyOutput a = net.forward(w, in, &cache);
    const PolicyOutput b = net.forward(w, in);
    EXPECT_EQ(a.probs, b.probs);
    EXPECT_EQ(a.value, b.value);
    EXPECT_NEAR(a.probs[0] + a.probs[1] + a.probs[2], 1.0, 1e-12);
    for (double p : a.probs) EXPECT_GT(p, 0.0);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(std::exp(cache.log_probs[k]), a.probs[k], 1e-12);
  }
}

TEST(Forward, DimensionMismatchIsAContractViolation) {
  const PolicyNetwork net(tiny_config());
  const auto w = to_double(net.initial_params());
  Rng rng(2);
  NetInput in = random_input(net, rng);
  in.visual.pop_back();
  EXPECT_THROW(net.forward(w, in), ContractViolation);
  std::vector<double> short_w(w.begin(), w.end() - 1);
  EXPECT_THROW(net.forward(short_w, random_input(net, rng)), ContractViolation);
}

TEST(Init, BiasesZeroAndWeightsWithinFanInBound) {
  const PolicyNetwork net(tiny_config());
  const PolicyParams p = net.initial_params();
  for (const auto& b : p.shapes) {
    for (std::size_t i = b.offset; i < b.offset + b.size; ++i) {
      if (b.fan_in == 0) {
        ASSERT_EQ(p.values[i], 0.0f) << b.name;
      } else {
        ASSERT_LE(std::abs(p.values[i]), 1.0 / std::sqrt(static_cast<double>(b.fan_in)) + 1e-6) << b.name;
      }
    }
  }
}

TEST(Returns, DiscountedSumOracle) {
  const std::vector<double> r{1.0, -0.5, 0.25, 2.0};
  const double g = 0.9, boot = 3.0;
  const auto got = discounted_returns(r, g, boot);
  for (std::size_t t = 0; t < r.size(); ++t) {
    double expect = 0.0;
    for (std::size_t k = t; k < r.size(); ++k) expect += std::pow(g, static_cast<double>(k - t)) * r[k];
    expect += std::pow(g, static_cast<double>(r.size() - t)) * boot;
    EXPECT_NEAR(got[t], expect, 1e-12);
  }
  EXPECT_TRUE(discounted_returns({}, 0.9).empty());
}

TEST(Gradients, FiniteDifferenceCheckOnRandomConfigs) {
  Rng rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    NetworkConfig c;
    c.grid_size = 7 + 2 * trial;
    c.input_planes = 4 * (1 + trial % 2);
    c.conv = {{2 + trial, 3, 1 + trial % 2}};
    if (trial == 4) c.conv.push_back({3, 2, 1});
    c.trunk_width = 8 + trial;
    c.merge_width = 5 + trial;
    c.seed = 100 + static_cast<std::uint64_t>(trial);
    const PolicyNetwork net(c);
    ASSERT_LE(net.param_count(), 50000u);
    const auto w = to_double(net.initial_params());
    const auto traj = random_trajectory(net, w, rng, 6);
    const GradCheckResult res = finite_diff_check(net, w, traj, 0.95, 0.01, 200, 7 + trial);
    EXPECT_GT(res.checked, 100);
    EXPECT_LT(res.max_rel_error, 1e-4) << "trial " << trial;
  }
}

TEST(Gradients, EmptyTrajectoryIsRejected) {
  const PolicyNetwork net(tiny_config());
  const auto w = to_double(net.initial_params());
  EXPECT_THROW(episode_gradients(net, w, {}, 0.99, 0.01), ContractViolation);
}

TEST(Gradients, StepCountAndLossTerms) {
  const PolicyNetwork net(tiny_config());
  const auto w = to_double(net.initial_params());
  Rng rng(3);
  const auto traj = random_trajectory(net, w, rng, 5);
  LossTerms terms;
  const GradientBuffer g = episode_gradients(net, w, traj, 0.9, 0.01, 0.0, &terms);
  EXPECT_EQ(g.step_count, 5);
  EXPECT_EQ(g.values.size(), net.param_count());
  EXPECT_NEAR(terms.total, terms.policy + terms.value - 0.01 * terms.entropy, 1e-12);
  EXPECT_GT(terms.entropy, 0.0);
}

TEST(Update, PlainStepAndSgdOptimizerAgree) {
  const PolicyNetwork net(tiny_config());
  const PolicyParams p = net.initial_params();
  GradientBuffer g;
  g.values.assign(net.param_count(), 0.0);
  for (std::size_t i = 0; i < g.values.size(); ++i) g.values[i] = std::sin(static_cast<double>(i));
  const PolicyParams q = apply_update(p, g, 0.01);
  std::vector<float> via_opt = p.values;
  Optimizer sgd(OptimizerKind::Sgd, 0.01);
  sgd.apply(via_opt, g);
  for (std::size_t i = 0; i < q.values.size(); ++i) {
    EXPECT_FLOAT_EQ(q.values[i], static_cast<float>(p.values[i] - 0.01 * g.values[i]));
    EXPECT_FLOAT_EQ(via_opt[i], q.values[i]);
  }
}

TEST(Update, AdamFirstStepMovesByLearningRate) {
  std::vector<float> params{0.0f, 0.0f, 0.0f};
  GradientBuffer g{{2.0, -0.001, 0.0}, 1};
  Optimizer adam(OptimizerKind::Adam, 0.1);
  adam.apply(params, g);
  EXPECT_NEAR(params[0], -0.1, 1e-6);
  EXPECT_NEAR(params[1], 0.1, 1e-4);
  EXPECT_EQ(params[2], 0.0f);
}

TEST(Update, GradientClipLimitsGlobalNorm) {
  std::vector<float> params{0.0f, 0.0f};
  GradientBuffer g{{30.0, 40.0}, 1};
  Optimizer sgd(OptimizerKind::Sgd, 1.0, 5.0);
  sgd.apply(params, g);
  EXPECT_NEAR(params[0], -3.0, 1e-6);
  EXPECT_NEAR(params[1], -4.0, 1e-6);
  EXPECT_THROW(Optimizer(OptimizerKind::Sgd, -1.0), ConfigError);
  EXPECT_THROW(optimizer_from_string("rmsprop"), ConfigError);
  EXPECT_EQ(optimizer_from_string(to_string(OptimizerKind::Adam)), OptimizerKind::Adam);
}

TEST(Actions, ArgmaxTieBreaking) {
  EXPECT_EQ(argmax_action({0.2, 0.5, 0.3}), ManeuverState::NotPermitted);
  EXPECT_EQ(argmax_action({0.4, 0.4, 0.2}), ManeuverState::NotPermitted);
  EXPECT_EQ(argmax_action({0.4, 0.2, 0.4}), ManeuverState::Permitted);
  EXPECT_EQ(argmax_action({0.1, 0.2, 0.7}), ManeuverState::Caution);
}

TEST(Actions, SamplingFollowsProbabilities) {
  Rng rng(5);
  std::array<int, 3> counts{};
  const int n = 30000;
  for (int i = 0; i < n; ++i) ++counts[index_of(sample_action({0.2, 0.5, 0.3}, rng))];
  EXPECT_NEAR(counts[0] / double(n), 0.2, 0.01);
  EXPECT_NEAR(counts[1] / double(n), 0.5, 0.01);
  EXPECT_NEAR(counts[2] / double(n), 0.3, 0.01);
}

TEST(Checkpoint, RoundTripAndCorruption) {
  const auto dir = std::filesystem::temp_directory_path() / "rrl_ckpt_test";
  std::filesystem::create_directories(dir);
  const PolicyNetwork net(tiny_config());
  Checkpoint ck{tiny_config(), 42, net.initial_params()};
  save_checkpoint(dir / "a.bin", ck);
  const Checkpoint back = load_checkpoint(dir / "a.bin");
  EXPECT_EQ(back.config, ck.config);
  EXPECT_EQ(back.version, 42);
  EXPECT_EQ(back.params.values, ck.params.values);

  const auto size = std::filesystem::file_size(dir / "a.bin");
  std::filesystem::copy_file(dir / "a.bin", dir / "b.bin", std::filesystem::copy_options::overwrite_existing);
  std::filesystem::resize_file(dir / "b.bin", size - 3);
  EXPECT_THROW(load_checkpoint(dir / "b.bin"), ParseError);
  {
    std::ofstream bad(dir / "c.bin");
    bad << "{\"schema_version\": 99}\n";
  }
  EXPECT_THROW(load_checkpoint(dir / "c.bin"), ParseError);
  EXPECT_THROW(load_checkpoint(dir / "missing.bin"), ParseError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace rrl
