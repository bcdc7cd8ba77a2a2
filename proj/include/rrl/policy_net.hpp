#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "rrl/maneuver.hpp"
#include "rrl/perception.hpp"
#include "rrl/random.hpp"

namespace rrl {

struct ConvSpec {
  int filters = 8;
  int kernel = 3;
  int stride = 2;
  bool operator==(const ConvSpec&) const = default;
};

/// Convolutional trunk over the visual planes, a dense layer, concatenation
/// with the non-visual features, a dense merge layer, then a softmax policy
/// head and a linear value head. All hidden layers use ReLU.
struct NetworkConfig {
  int grid_size = 21;
  int input_planes = 16;
  std::vector<ConvSpec> conv{{8, 3, 2}};
  int trunk_width = 64;
  int merge_width = 32;
  int action_count = kActionCount;
  std::uint64_t seed = 1;

  /// Small profile used for desk-scale training.
  static NetworkConfig desk();
  /// Full-size profile: 84x84 input, conv 16x8x8/4 and 32x4x4/2, dense 256 and 128.
  static NetworkConfig full();

  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

nlohmann::json to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const nlohmann::json& j);

struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
  std::size_t fan_in = 0;
};

/// Flat float32 parameters plus the table describing each block.
struct PolicyParams {
  std::vector<float> values;
  std::vector<ParamBlock> shapes;
};

struct PolicyOutput {
  std::array<double, kActionCount> probs{};
  double value = 0.0;
};

struct GradientBuffer {
  std::vector<double> values;
  long step_count = 0;
};

/// Network input: visual planes (plane, row, column) and non-visual features.
struct NetInput {
  std::vector<double> visual;
  std::array<double, kNonVisualSize> nonvisual{};
};

NetInput to_input(const ObservationBundle& obs);

/// Intermediate values of one forward pass, kept for the backward pass.
struct ForwardCache {
  std::vector<std::vector<double>> conv;     // post-activation output of each conv layer
  std::vector<std::vector<double>> patches;  // unfolded input of each conv layer
  std::vector<double> trunk;
  std::vector<double> merge_in;
  std::vector<double> merge;
  std::array<double, kActionCount> logits{};
  std::array<double, kActionCount> log_probs{};
  std::array<double, kActionCount> probs{};
  double value = 0.0;
};

class PolicyNetwork {
 public:
  explicit PolicyNetwork(NetworkConfig cfg);

  [[nodiscard]] const NetworkConfig& config() const { return cfg_; }
  [[nodiscard]] std::size_t param_count() const { return param_count_; }
  [[nodiscard]] const std::vector<ParamBlock>& blocks() const { return blocks_; }
  [[nodiscard]] std::size_t visual_size() const;

  /// Fan-in scaled uniform weights (policy head scaled down by 0.1), zero biases.
  [[nodiscard]] PolicyParams initial_params() const;

  /// Pure forward pass. Throws ContractViolation on dimension mismatch.
  PolicyOutput forward(std::span<const double> w, const NetInput& in, ForwardCache* cache = nullptr) const;

  /// Accumulates into `grad` the parameter gradient of a scalar loss whose
  /// derivatives with respect to the logits and the value are given.
  void backward(std::span<const double> w, const NetInput& in, const ForwardCache& cache,
                const std::array<double, kActionCount>& d_logits, double d_value, std::span<double> grad) const;

  /// Sign pattern of every ReLU pre-activation; used to skip finite-difference
  /// probes that cross a kink.
  [[nodiscard]] std::vector<bool> activation_pattern(std::span<const double> w, const NetInput& in) const;

 private:
  struct ConvShape {
    int in_c, in_h, in_w, out_c, out_h, out_w, k, s;
    std::size_t w_off, b_off;
  };
  NetworkConfig cfg_;
  std::vector<ConvShape> conv_;
  std::size_t flat_ = 0;
  std::size_t trunk_w_ = 0, trunk_b_ = 0, merge_w_ = 0, merge_b_ = 0;
  std::size_t pi_w_ = 0, pi_b_ = 0, v_w_ = 0, v_b_ = 0;
  std::size_t param_count_ = 0;
  std::vector<ParamBlock> blocks_;
};

std::vector<double> to_double(const PolicyParams& p);

ManeuverState sample_action(const std::array<double, kActionCount>& probs, Rng& rng);
/// Greedy choice; ties resolve to NotPermitted when it is among the maxima,
/// otherwise to the lowest index.
ManeuverState argmax_action(const std::array<double, kActionCount>& probs);

struct Transition {
  NetInput input;
  ManeuverState action = ManeuverState::NotPermitted;
  double reward = 0.0;
  double value = 0.0;
};

/// R_t = r_t + discount * R_{t+1}, with R_T = bootstrap.
std::vector<double> discounted_returns(std::span<const double> rewards, double discount, double bootstrap = 0.0);

struct LossTerms {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double total = 0.0;
};

/// Loss sum over t of [-log pi(a_t) * A_t + 0.5 (R_t - V_t)^2 - entropy_coef * H(pi_t)]
/// with the advantages A_t given (treated as constants).
LossTerms trajectory_loss(const PolicyNetwork& net, std::span<const double> w, std::span<const Transition> traj,
                          std::span<const double> returns, std::span<const double> advantages,
                          double entropy_coef);

/// Gradient of the loss above with A_t = R_t - V_t held fixed. Params are not
/// modified. Throws ContractViolation on an empty trajectory.
GradientBuffer episode_gradients(const PolicyNetwork& net, std::span<const double> w,
                                 std::span<const Transition> traj, double discount, double entropy_coef,
                                 double bootstrap = 0.0, LossTerms* terms = nullptr);

struct GradCheckResult {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped_kinks = 0;
};

/// Central differences (step 1e-5, 64-bit) of the trajectory loss against
/// the analytic gradient on `coordinates` randomly chosen parameters.
/// Relative error is |a - n| / max(|a| + |n|, 1e-7).
GradCheckResult finite_diff_check(const PolicyNetwork& net, std::span<const double> w,
                                  std::span<const Transition> traj, double discount, double entropy_coef,
                                  int coordinates, std::uint64_t seed);

/// Plain gradient step: returns params - lr * grads.
PolicyParams apply_update(const PolicyParams& params, const GradientBuffer& grads, double lr);

enum class OptimizerKind { Sgd, Adam };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

/// Stateful optimizer applied to the global parameters.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double grad_clip = 0.0);
  /// Applies one update in place. Gradients are rescaled to `grad_clip`
  /// global norm first when grad_clip > 0.
  void apply(std::vector<float>& params, const GradientBuffer& grads);
  [[nodiscard]] OptimizerKind kind() const { return kind_; }
  [[nodiscard]] double lr() const { return lr_; }

 private:
  OptimizerKind kind_;
  double lr_;
  double grad_clip_;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  long t_ = 0;
  std::vector<double> m_, v_;
};

inline constexpr int kCheckpointSchemaVersion = 1;

struct Checkpoint {
  NetworkConfig config;
  long version = 0;
  PolicyParams params;
};

/// One JSON header line, then the raw little-endian float32 parameters.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rrl
