#include "rrl/policy_net.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "rrl/error.hpp"

namespace rrl {

namespace {

using nlohmann::json;

constexpr double kPolicyHeadGain = 0.1;

inline double relu(double x) { return x > 0.0 ? x : 0.0; }

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;
using RowMap = Eigen::Map<RowMatrix>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

void dense(std::span<const double> w, std::size_t w_off, std::size_t b_off, std::span<const double> x,
           std::vector<double>& y, std::size_t out) {
  y.resize(out);
  const auto in = static_cast<Eigen::Index>(x.size());
  const auto n = static_cast<Eigen::Index>(out);
  VecMap(y.data(), n) = ConstRowMap(w.data() + w_off, n, in) * ConstVecMap(x.data(), in) +
                        ConstVecMap(w.data() + b_off, n);
}

// Unfolds the receptive fields of a convolution into a (in_c*k*k) x (out_h*out_w)
// column-major matrix.
template <typename Shape>
void im2col(const Shape& s, const double* src, std::vector<double>& cols) {
  const std::size_t kk = static_cast<std::size_t>(s.k) * s.k;
  const std::size_t rows = static_cast<std::size_t>(s.in_c) * kk;
  cols.resize(rows * static_cast<std::size_t>(s.out_h) * s.out_w);
  double* dst = cols.data();
  for (int oy = 0; oy < s.out_h; ++oy)
    for (int ox = 0; ox < s.out_w; ++ox)
      for (int ch = 0; ch < s.in_c; ++ch) {
        const double* plane = src + static_cast<std::size_t>(ch) * s.in_h * s.in_w;
        for (int ky = 0; ky < s.k; ++ky) {
          const double* row = plane + static_cast<std::size_t>(oy * s.s + ky) * s.in_w + ox * s.s;
          for (int kx = 0; kx < s.k; ++kx) *dst++ = row[kx];
        }
      }
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

NetworkConfig NetworkConfig::desk() { return NetworkConfig{}; }

NetworkConfig NetworkConfig::full() {
  NetworkConfig c;
  c.grid_size = 84;
  c.input_planes = 16;
  c.conv = {{16, 8, 4}, {32, 4, 2}};
  c.trunk_width = 256;
  c.merge_width = 128;
  return c;
}

void NetworkConfig::validate() const {
  if (action_count != kActionCount) throw ConfigError("network.action_count must be 3");
  if (grid_size <= 0 || input_planes <= 0 || trunk_width <= 0 || merge_width <= 0)
    throw ConfigError("network dimensions must be positive");
  int size = grid_size;
  for (const auto& c : conv) {
    if (c.filters <= 0 || c.kernel <= 0 || c.stride <= 0) throw ConfigError("network.conv entries must be positive");
    if (c.kernel > size) throw ConfigError("network.conv kernel larger than its input");
    size = (size - c.kernel) / c.stride + 1;
  }
}

json to_json(const NetworkConfig& cfg) {
  json conv = json::array();
  for (const auto& c : cfg.conv) conv.push_back({{"filters", c.filters}, {"kernel", c.kernel}, {"stride", c.stride}});
  return {{"grid_size", cfg.grid_size},     {"input_planes", cfg.input_planes}, {"conv", conv},
          {"trunk_width", cfg.trunk_width}, {"merge_width", cfg.merge_width},   {"action_count", cfg.action_count},
          {"seed", cfg.seed}};
}

NetworkConfig network_config_from_json(const json& j) {
  NetworkConfig c;
  try {
    c.grid_size = j.value("grid_size", c.grid_size);
    c.input_planes = j.value("input_planes", c.input_planes);
    if (j.contains("conv")) {
      c.conv.clear();
      for (const auto& e : j.at("conv"))
        c.conv.push_back({e.at("filters").get<int>(), e.at("kernel").get<int>(), e.at("stride").get<int>()});
    }
    c.trunk_width = j.value("trunk_width", c.trunk_width);
    c.merge_width = j.value("merge_width", c.merge_width);
    c.action_count = j.value("action_count", c.action_count);
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw ParseError(std::string("network: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Network

PolicyNetwork::PolicyNetwork(NetworkConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::size_t off = 0;
  auto block = [&](const std::string& name, std::size_t size, std::size_t fan_in) {
    blocks_.push_back({name, off, size, fan_in});
    const std::size_t at = off;
    off += size;
    return at;
  };
  int c = cfg_.input_planes, h = cfg_.grid_size, w = cfg_.grid_size;
  for (std::size_t l = 0; l < cfg_.conv.size(); ++l) {
    const auto& spec = cfg_.conv[l];
    ConvShape s{c, h, w, spec.filters, (h - spec.kernel) / spec.stride + 1, (w - spec.kernel) / spec.stride + 1,
                spec.kernel, spec.stride, 0, 0};
    const std::size_t fan_in = static_cast<std::size_t>(c) * spec.kernel * spec.kernel;
    s.w_off = block("conv" + std::to_string(l) + ".weight", static_cast<std::size_t>(spec.filters) * fan_in, fan_in);
    s.b_off = block("conv" + std::to_string(l) + ".bias", static_cast<std::size_t>(spec.filters), 0);
    conv_.push_back(s);
    c = s.out_c;
    h = s.out_h;
    w = s.out_w;
  }
  flat_ = static_cast<std::size_t>(c) * h * w;
  const auto tw = static_cast<std::size_t>(cfg_.trunk_width);
  const auto mw = static_cast<std::size_t>(cfg_.merge_width);
  const auto na = static_cast<std::size_t>(cfg_.action_count);
  trunk_w_ = block("trunk.weight", tw * flat_, flat_);
  trunk_b_ = block("trunk.bias", tw, 0);
  merge_w_ = block("merge.weight", mw * (tw + kNonVisualSize), tw + kNonVisualSize);
  merge_b_ = block("merge.bias", mw, 0);
  pi_w_ = block("policy.weight", na * mw, mw);
  pi_b_ = block("policy.bias", na, 0);
  v_w_ = block("value.weight", mw, mw);
  v_b_ = block("value.bias", 1, 0);
  param_count_ = off;
}

std::size_t PolicyNetwork::visual_size() const {
  return static_cast<std::size_t>(cfg_.input_planes) * cfg_.grid_size * cfg_.grid_size;
}

PolicyParams PolicyNetwork::initial_params() const {
  PolicyParams p;
  p.values.assign(param_count_, 0.0f);
  p.shapes = blocks_;
  Rng rng(cfg_.seed);
  for (const auto& b : blocks_) {
    if (b.fan_in == 0) continue;  // biases start at zero
    double bound = 1.0 / std::sqrt(static_cast<double>(b.fan_in));
    if (b.name == "policy.weight") bound *= kPolicyHeadGain;
    for (std::size_t i = 0; i < b.size; ++i) p.values[b.offset + i] = static_cast<float>(uniform(rng, -bound, bound));
  }
  return p;
}

PolicyOutput PolicyNetwork::forward(std::span<const double> w, const NetInput& in, ForwardCache* cache) const {
  require(w.size() == param_count_, "forward: parameter count mismatch");
  require(in.visual.size() == visual_size(), "forward: visual input size mismatch");
  ForwardCache local;
  ForwardCache& c = cache ? *cache : local;
  c.conv.resize(conv_.size());
  c.patches.resize(conv_.size());

  const std::vector<double>* x = &in.visual;
  for (std::size_t l = 0; l < conv_.size(); ++l) {
    const ConvShape& s = conv_[l];
    auto& out = c.conv[l];
    out.assign(static_cast<std::size_t>(s.out_c) * s.out_h * s.out_w, 0.0);
    auto& cols = c.patches[l];
    im2col(s, x->data(), cols);
    const auto k_rows = static_cast<Eigen::Index>(s.in_c) * s.k * s.k;
    const auto n_pos = static_cast<Eigen::Index>(s.out_h) * s.out_w;
    RowMap o(out.data(), s.out_c, n_pos);
    o.noalias() = ConstRowMap(w.data() + s.w_off, s.out_c, k_rows) *
                  Eigen::Map<const Eigen::MatrixXd>(cols.data(), k_rows, n_pos);
    o.colwise() += ConstVecMap(w.data() + s.b_off, s.out_c);
    o = o.cwiseMax(0.0);
    x = &out;
  }

  dense(w, trunk_w_, trunk_b_, *x, c.trunk, static_cast<std::size_t>(cfg_.trunk_width));
  for (auto& v : c.trunk) v = relu(v);
  c.merge_in = c.trunk;
  c.merge_in.insert(c.merge_in.end(), in.nonvisual.begin(), in.nonvisual.end());
  dense(w, merge_w_, merge_b_, c.merge_in, c.merge, static_cast<std::size_t>(cfg_.merge_width));
  for (auto& v : c.merge) v = relu(v);

  std::vector<double> logits;
  dense(w, pi_w_, pi_b_, c.merge, logits, kActionCount);
  std::vector<double> value;
  dense(w, v_w_, v_b_, c.merge, value, 1);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double l : logits) z += std::exp(l - mx);
  const double log_z = mx + std::log(z);
  PolicyOutput out;
  for (std::size_t a = 0; a < kActionCount; ++a) {
    c.logits[a] = logits[a];
    c.log_probs[a] = logits[a] - log_z;
    c.probs[a] = std::exp(c.log_probs[a]);
    out.probs[a] = c.probs[a];
  }
  c.value = value[0];
  out.value = value[0];
  return out;
}

void PolicyNetwork::backward(std::span<const double> w, const NetInput& in, const ForwardCache& c,
                             const std::array<double, kActionCount>& d_logits, double d_value,
                             std::span<double> grad) const {
  require(grad.size() == param_count_ && w.size() == param_count_, "backward: parameter count mismatch");
  const std::size_t mw = c.merge.size();
  const std::size_t tw = c.trunk.size();
  const std::size_t min = c.merge_in.size();

  // Heads.
  std::vector<double> d_merge(mw, 0.0);
  for (std::size_t a = 0; a < kActionCount; ++a) {
    grad[pi_b_ + a] += d_logits[a];
    for (std::size_t j = 0; j < mw; ++j) {
      grad[pi_w_ + a * mw + j] += d_logits[a] * c.merge[j];
      d_merge[j] += w[pi_w_ + a * mw + j] * d_logits[a];
    }
  }
  grad[v_b_] += d_value;
  for (std::size_t j = 0; j < mw; ++j) {
    grad[v_w_ + j] += d_value * c.merge[j];
    d_merge[j] += w[v_w_ + j] * d_value;
  }

  // Merge layer.
  std::vector<double> d_trunk(tw, 0.0);
  for (std::size_t j = 0; j < mw; ++j) {
    if (c.merge[j] <= 0.0) continue;
    const double g = d_merge[j];
    grad[merge_b_ + j] += g;
    double* gw = grad.data() + merge_w_ + j * min;
    const double* wr = w.data() + merge_w_ + j * min;
    for (std::size_t i = 0; i < min; ++i) gw[i] += g * c.merge_in[i];
    for (std::size_t i = 0; i < tw; ++i) d_trunk[i] += wr[i] * g;
  }

  // Trunk layer.
  const std::vector<double>& flat = conv_.empty() ? in.visual : c.conv.back();
  std::vector<double> d_flat(conv_.empty() ? 0 : flat_, 0.0);
  for (std::size_t j = 0; j < tw; ++j) {
    if (c.trunk[j] <= 0.0) continue;
    const double g = d_trunk[j];
    grad[trunk_b_ + j] += g;
    double* gw = grad.data() + trunk_w_ + j * flat_;
    const double* wr = w.data() + trunk_w_ + j * flat_;
    for (std::size_t i = 0; i < flat_; ++i) gw[i] += g * flat[i];
    if (!d_flat.empty())
      for (std::size_t i = 0; i < flat_; ++i) d_flat[i] += wr[i] * g;
  }

  // Convolutions, last to first.
  std::vector<double> d_out = std::move(d_flat);
  for (std::size_t li = conv_.size(); li-- > 0;) {
    const ConvShape& s = conv_[li];
    const std::vector<double>& out = c.conv[li];
    const std::vector<double>& src = li == 0 ? in.visual : c.conv[li - 1];
    std::vector<double> d_in(li == 0 ? 0 : src.size(), 0.0);
    const auto k_rows = static_cast<Eigen::Index>(s.in_c) * s.k * s.k;
    const auto n_pos = static_cast<Eigen::Index>(s.out_h) * s.out_w;
    RowMatrix g = RowMap(d_out.data(), s.out_c, n_pos);
    g = (ConstRowMap(out.data(), s.out_c, n_pos).array() > 0.0).select(g, 0.0);
    const Eigen::Map<const Eigen::MatrixXd> cols(c.patches[li].data(), k_rows, n_pos);
    RowMap(grad.data() + s.w_off, s.out_c, k_rows).noalias() += g * cols.transpose();
    VecMap(grad.data() + s.b_off, s.out_c) += g.rowwise().sum();
    if (!d_in.empty()) {
      const Eigen::MatrixXd d_cols = ConstRowMap(w.data() + s.w_off, s.out_c, k_rows).transpose() * g;
      const double* dc = d_cols.data();
      for (int oy = 0; oy < s.out_h; ++oy)
        for (int ox = 0; ox < s.out_w; ++ox)
          for (int ch = 0; ch < s.in_c; ++ch) {
            double* plane = d_in.data() + static_cast<std::size_t>(ch) * s.in_h * s.in_w;
            for (int ky = 0; ky < s.k; ++ky) {
              double* row = plane + static_cast<std::size_t>(oy * s.s + ky) * s.in_w + ox * s.s;
              for (int kx = 0; kx < s.k; ++kx) row[kx] += *dc++;
            }
          }
    }
    d_out = std::move(d_in);
  }
}

std::vector<bool> PolicyNetwork::activation_pattern(std::span<const double> w, const NetInput& in) const {
  // Recompute pre-activations: a post-ReLU zero means the unit was inactive.
  ForwardCache c;
  forward(w, in, &c);
  std::vector<bool> pattern;
  for (const auto& layer : c.conv)
    for (double v : layer) pattern.push_back(v > 0.0);
  for (double v : c.trunk) pattern.push_back(v > 0.0);
  for (double v : c.merge) pattern.push_back(v > 0.0);
  return pattern;
}

std::vector<double> to_double(const PolicyParams& p) { return {p.values.begin(), p.values.end()}; }

NetInput to_input(const ObservationBundle& obs) {
  NetInput in;
  std::size_t total = 0;
  for (const auto& f : obs.frames) total += f.cells.size();
  in.visual.reserve(total);
  for (const auto& f : obs.frames)
    for (auto v : f.cells) in.visual.push_back(static_cast<double>(v));
  in.nonvisual = nonvisual_features(obs.nonvisual);
  return in;
}

// ---------------------------------------------------------------------------
// Actions

ManeuverState sample_action(const std::array<double, kActionCount>& probs, Rng& rng) {
  const double u = uniform(rng, 0.0, 1.0);
  double cum = 0.0;
  for (int a = 0; a < kActionCount; ++a) {
    cum += probs[static_cast<std::size_t>(a)];
    if (u < cum) return maneuver_from_index(a);
  }
  // Rounding left u above the cumulative sum: take the last action with mass.
  for (int a = kActionCount - 1; a >= 0; --a)
    if (probs[static_cast<std::size_t>(a)] > 0.0) return maneuver_from_index(a);
  return ManeuverState::NotPermitted;
}

ManeuverState argmax_action(const std::array<double, kActionCount>& probs) {
  const double best = *std::max_element(probs.begin(), probs.end());
  if (probs[static_cast<std::size_t>(index_of(ManeuverState::NotPermitted))] == best)
    return ManeuverState::NotPermitted;
  for (int a = 0; a < kActionCount; ++a)
    if (probs[static_cast<std::size_t>(a)] == best) return maneuver_from_index(a);
  return ManeuverState::NotPermitted;
}

// ---------------------------------------------------------------------------
// Losses and gradients

std::vector<double> discounted_returns(std::span<const double> rewards, double discount, double bootstrap) {
  std::vector<double> out(rewards.size());
  double running = bootstrap;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    running = rewards[t] + discount * running;
    out[t] = running;
  }
  return out;
}

namespace {

double entropy_of(const ForwardCache& c) {
  double h = 0.0;
  for (std::size_t a = 0; a < kActionCount; ++a) h -= c.probs[a] * c.log_probs[a];
  return h;
}

}  // namespace

LossTerms trajectory_loss(const PolicyNetwork& net, std::span<const double> w, std::span<const Transition> traj,
                          std::span<const double> returns, std::span<const double> advantages,
                          double entropy_coef) {
  require(returns.size() == traj.size() && advantages.size() == traj.size(), "trajectory_loss: size mismatch");
  LossTerms terms;
  ForwardCache c;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    net.forward(w, traj[t].input, &c);
    const auto a = static_cast<std::size_t>(index_of(traj[t].action));
    terms.policy += -c.log_probs[a] * advantages[t];
    terms.value += 0.5 * (returns[t] - c.value) * (returns[t] - c.value);
    terms.entropy += entropy_of(c);
  }
  terms.total = terms.policy + terms.value - entropy_coef * terms.entropy;
  return terms;
}

GradientBuffer episode_gradients(const PolicyNetwork& net, std::span<const double> w,
                                 std::span<const Transition> traj, double discount, double entropy_coef,
                                 double bootstrap, LossTerms* terms) {
  require(!traj.empty(), "episode_gradients: empty trajectory");
  std::vector<double> rewards(traj.size());
  for (std::size_t t = 0; t < traj.size(); ++t) rewards[t] = traj[t].reward;
  const auto returns = discounted_returns(rewards, discount, bootstrap);

  GradientBuffer g;
  g.values.assign(net.param_count(), 0.0);
  g.step_count = static_cast<long>(traj.size());
  LossTerms sum;
  ForwardCache c;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    net.forward(w, traj[t].input, &c);
    const double adv = returns[t] - c.value;
    const double h = entropy_of(c);
    const auto act = static_cast<std::size_t>(index_of(traj[t].action));
    std::array<double, kActionCount> d_logits{};
    for (std::size_t j = 0; j < kActionCount; ++j) {
      const double indicator = j == act ? 1.0 : 0.0;
      d_logits[j] = -adv * (indicator - c.probs[j]) + entropy_coef * c.probs[j] * (c.log_probs[j] + h);
    }
    net.backward(w, traj[t].input, c, d_logits, c.value - returns[t], g.values);
    sum.policy += -c.log_probs[act] * adv;
    sum.value += 0.5 * adv * adv;
    sum.entropy += h;
  }
  sum.total = sum.policy + sum.value - entropy_coef * sum.entropy;
  if (terms) *terms = sum;
  return g;
}

GradCheckResult finite_diff_check(const PolicyNetwork& net, std::span<const double> w,
                                  std::span<const Transition> traj, double discount, double entropy_coef,
                                  int coordinates, std::uint64_t seed) {
  constexpr double kStep = 1e-5;
  std::vector<double> rewards(traj.size());
  for (std::size_t t = 0; t < traj.size(); ++t) rewards[t] = traj[t].reward;
  const auto returns = discounted_returns(rewards, discount);
  std::vector<double> adv(traj.size());
  std::vector<std::vector<bool>> base_pattern;
  for (std::size_t t = 0; t < traj.size(); ++t) {
    adv[t] = returns[t] - net.forward(w, traj[t].input).value;
    base_pattern.push_back(net.activation_pattern(w, traj[t].input));
  }
  const GradientBuffer analytic = episode_gradients(net, w, traj, discount, entropy_coef);

  auto same_pattern = [&](std::span<const double> probe) {
    for (std::size_t t = 0; t < traj.size(); ++t)
      if (net.activation_pattern(probe, traj[t].input) != base_pattern[t]) return false;
    return true;
  };

  GradCheckResult result;
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, net.param_count() - 1);
  std::vector<double> probe(w.begin(), w.end());
  int attempts = 0;
  while (result.checked < coordinates && attempts < coordinates * 20) {
    ++attempts;
    const std::size_t i = pick(rng);
    probe[i] = w[i] + kStep;
    const bool plus_ok = same_pattern(probe);
    const double lp = trajectory_loss(net, probe, traj, returns, adv, entropy_coef).total;
    probe[i] = w[i] - kStep;
    const bool minus_ok = same_pattern(probe);
    const double lm = trajectory_loss(net, probe, traj, returns, adv, entropy_coef).total;
    probe[i] = w[i];
    if (!plus_ok || !minus_ok) {
      ++result.skipped_kinks;
      continue;
    }
    const double numeric = (lp - lm) / (2 * kStep);
    const double a = analytic.values[i];
    const double rel = std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), 1e-7);
    result.max_rel_error = std::max(result.max_rel_error, rel);
    ++result.checked;
  }
  return result;
}

PolicyParams apply_update(const PolicyParams& params, const GradientBuffer& grads, double lr) {
  require(grads.values.size() == params.values.size(), "apply_update: dimension mismatch");
  PolicyParams out = params;
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = static_cast<float>(static_cast<double>(out.values[i]) - lr * grads.values[i]);
  return out;
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Sgd ? "sgd" : "adam"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "sgd") return OptimizerKind::Sgd;
  if (s == "adam") return OptimizerKind::Adam;
  throw ConfigError("optimizer: unknown kind '" + s + "'");
}

Optimizer::Optimizer(OptimizerKind kind, double lr, double grad_clip) : kind_(kind), lr_(lr), grad_clip_(grad_clip) {
  if (!(lr >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (!(grad_clip >= 0.0)) throw ConfigError("grad_clip must be non-negative");
}

void Optimizer::apply(std::vector<float>& params, const GradientBuffer& grads) {
  require(grads.values.size() == params.size(), "Optimizer::apply: dimension mismatch");
  double scale = 1.0;
  if (grad_clip_ > 0.0) {
    double sq = 0.0;
    for (double g : grads.values) sq += g * g;
    const double norm = std::sqrt(sq);
    if (norm > grad_clip_) scale = grad_clip_ / norm;
  }
  if (kind_ == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < params.size(); ++i)
      params[i] = static_cast<float>(static_cast<double>(params[i]) - lr_ * scale * grads.values[i]);
    return;
  }
  if (m_.empty()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = scale * grads.values[i];
    m_[i] = beta1_ * m_[i] + (1 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1 - beta2_) * g * g;
    const double step = lr_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    params[i] = static_cast<float>(static_cast<double>(params[i]) - step);
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw ConfigError("cannot write checkpoint " + path.string());
    json header{{"schema_version", kCheckpointSchemaVersion},
                {"network", to_json(ckpt.config)},
                {"version", ckpt.version},
                {"param_count", ckpt.params.values.size()}};
    out << header.dump() << '\n';
    for (float f : ckpt.params.values) {
      const auto bits = std::bit_cast<std::uint32_t>(f);
      const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                             static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
      out.write(bytes, 4);
    }
    if (!out) throw ConfigError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("checkpoint: missing header");
  json header;
  try {
    header = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("checkpoint header: ") + e.what());
  }
  if (header.value("schema_version", -1) != kCheckpointSchemaVersion)
    throw ParseError("checkpoint: unsupported schema_version");
  Checkpoint ckpt;
  ckpt.config = network_config_from_json(header.at("network"));
  ckpt.version = header.at("version").get<long>();
  const PolicyNetwork net(ckpt.config);
  const auto count = header.at("param_count").get<std::size_t>();
  if (count != net.param_count()) throw ParseError("checkpoint: param_count does not match the network");
  ckpt.params.shapes = net.blocks();
  ckpt.params.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (in.gcount() != 4) throw ParseError("checkpoint: truncated parameter data");
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    ckpt.params.values[i] = std::bit_cast<float>(bits);
  }
  return ckpt;
}

}  // namespace rrl
