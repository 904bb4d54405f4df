#pragma once

// Deterministic actor-critic: exploration, Bellman critic regression,
// deterministic policy gradient and target-network averaging.
//
// The actor emits tanh values in (-1, 1); actions are mid + half * tanh.
// Critics take [normalized state-goal input ; action rescaled to [-1, 1]].

#include <cmath>
#include <span>
#include <vector>

#include "sldr/errors.hpp"
#include "sldr/numerics.hpp"
#include "sldr/rng.hpp"

namespace sldr {

struct ActionBounds {
  Vector low;
  Vector high;

  Vector mid() const { return 0.5 * (low + high); }
  Vector half() const { return 0.5 * (high - low); }

  // Maps actions in bounds to [-1, 1] per component (columns of `a`).
  Matrix to_unit(const Matrix& a) const {
    return ((a.colwise() - mid()).array().colwise() / half().array()).matrix();
  }
  Matrix from_unit(const Matrix& u) const {
    return ((u.array().colwise() * half().array()).colwise() + mid().array())
        .matrix();
  }
  Vector clip(const Vector& a) const { return a.cwiseMax(low).cwiseMin(high); }
};

struct DdpgConfig {
  double gamma = 0.98;
  double tau = 0.05;
  double noise_std = 0.2;
  double random_action_prob = 0.3;
  bool clip_targets = true;
  int hidden = 64;
  AdamHyper actor_opt{};
  AdamHyper critic_opt{};
};

struct DdpgAgent {
  MlpParams actor;
  MlpParams critic;
  MlpParams actor_target;
  MlpParams critic_target;
  AdamState actor_opt;
  AdamState critic_opt;
  double gamma = 0.98;
  double tau = 0.05;
  double noise_std = 0.2;
  double random_action_prob = 0.3;
  bool clip_targets = true;
  ActionBounds bounds;

  int input_dim() const { return actor.input_dim(); }
  int action_dim() const { return actor.output_dim(); }
};

inline DdpgAgent make_ddpg_agent(int input_dim, ActionBounds bounds,
                                 const DdpgConfig& cfg, Rng& rng) {
  const int action_dim = static_cast<int>(bounds.low.size());
  if (bounds.high.size() != action_dim)
    throw ShapeError("make_ddpg_agent: action bounds differ in length");
  for (int i = 0; i < action_dim; ++i)
    if (!(bounds.low(i) < bounds.high(i)))
      throw ArgumentError("make_ddpg_agent: action bounds must be ordered");
  DdpgAgent a;
  a.actor = init_mlp(input_dim, cfg.hidden, action_dim, Activation::kTanh, rng);
  a.critic = init_mlp(input_dim + action_dim, cfg.hidden, 1,
                      Activation::kIdentity, rng);
  a.actor_target = a.actor;
  a.critic_target = a.critic;
  a.actor_opt = make_adam(a.actor, cfg.actor_opt);
  a.critic_opt = make_adam(a.critic, cfg.critic_opt);
  a.gamma = cfg.gamma;
  a.tau = cfg.tau;
  a.noise_std = cfg.noise_std;
  a.random_action_prob = cfg.random_action_prob;
  a.clip_targets = cfg.clip_targets;
  a.bounds = std::move(bounds);
  return a;
}

// A behavior or evaluation action for one normalized input.
inline Vector select_action(const DdpgAgent& agent, const Vector& normalized_input,
                            bool explore, Rng& rng) {
  const Vector unit = mlp_forward(agent.actor, normalized_input);
  Vector a = agent.bounds.from_unit(unit).col(0);
  if (!explore) return agent.bounds.clip(a);
  const Vector half = agent.bounds.half();
  if (rng.uniform() < agent.random_action_prob) {
    for (Eigen::Index i = 0; i < a.size(); ++i)
      a(i) = rng.uniform(agent.bounds.low(i), agent.bounds.high(i));
    return a;
  }
  for (Eigen::Index i = 0; i < a.size(); ++i)
    a(i) += rng.normal(0.0, agent.noise_std * half(i));
  return agent.bounds.clip(a);
}

inline Matrix stack_rows(const Matrix& top, const Matrix& bottom) {
  Matrix out(top.rows() + bottom.rows(), top.cols());
  out << top, bottom;
  return out;
}

inline double target_floor(double gamma) { return -1.0 / (1.0 - gamma); }

// y = reward + gamma * Q'(s', mu'(s')), optionally clipped to
// [-1/(1-gamma), 0]. Inputs are normalized next-state columns.
inline Vector bellman_targets(const MlpParams& critic_target,
                              const MlpParams& actor_target, double gamma,
                              bool clip, const Matrix& next_inputs,
                              const Vector& rewards) {
  if (next_inputs.cols() == 0) throw ArgumentError("critic_targets: empty batch");
  if (rewards.size() != next_inputs.cols())
    throw ShapeError("critic_targets: reward count does not match batch");
  const Matrix next_actions = mlp_eval_batch(actor_target, next_inputs);
  const Matrix q_next =
      mlp_eval_batch(critic_target, stack_rows(next_inputs, next_actions));
  Vector y = rewards + gamma * q_next.row(0).transpose();
  if (clip) y = y.cwiseMax(target_floor(gamma)).cwiseMin(0.0);
  return y;
}

// Columns of one training minibatch, already normalized.
struct TrainingBatch {
  Matrix inputs;       // normalized [s ; g]
  Matrix next_inputs;  // normalized [s' ; g]
  Matrix actions;      // actions rescaled to [-1, 1]
  Vector rewards;      // environmental reward r
  Matrix sld;          // one row per SLD stream (q_i)

  int size() const { return static_cast<int>(inputs.cols()); }
};

enum class RewardField { kEnvironment, kSld };

inline Vector critic_targets(const DdpgAgent& agent, const TrainingBatch& batch,
                             RewardField field, const MlpParams* critic_target = nullptr,
                             int sld_row = 0) {
  const Vector rewards = field == RewardField::kEnvironment
                             ? batch.rewards
                             : Vector(batch.sld.row(sld_row).transpose());
  return bellman_targets(critic_target ? *critic_target : agent.critic_target,
                         agent.actor_target, agent.gamma, agent.clip_targets,
                         batch.next_inputs, rewards);
}

// A regression loss and its gradient with respect to the network parameters.
struct RegressionGradient {
  double loss = 0.0;
  GradientBundle grad;
};

// mean (Q(s,a) - y)^2 over the batch columns.
inline RegressionGradient critic_gradient(const MlpParams& critic, const Matrix& inputs,
                                          const Matrix& actions, const Vector& targets) {
  if (targets.size() != inputs.cols() || actions.cols() != inputs.cols())
    throw ShapeError("critic_update: batch columns disagree");
  const ForwardCache cache = mlp_forward_batch(critic, stack_rows(inputs, actions));
  const Vector residual = cache.output().row(0).transpose() - targets;
  const double n = static_cast<double>(targets.size());
  RegressionGradient out;
  out.loss = residual.squaredNorm() / n;
  if (!std::isfinite(out.loss)) throw NumericError("critic_update: non-finite loss");
  out.grad = mlp_backward_batch(critic, cache, (2.0 / n) * residual.transpose());
  return out;
}

// One Adam step on mean (Q(s,a) - y)^2. Returns the loss before the step.
inline double regress_critic(MlpParams& critic, AdamState& opt,
                             const Matrix& inputs, const Matrix& actions,
                             const Vector& targets) {
  const RegressionGradient g = critic_gradient(critic, inputs, actions, targets);
  adam_apply(critic, g.grad, opt);
  return g.loss;
}

inline double critic_update(DdpgAgent& agent, const TrainingBatch& batch,
                            const Vector& targets) {
  return regress_critic(agent.critic, agent.critic_opt, batch.inputs,
                        batch.actions, targets);
}

// Gradient of -mean(sum_k Q_k(s, mu(s))) with respect to the actor parameters.
inline GradientBundle actor_gradient(const MlpParams& actor,
                                     std::span<const MlpParams* const> critics,
                                     const Matrix& inputs) {
  if (critics.empty()) throw ArgumentError("actor_update: no critic given");
  const ForwardCache actor_cache = mlp_forward_batch(actor, inputs);
  const Matrix critic_in = stack_rows(inputs, actor_cache.output());
  const double n = static_cast<double>(inputs.cols());
  const Matrix upstream = Matrix::Constant(1, inputs.cols(), -1.0 / n);
  const Eigen::Index adim = actor.output_dim();
  Matrix action_grad = Matrix::Zero(adim, inputs.cols());
  for (const MlpParams* critic : critics) {
    if (critic->input_dim() != critic_in.rows())
      throw ShapeError("actor_update: critic input dimension mismatch");
    const ForwardCache cc = mlp_forward_batch(*critic, critic_in);
    const GradientBundle g = mlp_backward_batch(*critic, cc, upstream);
    action_grad += g.input_grad.bottomRows(adim);
  }
  return mlp_backward_batch(actor, actor_cache, action_grad);
}

inline void actor_update(DdpgAgent& agent, const TrainingBatch& batch) {
  const MlpParams* critics[] = {&agent.critic};
  adam_apply(agent.actor, actor_gradient(agent.actor, critics, batch.inputs),
             agent.actor_opt);
}

inline void update_targets(DdpgAgent& agent) {
  soft_update_inplace(agent.actor_target, agent.actor, agent.tau);
  soft_update_inplace(agent.critic_target, agent.critic, agent.tau);
}

}  // namespace sldr
