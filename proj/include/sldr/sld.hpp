#pragma once

// Simulated locomotion demonstrations: the inverse-dynamics model, the
// advantage-style SLD reward and the multi-critic manipulation policy update.

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "sldr/ddpg.hpp"
#include "sldr/errors.hpp"
#include "sldr/normalizer.hpp"
#include "sldr/numerics.hpp"

namespace sldr {

// Restricts a normalizer to the coordinates [begin, begin + size).
inline RunningNormalizer normalizer_slice(const RunningNormalizer& n, int begin,
                                          int size) {
  RunningNormalizer out;
  out.count = n.count;
  out.sum = n.sum.segment(begin, size);
  out.sum_sq = n.sum_sq.segment(begin, size);
  out.clip_range = n.clip_range;
  out.eps = n.eps;
  return out;
}

// Maps (s_obj, s_obj') to the object action connecting them. The network
// output is tanh, read as a fraction of the object action bound.
struct InverseDynamicsModel {
  MlpParams net;
  AdamState opt;
  ActionBounds bounds;

  int obj_obs_dim() const { return net.input_dim() / 2; }
};

inline InverseDynamicsModel make_inverse_dynamics(int obj_obs_dim,
                                                  ActionBounds bounds, int hidden,
                                                  AdamHyper hyper, Rng& rng) {
  InverseDynamicsModel m;
  m.net = init_mlp(2 * obj_obs_dim, hidden, static_cast<int>(bounds.low.size()),
                   Activation::kTanh, rng);
  m.opt = make_adam(m.net, hyper);
  m.bounds = std::move(bounds);
  return m;
}

// Network input: both object states normalized with the same statistics.
inline Matrix inverse_dynamics_input(const RunningNormalizer& obs_norm,
                                     const Matrix& s_obj, const Matrix& s_obj_next) {
  return stack_rows(normalize_batch(obs_norm, s_obj),
                    normalize_batch(obs_norm, s_obj_next));
}

// Predicted object actions in unit (bound-relative) coordinates.
inline Matrix inverse_dynamics_predict_unit(const InverseDynamicsModel& m,
                                            const RunningNormalizer& obs_norm,
                                            const Matrix& s_obj,
                                            const Matrix& s_obj_next) {
  return mlp_eval_batch(m.net, inverse_dynamics_input(obs_norm, s_obj, s_obj_next));
}

inline Vector inverse_dynamics_predict(const InverseDynamicsModel& m,
                                       const RunningNormalizer& obs_norm,
                                       const Vector& s_obj, const Vector& s_obj_next) {
  return m.bounds
      .from_unit(inverse_dynamics_predict_unit(m, obs_norm, Matrix(s_obj),
                                               Matrix(s_obj_next)))
      .col(0);
}

// Mean over the batch of ||I(s, s') - a||^2, with actions in unit coordinates.
inline double inverse_dynamics_loss(const InverseDynamicsModel& m,
                                    const RunningNormalizer& obs_norm,
                                    const Matrix& s_obj, const Matrix& actions,
                                    const Matrix& s_obj_next) {
  const Matrix pred = inverse_dynamics_predict_unit(m, obs_norm, s_obj, s_obj_next);
  return (pred - m.bounds.to_unit(actions)).colwise().squaredNorm().mean();
}

inline RegressionGradient inverse_dynamics_gradient(const InverseDynamicsModel& m,
                                                    const RunningNormalizer& obs_norm,
                                                    const Matrix& s_obj, const Matrix& actions,
                                                    const Matrix& s_obj_next) {
  if (s_obj.cols() != actions.cols() || s_obj.cols() != s_obj_next.cols() ||
      s_obj.cols() == 0)
    throw ShapeError("inverse_dynamics_update: batch columns disagree");
  const ForwardCache cache =
      mlp_forward_batch(m.net, inverse_dynamics_input(obs_norm, s_obj, s_obj_next));
  const Matrix residual = cache.output() - m.bounds.to_unit(actions);
  const double n = static_cast<double>(s_obj.cols());
  RegressionGradient out;
  out.loss = residual.colwise().squaredNorm().sum() / n;
  if (!std::isfinite(out.loss))
    throw NumericError("inverse_dynamics_update: non-finite loss");
  out.grad = mlp_backward_batch(m.net, cache, (2.0 / n) * residual);
  return out;
}

// One Adam step on the inverse-dynamics regression loss; returns the loss
// before the step. Columns of s_obj / actions / s_obj_next are samples.
inline double inverse_dynamics_update(InverseDynamicsModel& m,
                                      const RunningNormalizer& obs_norm,
                                      const Matrix& s_obj, const Matrix& actions,
                                      const Matrix& s_obj_next) {
  const RegressionGradient g = inverse_dynamics_gradient(m, obs_norm, s_obj, actions, s_obj_next);
  adam_apply(m.net, g.grad, m.opt);
  return g.loss;
}

// Frozen locomotion artifacts. The locomotion networks read
// normalized [s_obj ; g_obj]; g_obj is the target block at the tail of s_obj.
struct SldOracle {
  MlpParams mu_obj;
  MlpParams q_obj;
  InverseDynamicsModel inv;
  RunningNormalizer normalizer;  // over [s_obj ; g_obj]
  int obj_obs_dim = 0;
  int obj_goal_dim = 0;

  RunningNormalizer obs_normalizer() const {
    return normalizer_slice(normalizer, 0, obj_obs_dim);
  }

  friend bool operator==(const SldOracle& a, const SldOracle& b) {
    return a.mu_obj == b.mu_obj && a.q_obj == b.q_obj && a.inv.net == b.inv.net &&
           a.normalizer == b.normalizer && a.obj_obs_dim == b.obj_obs_dim &&
           a.obj_goal_dim == b.obj_goal_dim;
  }
};

// Locomotion network input for object-state columns.
inline Matrix oracle_input(const SldOracle& o, const Matrix& s_obj) {
  if (s_obj.rows() != o.obj_obs_dim)
    throw ShapeError("sld reward: object state has " + std::to_string(s_obj.rows()) +
                     " entries, oracle expects " + std::to_string(o.obj_obs_dim));
  return normalize_batch(
      o.normalizer, stack_rows(s_obj, s_obj.bottomRows(o.obj_goal_dim)));
}

// Unclipped advantage Q(s, I(s, s')) - Q(s, mu(s)) per column.
inline Vector sld_advantage_batch(const SldOracle& o, const Matrix& s_obj,
                                  const Matrix& s_obj_next) {
  if (s_obj_next.rows() != s_obj.rows() || s_obj_next.cols() != s_obj.cols())
    throw ShapeError("sld reward: state pair shapes differ");
  const Matrix x = oracle_input(o, s_obj);
  const Matrix induced =
      inverse_dynamics_predict_unit(o.inv, o.obs_normalizer(), s_obj, s_obj_next);
  const Matrix demonstrated = mlp_eval_batch(o.mu_obj, x);
  const Matrix q_induced = mlp_eval_batch(o.q_obj, stack_rows(x, induced));
  const Matrix q_demo = mlp_eval_batch(o.q_obj, stack_rows(x, demonstrated));
  return (q_induced - q_demo).row(0).transpose();
}

inline Vector compute_sld_reward_batch(const SldOracle& o, const Matrix& s_obj,
                                       const Matrix& s_obj_next) {
  return sld_advantage_batch(o, s_obj, s_obj_next).cwiseMax(-1.0).cwiseMin(0.0);
}

inline double compute_sld_reward(const SldOracle& o, const Vector& s_obj,
                                 const Vector& s_obj_next) {
  return compute_sld_reward_batch(o, Matrix(s_obj), Matrix(s_obj_next))(0);
}

// Ablation: -||I(s, s') - mu_obj(s)||^2 in object-action units.
inline double naive_sld_reward(const SldOracle& o, const Vector& s_obj,
                               const Vector& s_obj_next) {
  const Matrix x = oracle_input(o, Matrix(s_obj));
  const Vector induced = inverse_dynamics_predict(o.inv, o.obs_normalizer(),
                                                  s_obj, s_obj_next);
  const Vector demo = o.inv.bounds.from_unit(mlp_eval_batch(o.mu_obj, x)).col(0);
  return -(induced - demo).squaredNorm();
}

// Ascent step on mean[Q_r(s, mu(s)) + sum_i Q_qi(s, mu(s))]; only the actor
// changes.
inline void multi_critic_actor_update(DdpgAgent& agent,
                                      std::span<const MlpParams> sld_critics,
                                      const TrainingBatch& batch) {
  std::vector<const MlpParams*> critics{&agent.critic};
  for (const MlpParams& c : sld_critics) {
    if (c.input_dim() != agent.critic.input_dim())
      throw ShapeError("multi_critic_actor_update: critic input dimensions differ");
    critics.push_back(&c);
  }
  adam_apply(agent.actor, actor_gradient(agent.actor, critics, batch.inputs),
             agent.actor_opt);
}

}  // namespace sldr
