#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "sldr/ddpg.hpp"

using namespace sldr;
using sldr::testing::finite_difference;
using sldr::testing::flatten;
using sldr::testing::ks_uniform;
using sldr::testing::max_relative_error;

namespace {

ActionBounds symmetric_bounds(int n, double h) {
  return {Vector::Constant(n, -h), Vector::Constant(n, h)};
}

DdpgAgent small_agent(int input_dim, int action_dim, std::uint64_t seed, int hidden = 16) {
  Rng rng(seed);
  DdpgConfig cfg;
  cfg.hidden = hidden;
  return make_ddpg_agent(input_dim, symmetric_bounds(action_dim, 1.0), cfg, rng);
}

Matrix random_matrix(int rows, int cols, Rng& rng, double scale = 1.0) {
  Matrix m(rows, cols);
  for (int c = 0; c < cols; ++c)
    for (int r = 0; r < rows; ++r) m(r, c) = rng.uniform(-scale, scale);
  return m;
}

TrainingBatch random_batch(const DdpgAgent& a, int n, Rng& rng) {
  TrainingBatch b;
  b.inputs = random_matrix(a.input_dim(), n, rng, 2.0);
  b.next_inputs = random_matrix(a.input_dim(), n, rng, 2.0);
  b.actions = random_matrix(a.action_dim(), n, rng);
  b.rewards = Vector::Constant(n, -1.0);
  return b;
}

// A critic whose output is a constant: zero last-layer weights.
void flatten_critic(MlpParams& c, double value) {
  c.layers.back().weight.setZero();
  c.layers.back().bias.setConstant(value);
}

double mean_q(const MlpParams& actor, const std::vector<const MlpParams*>& critics,
              const Matrix& inputs) {
  const Matrix x = stack_rows(inputs, mlp_eval_batch(actor, inputs));
  double total = 0.0;
  for (const MlpParams* c : critics) total += mlp_eval_batch(*c, x).sum();
  return total / static_cast<double>(inputs.cols());
}

}  // namespace

TEST(SelectAction, GreedyIsDeterministicAndInBounds) {
  DdpgAgent a = small_agent(4, 2, 1);
  Rng rng(2);
  const Vector x = Vector::Constant(4, 0.3);
  const Vector u = select_action(a, x, false, rng);
  EXPECT_EQ(u, select_action(a, x, false, rng));
  EXPECT_TRUE((u.array().abs() <= 1.0).all());
}

TEST(SelectAction, RandomActionsAreUniformOverBounds) {
  Rng init(3);
  DdpgConfig cfg;
  cfg.hidden = 8;
  cfg.random_action_prob = 1.0;
  ActionBounds b{Vector::Constant(2, -0.5), Vector::Constant(2, 1.5)};
  DdpgAgent a = make_ddpg_agent(3, b, cfg, init);
  Rng rng(4);
  std::vector<double> x0, x1;
  for (int i = 0; i < 10000; ++i) {
    const Vector u = select_action(a, Vector::Zero(3), true, rng);
    x0.push_back(u(0));
    x1.push_back(u(1));
  }
  // 1% critical value of the one-sample KS statistic for n = 1e4.
  const double crit = 1.63 / std::sqrt(10000.0);
  EXPECT_LT(ks_uniform(x0, -0.5, 1.5), crit);
  EXPECT_LT(ks_uniform(x1, -0.5, 1.5), crit);
}

TEST(SelectAction, DegenerateNoiseEqualsGreedy) {
  DdpgAgent a = small_agent(4, 3, 5);
  a.noise_std = 0.0;
  a.random_action_prob = 0.0;
  Rng rng(6);
  const Vector x = Vector::Constant(4, -0.8);
  EXPECT_EQ(select_action(a, x, true, rng), select_action(a, x, false, rng));
}

TEST(SelectAction, GaussianNoiseScalesWithBounds) {
  Rng init(7);
  DdpgConfig cfg;
  cfg.hidden = 8;
  cfg.random_action_prob = 0.0;
  cfg.noise_std = 0.01;
  DdpgAgent a = make_ddpg_agent(2, symmetric_bounds(1, 4.0), cfg, init);
  Rng rng(8);
  const double mu = select_action(a, Vector::Zero(2), false, rng)(0);
  double s2 = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double d = select_action(a, Vector::Zero(2), true, rng)(0) - mu;
    s2 += d * d;
  }
  EXPECT_NEAR(std::sqrt(s2 / 20000.0), 0.04, 0.002);
}

TEST(CriticTargets, HandArithmetic) {
  DdpgAgent a = small_agent(3, 1, 9);
  TrainingBatch b;
  b.next_inputs = Matrix::Zero(3, 2);
  b.inputs = b.next_inputs;
  b.actions = Matrix::Zero(1, 2);
  b.rewards = Vector(2);
  b.rewards << -1.0, 0.0;
  flatten_critic(a.critic_target, 0.0);
  Vector y = critic_targets(a, b, RewardField::kEnvironment);
  EXPECT_DOUBLE_EQ(y(0), -1.0);
  flatten_critic(a.critic_target, -0.5);
  y = critic_targets(a, b, RewardField::kEnvironment);
  EXPECT_DOUBLE_EQ(y(1), -0.49);
  flatten_critic(a.critic_target, -50.0);
  y = critic_targets(a, b, RewardField::kEnvironment);
  EXPECT_EQ(y(0), target_floor(0.98));
  EXPECT_NEAR(target_floor(0.98), -50.0, 1e-12);
}

TEST(CriticTargets, UseTargetNetworksAndSldRows) {
  DdpgAgent a = small_agent(3, 2, 10);
  Rng rng(11);
  TrainingBatch b = random_batch(a, 5, rng);
  b.sld = Matrix::Constant(2, 5, -0.25);
  b.sld.row(1).setConstant(-0.75);
  const Vector before = critic_targets(a, b, RewardField::kEnvironment);
  flatten_critic(a.critic, 123.0);  // online critic must not matter
  EXPECT_EQ(critic_targets(a, b, RewardField::kEnvironment), before);
  MlpParams zero = a.critic_target;
  flatten_critic(zero, 0.0);
  EXPECT_EQ(critic_targets(a, b, RewardField::kSld, &zero, 1), Vector::Constant(5, -0.75));
  EXPECT_EQ(critic_targets(a, b, RewardField::kSld, &zero, 0), Vector::Constant(5, -0.25));
}

TEST(CriticTargets, AlwaysWithinReturnBounds) {
  DdpgAgent a = small_agent(3, 2, 12);
  Rng rng(13);
  for (auto& l : a.critic_target.layers) l.weight *= 30.0;
  const TrainingBatch b = random_batch(a, 500, rng);
  const Vector y = critic_targets(a, b, RewardField::kEnvironment);
  EXPECT_LE(y.maxCoeff(), 0.0);
  EXPECT_GE(y.minCoeff(), -50.0);
}

TEST(CriticUpdate, ZeroResidualLeavesParameters) {
  DdpgAgent a = small_agent(3, 2, 14);
  Rng rng(15);
  const TrainingBatch b = random_batch(a, 8, rng);
  const Vector y = mlp_eval_batch(a.critic, stack_rows(b.inputs, b.actions)).row(0).transpose();
  const MlpParams before = a.critic;
  EXPECT_EQ(critic_update(a, b, y), 0.0);
  EXPECT_EQ(a.critic, before);
}

TEST(CriticUpdate, SingleSampleStepMatchesScalarOracle) {
  DdpgAgent a = small_agent(2, 1, 16, 4);
  Rng rng(17);
  const TrainingBatch b = random_batch(a, 1, rng);
  const Vector y = Vector::Constant(1, -3.0);
  const Vector x = stack_rows(b.inputs, b.actions).col(0);
  const double q = sldr::testing::scalar_forward(a.critic, sldr::testing::to_std(x))[0];
  // Gradient of (Q - y)^2 is 2 (Q - y) dQ/dtheta; Adam's first step moves each
  // parameter by -lr * sign(gradient) (up to the epsilon term).
  const auto dq = finite_difference(a.critic, [&](const MlpParams& p) {
    return mlp_forward(p, x)(0);
  });
  const MlpParams before = a.critic;
  const double loss = critic_update(a, b, y);
  EXPECT_NEAR(loss, (q - y(0)) * (q - y(0)), 1e-12);
  std::vector<double> delta;
  MlpParams diff = a.critic;
  for (std::size_t i = 0; i < diff.layers.size(); ++i) {
    diff.layers[i].weight -= before.layers[i].weight;
    diff.layers[i].bias -= before.layers[i].bias;
  }
  const auto d = flatten(GradientBundle{diff.layers, {}});
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double g = 2.0 * (q - y(0)) * dq[i];
    if (std::abs(g) < 1e-6) continue;
    const double expected = -1e-3 * g / (std::abs(g) + 1e-8);
    EXPECT_NEAR(d[i], expected, 1e-9) << "parameter " << i;
  }
}

TEST(CriticUpdate, LossNonIncreasingOnFixedBatch) {
  DdpgAgent a = small_agent(4, 2, 18);
  Rng rng(19);
  const TrainingBatch b = random_batch(a, 64, rng);
  Vector y(64);
  for (int i = 0; i < 64; ++i) y(i) = -std::abs(b.inputs(0, i)) - 0.5 * b.actions(1, i) * b.actions(1, i);
  a.critic_opt.hyper.learning_rate = 1e-4;
  double prev = critic_update(a, b, y);
  int increases = 0;
  for (int k = 0; k < 100; ++k) {
    const double l = critic_update(a, b, y);
    if (l > prev) ++increases;
    prev = l;
  }
  EXPECT_EQ(increases, 0);
}

TEST(CriticUpdate, GradientMatchesFiniteDifferences) {
  Rng rng(27);
  for (int k = 0; k < 5; ++k) {
    const DdpgAgent a = small_agent(4, 2, 200 + static_cast<std::uint64_t>(k));
    const TrainingBatch b = random_batch(a, 10, rng);
    Vector y(10);
    for (int i = 0; i < 10; ++i) y(i) = rng.uniform(-5.0, 0.0);
    const RegressionGradient g = critic_gradient(a.critic, b.inputs, b.actions, y);
    const auto fd = finite_difference(a.critic, [&](const MlpParams& p) {
      return (mlp_eval_batch(p, stack_rows(b.inputs, b.actions)).row(0).transpose() - y)
                 .squaredNorm() /
             10.0;
    });
    EXPECT_LE(max_relative_error(flatten(g.grad), fd), 1e-5);
  }
}

TEST(CriticUpdate, NonFiniteTargetsRejected) {
  DdpgAgent a = small_agent(3, 1, 20);
  Rng rng(21);
  const TrainingBatch b = random_batch(a, 4, rng);
  EXPECT_THROW(critic_update(a, b, Vector::Constant(4, std::nan(""))), NumericError);
}

TEST(ActorUpdate, ConstantCriticGivesZeroGradient) {
  DdpgAgent a = small_agent(4, 2, 22);
  flatten_critic(a.critic, -3.0);
  Rng rng(23);
  const TrainingBatch b = random_batch(a, 16, rng);
  const MlpParams* critics[] = {&a.critic};
  for (double g : flatten(actor_gradient(a.actor, critics, b.inputs))) EXPECT_EQ(g, 0.0);
  const MlpParams before = a.actor;
  actor_update(a, b);
  EXPECT_EQ(a.actor, before);
}

TEST(ActorUpdate, GradientMatchesFiniteDifferences) {
  Rng rng(24);
  for (int k = 0; k < 5; ++k) {
    DdpgAgent a = small_agent(5, 3, 100 + static_cast<std::uint64_t>(k));
    const Matrix inputs = random_matrix(5, 12, rng, 2.0);
    const MlpParams* critics[] = {&a.critic};
    const auto g = flatten(actor_gradient(a.actor, critics, inputs));
    const auto fd = finite_difference(a.actor, [&](const MlpParams& p) {
      return -mean_q(p, {&a.critic}, inputs);
    });
    EXPECT_LE(max_relative_error(g, fd), 1e-5);
  }
}

TEST(ActorUpdate, AscendsAndLeavesCriticAndTargets) {
  DdpgAgent a = small_agent(4, 2, 25);
  Rng rng(26);
  const TrainingBatch b = random_batch(a, 32, rng);
  const MlpParams critic = a.critic, actor_t = a.actor_target, critic_t = a.critic_target;
  const MlpParams before = a.actor;
  const auto fd = finite_difference(before, [&](const MlpParams& p) {
    return mean_q(p, {&a.critic}, b.inputs);
  });
  actor_update(a, b);
  EXPECT_EQ(a.critic, critic);
  EXPECT_EQ(a.actor_target, actor_t);
  EXPECT_EQ(a.critic_target, critic_t);
  MlpParams diff = a.actor;
  for (std::size_t i = 0; i < diff.layers.size(); ++i) {
    diff.layers[i].weight -= before.layers[i].weight;
    diff.layers[i].bias -= before.layers[i].bias;
  }
  const auto d = flatten(GradientBundle{diff.layers, {}});
  double dot = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) dot += d[i] * fd[i];
  EXPECT_GT(dot, 0.0);
}

TEST(ActorUpdate, DrivesPolicyToKnownOptimum) {
  // Critic approximates Q(s, a) = -|a - 0.3| on a one-dimensional action.
  Rng rng(27);
  DdpgConfig cfg;
  cfg.hidden = 32;
  DdpgAgent a = make_ddpg_agent(1, symmetric_bounds(1, 1.0), cfg, rng);
  Matrix xs(2, 512);
  Vector ys(512);
  for (int i = 0; i < 512; ++i) {
    xs(0, i) = rng.uniform(-1, 1);
    xs(1, i) = rng.uniform(-1, 1);
    ys(i) = -std::abs(xs(1, i) - 0.3);
  }
  for (int k = 0; k < 3000; ++k)
    regress_critic(a.critic, a.critic_opt, xs.topRows(1), xs.bottomRows(1), ys);
  TrainingBatch b;
  b.inputs = random_matrix(1, 64, rng);
  for (int k = 0; k < 500; ++k) actor_update(a, b);
  const Matrix mu = mlp_eval_batch(a.actor, b.inputs);
  EXPECT_LT((mu.array() - 0.3).abs().maxCoeff(), 0.03);
}

TEST(UpdateTargets, SoftAveragesBothNetworks) {
  DdpgAgent a = small_agent(3, 1, 28);
  Rng rng(29);
  const DdpgAgent fresh = small_agent(3, 1, 30);
  a.actor = fresh.actor;
  a.critic = fresh.critic;
  const MlpParams at = a.actor_target, ct = a.critic_target;
  update_targets(a);
  EXPECT_EQ(a.actor_target, soft_update(at, a.actor, 0.05));
  EXPECT_EQ(a.critic_target, soft_update(ct, a.critic, 0.05));
}

TEST(ActionBounds, UnitMappingRoundTrips) {
  ActionBounds b{Vector::Constant(2, -0.05), Vector::Constant(2, 0.15)};
  Matrix a(2, 3);
  a << -0.05, 0.05, 0.15, 0.0, 0.1, -0.05;
  const Matrix u = b.to_unit(a);
  EXPECT_DOUBLE_EQ(u(0, 0), -1.0);
  EXPECT_NEAR(u(0, 1), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(u(0, 2), 1.0);
  EXPECT_LT((b.from_unit(u) - a).cwiseAbs().maxCoeff(), 1e-15);
}
