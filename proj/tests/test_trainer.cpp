#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <vector>

#include "sldr/stats.hpp"
#include "sldr/trainer.hpp"

using namespace sldr;

namespace {

TrainSchedule tiny_schedule(std::uint64_t seed = 3) {
  TrainSchedule s;
  s.n_epochs = 2;
  s.n_cycles = 2;
  s.n_rollout_workers = 2;
  s.n_rollouts_per_worker = 1;
  s.n_updates = 4;
  s.batch_size = 32;
  s.eval_rollouts = 4;
  s.seed = seed;
  return s;
}

LearnerConfig push_config(Mode mode, std::vector<SldOracle> oracles = {}) {
  LearnerConfig c;
  c.task = TaskId::kPush;
  c.stage = Stage::kManipulation;
  c.mode = mode;
  c.schedule = tiny_schedule();
  c.hyper.hidden = 16;
  c.oracles = std::move(oracles);
  return c;
}

SldOracle untrained_push_oracle() {
  TrainSchedule s = tiny_schedule();
  s.n_epochs = 0;
  Hyperparams h;
  h.hidden = 16;
  return train_locomotion(TaskId::kPush, s, h).oracle;
}

bool same_bytes(const Vector& a, const Vector& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), sizeof(double) * static_cast<std::size_t>(a.size())) == 0;
}

class ThreadsOverride {
 public:
  explicit ThreadsOverride(const char* v) { setenv("SLDR_THREADS", v, 1); }
  ~ThreadsOverride() { unsetenv("SLDR_THREADS"); }
};

}  // namespace

TEST(TrainLocomotion, ZeroEpochsGiveUntrainedOracleAndNoMetrics) {
  TrainSchedule s = tiny_schedule();
  s.n_epochs = 0;
  const LocomotionResult r = train_locomotion(TaskId::kPush, s);
  EXPECT_TRUE(r.metrics.empty());
  const EnvSpec spec = make_env_spec(TaskId::kPush, Variant::kLocomotion);
  EXPECT_EQ(r.oracle.obj_obs_dim, spec.obs_dim);
  EXPECT_EQ(r.oracle.obj_goal_dim, spec.goal_dim);
  EXPECT_EQ(r.oracle.normalizer.count, 0);
}

TEST(TrainLocomotion, ReportsInverseLossAndIsDeterministic) {
  Hyperparams h;
  h.hidden = 16;
  const LocomotionResult a = train_locomotion(TaskId::kPush, tiny_schedule(), h);
  const LocomotionResult b = train_locomotion(TaskId::kPush, tiny_schedule(), h);
  ASSERT_EQ(a.metrics.size(), 2u);
  EXPECT_EQ(a.metrics, b.metrics);
  EXPECT_EQ(a.oracle, b.oracle);
  for (const MetricsRow& m : a.metrics) {
    EXPECT_GT(m.inv_dyn_loss, 0.0);
    EXPECT_GE(m.test_success_rate, 0.0);
    EXPECT_LE(m.test_success_rate, 1.0);
  }
}

TEST(TrainLocomotion, KeepsOracleOfBestEvaluatedEpoch) {
  LearnerConfig c;
  c.task = TaskId::kPush;
  c.stage = Stage::kLocomotion;
  c.schedule = tiny_schedule(11);
  c.schedule.n_epochs = 5;
  c.schedule.eval_rollouts = 10;
  c.hyper.hidden = 16;
  Learner l(c);
  EXPECT_EQ(l.best_oracle(), l.oracle());
  double best = -1.0;
  int best_epoch = 0;
  SldOracle expected;
  while (!l.finished()) {
    const MetricsRow r = l.run_epoch();
    if (r.test_success_rate >= best) {
      best = r.test_success_rate;
      best_epoch = r.epoch;
      expected = l.oracle();
    }
  }
  EXPECT_EQ(l.best_epoch(), best_epoch);
  EXPECT_EQ(l.best_oracle(), expected);

  const LocomotionResult res = train_locomotion(TaskId::kPush, c.schedule, c.hyper);
  EXPECT_EQ(res.best_epoch, best_epoch);
  EXPECT_EQ(res.oracle, expected);
  EXPECT_EQ(res.policy.variant, Variant::kLocomotion);
  EXPECT_EQ(res.policy.actor, expected.mu_obj);
  EXPECT_EQ(res.policy.normalizer, expected.normalizer);
}

TEST(TrainSchedule, ValidatesCounts) {
  TrainSchedule s = tiny_schedule();
  EXPECT_EQ(s.episodes_per_epoch(), 4);
  s.batch_size = 0;
  EXPECT_THROW(s.validate(), ArgumentError);
  s = tiny_schedule();
  s.n_epochs = -1;
  EXPECT_THROW(Learner(LearnerConfig{TaskId::kPush, Stage::kManipulation, Mode::kHerSparse, s, {}, {}, {}}),
               ArgumentError);
}

TEST(Learner, OracleRequirementsFollowMode) {
  EXPECT_THROW(Learner(push_config(Mode::kHerSldr)), ArgumentError);
  EXPECT_THROW(Learner(push_config(Mode::kHerSparse, {untrained_push_oracle()})), ArgumentError);
  SldOracle bad = untrained_push_oracle();
  bad.obj_obs_dim += 1;
  EXPECT_THROW(Learner(push_config(Mode::kDdpgSldr, {bad})), ShapeError);
}

TEST(Learner, EpisodeAccountingPerEpoch) {
  Learner l(push_config(Mode::kHerSparse));
  l.run_epoch();
  EXPECT_EQ(l.episodes_generated(), 4);
  EXPECT_EQ(l.last_cycle_episodes().size(), 2u);
  EXPECT_EQ(l.state().buffer.size(), 4);
  l.run_epoch();
  EXPECT_EQ(l.episodes_generated(), 8);
  EXPECT_TRUE(l.finished());
}

TEST(Learner, FullRunIsDeterministic) {
  Learner a(push_config(Mode::kHerSparse)), b(push_config(Mode::kHerSparse));
  EXPECT_EQ(a.run(), b.run());
  EXPECT_EQ(a.state().agent.actor, b.state().agent.actor);
  EXPECT_EQ(a.state().agent.critic_target, b.state().agent.critic_target);
  EXPECT_EQ(a.state().normalizer, b.state().normalizer);
}

TEST(Learner, ParallelRolloutsMatchSerial) {
  Learner serial(push_config(Mode::kHerSparse));
  const auto rows = serial.run();
  ThreadsOverride two("2");
  EXPECT_EQ(rollout_threads(2), 2);
  Learner parallel(push_config(Mode::kHerSparse));
  EXPECT_EQ(parallel.run(), rows);
  EXPECT_EQ(parallel.state().agent.actor, serial.state().agent.actor);
}

TEST(Learner, ZeroValuedOracleReducesSldrToHer) {
  SldOracle o = untrained_push_oracle();
  o.q_obj.layers.back().weight.setZero();
  o.q_obj.layers.back().bias.setZero();
  Learner sldr(push_config(Mode::kHerSldr, {o})), her(push_config(Mode::kHerSparse));
  const auto rs = sldr.run();
  const auto rh = her.run();
  ASSERT_EQ(rs.size(), rh.size());
  for (std::size_t i = 0; i < rs.size(); ++i) {
    EXPECT_EQ(rs[i].test_success_rate, rh[i].test_success_rate);
    EXPECT_EQ(rs[i].critic_loss, rh[i].critic_loss);
    EXPECT_EQ(rs[i].sld_critic_loss, 0.0);
  }
  EXPECT_EQ(sldr.state().agent.actor, her.state().agent.actor);
  EXPECT_EQ(sldr.state().agent.critic, her.state().agent.critic);
  for (const MlpParams& c : sldr.state().sld_critics) {
    EXPECT_EQ(c.layers.back().weight.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(c.layers.back().bias.cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(Learner, DenseModeReplacesRewardWithNegativeDistance) {
  Learner l(push_config(Mode::kHerDense));
  l.run_epoch();
  for (const EpisodeRecord& ep : l.last_cycle_episodes())
    for (int t = 0; t < ep.length(); ++t) {
      const auto k = static_cast<std::size_t>(t);
      EXPECT_EQ(ep.rewards[k], -(ep.achieved[k + 1] - ep.desired).norm());
    }
}

TEST(Learner, LoggedSldRewardsAreClipped) {
  Learner l(push_config(Mode::kHerSldr, {untrained_push_oracle()}));
  double lo = 0.0;
  for (int e = 0; e < 2; ++e) {
    l.run_epoch();
    for (const EpisodeRecord& ep : l.last_cycle_episodes()) {
      ASSERT_EQ(ep.sld.rows(), 1);
      ASSERT_EQ(ep.sld.cols(), ep.length());
      EXPECT_LE(ep.sld.maxCoeff(), 0.0);
      EXPECT_GE(ep.sld.minCoeff(), -1.0);
      lo = std::min(lo, ep.sld.minCoeff());
    }
  }
  EXPECT_LT(lo, 0.0);
}

TEST(Learner, SldDoesNotTouchEnvironmentRewards) {
  // One cycle: the first rollouts precede every parameter update.
  LearnerConfig cs = push_config(Mode::kHerSldr, {untrained_push_oracle()});
  LearnerConfig ch = push_config(Mode::kHerSparse);
  cs.schedule.n_cycles = ch.schedule.n_cycles = 1;
  Learner sldr(cs), her(ch);
  sldr.run_epoch();
  her.run_epoch();
  const auto& es = sldr.last_cycle_episodes();
  const auto& eh = her.last_cycle_episodes();
  ASSERT_EQ(es.size(), eh.size());
  const EnvSpec spec = make_env_spec(TaskId::kPush, Variant::kManipulation);
  for (std::size_t i = 0; i < es.size(); ++i) {
    const Vector rs = Eigen::Map<const Vector>(es[i].rewards.data(), es[i].length());
    const Vector rh = Eigen::Map<const Vector>(eh[i].rewards.data(), eh[i].length());
    EXPECT_TRUE(same_bytes(rs, rh));
    for (int t = 0; t < es[i].length(); ++t)
      EXPECT_EQ(rs(t), compute_reward(es[i].achieved[static_cast<std::size_t>(t) + 1],
                                      es[i].desired, spec));
  }
}

TEST(Learner, OracleIsNeverModified) {
  const SldOracle o = untrained_push_oracle();
  Learner l(push_config(Mode::kHerSldr, {o}));
  l.run();
  ASSERT_EQ(l.config().oracles.size(), 1u);
  EXPECT_EQ(l.config().oracles[0], o);
  EXPECT_EQ(l.config().oracles[0].inv.opt.step_count, o.inv.opt.step_count);
}

TEST(Evaluate, ZeroRolloutsIsArgumentError) {
  const Learner l(push_config(Mode::kHerSparse));
  EXPECT_THROW(evaluate(l.policy(), 0, 1), ArgumentError);
}

TEST(Evaluate, HardWiredPolicyOnScriptedEnvSolvesEverything) {
  // Locomotion Push: the object moves by the commanded delta, so stepping
  // straight at the target always arrives within the horizon.
  PlanarEnv env(TaskId::kPush, Variant::kLocomotion);
  const auto policy = [](const GoalObservation& o) {
    Vector a = Vector::Zero(3);
    a.head(2) = (o.desired_goal - o.achieved_goal).cwiseMax(-0.05).cwiseMin(0.05);
    return a;
  };
  EXPECT_EQ(evaluate_with(env, policy, 50, 11), 1.0);
}

TEST(Evaluate, RandomPolicyRarelySucceedsOnPush) {
  PlanarEnv env(TaskId::kPush, Variant::kManipulation);
  Rng rng(12);
  const auto policy = [&](const GoalObservation&) {
    Vector a(3);
    for (int i = 0; i < 3; ++i) a(i) = rng.uniform(-1.0, 1.0);
    return a;
  };
  EXPECT_LT(evaluate_with(env, policy, 100, 13), 0.2);
}

TEST(Evaluate, SameSeedSameRate) {
  Learner l(push_config(Mode::kHerSparse));
  l.run_epoch();
  const Policy p = l.policy();
  EXPECT_EQ(evaluate(p, 30, 5), evaluate(p, 30, 5));
  const double r = evaluate(p, 1, 6);
  EXPECT_TRUE(r == 0.0 || r == 1.0);
}

TEST(SeedStudy, SingleSeedHasZeroSpread) {
  StudyConfig cfg;
  cfg.schedule = tiny_schedule();
  cfg.hyper.hidden = 16;
  const SeedStudy s = run_seed_study(cfg, {4});
  ASSERT_EQ(s.success.size(), 2u);
  for (std::size_t e = 0; e < 2; ++e) {
    EXPECT_EQ(s.success[e].median, s.runs[0][e].test_success_rate);
    EXPECT_EQ(s.success[e].iqr(), 0.0);
  }
  EXPECT_THROW(run_seed_study(cfg, {}), ArgumentError);
}

TEST(SeedStudy, SyntheticCurvesMatchDirectStatistics) {
  // Curves at three seeds: per-epoch sorted values (a, b, c) have median b,
  // first quartile (a + b) / 2 and third quartile (b + c) / 2.
  const double curves[3][4] = {{0.0, 0.2, 0.5, 0.9}, {0.1, 0.1, 0.7, 1.0}, {0.3, 0.6, 0.6, 0.8}};
  std::vector<std::vector<MetricsRow>> runs(3);
  for (int s = 0; s < 3; ++s)
    for (int e = 0; e < 4; ++e) {
      MetricsRow r;
      r.epoch = e + 1;
      r.test_success_rate = curves[s][e];
      runs[static_cast<std::size_t>(s)].push_back(r);
    }
  const SeedStudy st = aggregate_runs(runs);
  for (int e = 0; e < 4; ++e) {
    double v[3] = {curves[0][e], curves[1][e], curves[2][e]};
    std::sort(v, v + 3);
    const auto k = static_cast<std::size_t>(e);
    EXPECT_EQ(st.epochs[k], e + 1);
    EXPECT_DOUBLE_EQ(st.success[k].median, v[1]);
    EXPECT_DOUBLE_EQ(st.success[k].q25, 0.5 * (v[0] + v[1]));
    EXPECT_DOUBLE_EQ(st.success[k].q75, 0.5 * (v[1] + v[2]));
  }
  runs[1].pop_back();
  EXPECT_THROW(aggregate_runs(runs), ArgumentError);
}

TEST(Stats, AreaUnderCurveIsTrapezoidal) {
  const std::vector<double> ys{0.0, 1.0, 1.0, 0.0};
  EXPECT_DOUBLE_EQ(area_under_curve(ys), 2.0);
  EXPECT_DOUBLE_EQ(median(std::vector<double>{3.0, 1.0, 2.0, 10.0}), 2.5);
}

TEST(Modes, NamesRoundTrip) {
  for (Mode m : {Mode::kDdpgSparse, Mode::kHerSparse, Mode::kHerDense, Mode::kDdpgSldr,
                 Mode::kHerSldr})
    EXPECT_EQ(parse_mode(mode_name(m)), m);
  EXPECT_FALSE(parse_mode("her").has_value());
  EXPECT_TRUE(uses_her(Mode::kHerSldr));
  EXPECT_FALSE(uses_her(Mode::kDdpgSldr));
  EXPECT_TRUE(uses_sld(Mode::kDdpgSldr));
}
