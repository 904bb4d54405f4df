#pragma once

// Training loops: locomotion pretraining (actor, critic and inverse dynamics on
// the object-locomotion variant) and manipulation learning with optional HER
// relabeling and SLD rewards, plus the deterministic evaluation protocol.

#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "sldr/ddpg.hpp"
#include "sldr/env.hpp"
#include "sldr/errors.hpp"
#include "sldr/normalizer.hpp"
#include "sldr/numerics.hpp"
#include "sldr/replay.hpp"
#include "sldr/rng.hpp"
#include "sldr/sld.hpp"
#include "sldr/stats.hpp"

namespace sldr {

enum class Stage { kLocomotion, kManipulation };
enum class Mode { kDdpgSparse, kHerSparse, kHerDense, kDdpgSldr, kHerSldr };

inline std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::kDdpgSparse: return "ddpg_sparse";
    case Mode::kHerSparse: return "her_sparse";
    case Mode::kHerDense: return "her_dense";
    case Mode::kDdpgSldr: return "ddpg_sldr";
    case Mode::kHerSldr: return "her_sldr";
  }
  return "?";
}

inline std::optional<Mode> parse_mode(std::string_view s) {
  for (Mode m : {Mode::kDdpgSparse, Mode::kHerSparse, Mode::kHerDense,
                 Mode::kDdpgSldr, Mode::kHerSldr})
    if (mode_name(m) == s) return m;
  return std::nullopt;
}

inline std::string_view stage_name(Stage s) {
  return s == Stage::kLocomotion ? "locomotion" : "manipulation";
}

inline bool uses_her(Mode m) {
  return m == Mode::kHerSparse || m == Mode::kHerDense || m == Mode::kHerSldr;
}
inline bool uses_sld(Mode m) { return m == Mode::kDdpgSldr || m == Mode::kHerSldr; }

struct TrainSchedule {
  int n_epochs = 50;
  int n_cycles = 10;
  int n_rollout_workers = 2;
  int n_rollouts_per_worker = 2;
  int n_updates = 40;  // per cycle
  int batch_size = 256;
  int eval_rollouts = 20;
  std::uint64_t seed = 1;

  int episodes_per_epoch() const {
    return n_cycles * n_rollout_workers * n_rollouts_per_worker;
  }

  void validate() const {
    if (n_epochs < 0 || n_cycles <= 0 || n_rollout_workers <= 0 ||
        n_rollouts_per_worker <= 0 || n_updates <= 0 || batch_size <= 0 ||
        eval_rollouts <= 0)
      throw ArgumentError("TrainSchedule: every count must be positive");
  }
};

struct Hyperparams {
  double gamma = 0.98;
  double tau = 0.05;
  double actor_lr = 1e-3;
  double critic_lr = 1e-3;
  double inverse_lr = 1e-3;
  int hidden = 64;
  int k_future = 4;
  int buffer_episodes = 1000;
  // Stage defaults apply when unset (locomotion 0.05 / 0.2,
  // manipulation 0.2 / 0.3).
  std::optional<double> noise_std;
  std::optional<double> random_action_prob;
  double clip_obs = 5.0;
  double norm_eps = 1e-2;
  bool clip_targets = true;
  bool refresh_sld_on_relabel = true;
  bool naive_sld = false;
  bool record_wall_time = false;
};

struct MetricsRow {
  int epoch = 0;
  double test_success_rate = 0.0;
  double critic_loss = 0.0;
  double sld_critic_loss = 0.0;
  double inv_dyn_loss = 0.0;
  double wall_seconds = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

// A deterministic goal-conditioned policy packaged with its input statistics.
struct Policy {
  TaskId task = TaskId::kPush;
  Variant variant = Variant::kManipulation;
  TaskOptions options;
  MlpParams actor;
  ActionBounds bounds;
  RunningNormalizer normalizer;  // over [s ; g]
};

inline Vector policy_input(const GoalObservation& o) {
  Vector x(o.observation.size() + o.desired_goal.size());
  x << o.observation, o.desired_goal;
  return x;
}

inline Vector policy_action(const Policy& p, const GoalObservation& o) {
  const Vector unit = mlp_forward(p.actor, normalize(p.normalizer, policy_input(o)));
  return p.bounds.clip(p.bounds.from_unit(unit).col(0));
}

using PolicyFn = std::function<Vector(const GoalObservation&)>;

// Runs exploration-free episodes from seeded resets; success means reward 0 at
// the final step.
inline double evaluate_with(PlanarEnv& env, const PolicyFn& policy, int n_rollouts,
                            std::uint64_t seed) {
  if (n_rollouts <= 0) throw ArgumentError("evaluate: n_rollouts must be >= 1");
  Rng seeds(seed);
  int successes = 0;
  for (int i = 0; i < n_rollouts; ++i) {
    GoalObservation o = env.reset(seeds.next());
    double last = -1.0;
    while (!env.done()) {
      StepResult r = env.step(policy(o));
      last = r.reward;
      o = std::move(r.obs);
    }
    if (last == 0.0) ++successes;
  }
  return static_cast<double>(successes) / n_rollouts;
}

inline TaskOptions evaluation_options(TaskOptions opt) {
  opt.stack_probability = 1.0;
  return opt;
}

inline double evaluate(const Policy& policy, int n_rollouts, std::uint64_t seed) {
  PlanarEnv env(policy.task, policy.variant, evaluation_options(policy.options));
  return evaluate_with(
      env, [&](const GoalObservation& o) { return policy_action(policy, o); },
      n_rollouts, seed);
}

// Worker count override from SLDR_THREADS (rollout threads, not results).
inline int rollout_threads(int workers) {
  int cap = 1;
  if (const char* env = std::getenv("SLDR_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) cap = v;
  }
  return std::max(1, std::min(cap, workers));
}

struct LearnerConfig {
  TaskId task = TaskId::kPush;
  Stage stage = Stage::kManipulation;
  Mode mode = Mode::kHerSparse;
  TrainSchedule schedule;
  Hyperparams hyper;
  std::vector<SldOracle> oracles;  // one per object in SLD modes
  TaskOptions env;
};

// Everything a checkpoint must hold to continue training bit-exactly.
struct LearnerState {
  int epoch = 0;
  DdpgAgent agent;
  std::vector<MlpParams> sld_critics;
  std::vector<MlpParams> sld_critic_targets;
  std::vector<AdamState> sld_critic_opts;
  std::optional<InverseDynamicsModel> inverse;
  RunningNormalizer normalizer;
  ReplayBuffer buffer;
  Rng rng;
  std::vector<Rng> worker_rngs;
  std::int64_t episodes_generated = 0;
  // Locomotion only: artifacts of the best-evaluated epoch, ties to the later.
  std::optional<SldOracle> best_oracle;
  double best_success = -1.0;
  int best_epoch = 0;
};

class Learner {
 public:
  explicit Learner(LearnerConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.schedule.validate();
    options_ = cfg_.env;
    const Variant variant = cfg_.stage == Stage::kLocomotion ? Variant::kLocomotion
                                                             : Variant::kManipulation;
    spec_ = make_env_spec(cfg_.task, variant, options_);
    if (cfg_.stage == Stage::kLocomotion) cfg_.mode = Mode::kHerSparse;
    const bool sld = cfg_.stage == Stage::kManipulation && uses_sld(cfg_.mode);
    if (sld && static_cast<int>(cfg_.oracles.size()) != spec_.n_objects())
      throw ArgumentError("Learner: mode " + std::string(mode_name(cfg_.mode)) +
                          " needs " + std::to_string(spec_.n_objects()) +
                          " locomotion oracle(s), got " +
                          std::to_string(cfg_.oracles.size()));
    if (!sld && !cfg_.oracles.empty())
      throw ArgumentError("Learner: locomotion oracles are only used by SLD modes");
    for (const SldOracle& o : cfg_.oracles)
      if (o.obj_obs_dim != spec_.obj_obs_dim() || o.obj_goal_dim != spec_.obj_goal_dim())
        throw ShapeError("Learner: oracle dimensions do not match task " +
                         std::string(task_name(cfg_.task)));

    const Hyperparams& h = cfg_.hyper;
    const bool loco = cfg_.stage == Stage::kLocomotion;
    DdpgConfig dc;
    dc.gamma = h.gamma;
    dc.tau = h.tau;
    dc.hidden = h.hidden;
    dc.noise_std = h.noise_std.value_or(loco ? 0.05 : 0.2);
    dc.random_action_prob = h.random_action_prob.value_or(loco ? 0.2 : 0.3);
    dc.clip_targets = h.clip_targets;
    dc.actor_opt.learning_rate = h.actor_lr;
    dc.critic_opt.learning_rate = h.critic_lr;

    Rng root(cfg_.schedule.seed);
    Rng init_rng = root.split(1);
    Rng sld_rng = root.split(2);
    Rng inv_rng = root.split(3);
    state_.rng = root.split(4);
    for (int w = 0; w < cfg_.schedule.n_rollout_workers; ++w)
      state_.worker_rngs.push_back(root.split(100 + static_cast<std::uint64_t>(w)));

    const int input_dim = spec_.obs_dim + spec_.goal_dim;
    state_.agent = make_ddpg_agent(input_dim, {spec_.action_low, spec_.action_high},
                                   dc, init_rng);
    if (sld) {
      for (int i = 0; i < spec_.n_objects(); ++i) {
        MlpParams c = init_mlp(input_dim + spec_.action_dim, h.hidden, 1,
                               Activation::kIdentity, sld_rng);
        // SLD critics start at exactly zero value.
        c.layers.back().weight.setZero();
        c.layers.back().bias.setZero();
        state_.sld_critic_opts.push_back(make_adam(c, dc.critic_opt));
        state_.sld_critic_targets.push_back(c);
        state_.sld_critics.push_back(std::move(c));
      }
    }
    if (loco) {
      state_.inverse = make_inverse_dynamics(
          spec_.obs_dim, {spec_.action_low, spec_.action_high}, h.hidden,
          AdamHyper{h.inverse_lr}, inv_rng);
    }
    state_.normalizer = RunningNormalizer(input_dim, h.clip_obs, h.norm_eps);
    state_.buffer = ReplayBuffer(h.buffer_episodes, spec_.horizon);
    for (int w = 0; w < cfg_.schedule.n_rollout_workers; ++w)
      envs_.emplace_back(cfg_.task, variant, options_);
  }

  const LearnerConfig& config() const { return cfg_; }
  const EnvSpec& spec() const { return spec_; }
  LearnerState& state() { return state_; }
  const LearnerState& state() const { return state_; }
  int epoch() const { return state_.epoch; }
  bool finished() const { return state_.epoch >= cfg_.schedule.n_epochs; }
  bool sld_enabled() const { return !state_.sld_critics.empty(); }
  bool dense_rewards() const {
    return cfg_.stage == Stage::kManipulation && cfg_.mode == Mode::kHerDense;
  }
  int k_future() const {
    return cfg_.stage == Stage::kLocomotion || uses_her(cfg_.mode) ? cfg_.hyper.k_future
                                                                   : 0;
  }

  // Episodes generated by the most recent cycle, in storage order.
  const std::vector<EpisodeRecord>& last_cycle_episodes() const { return last_cycle_; }
  std::int64_t episodes_generated() const { return state_.episodes_generated; }

  Policy policy() const {
    return Policy{cfg_.task, spec_.variant, options_, state_.agent.actor,
                  state_.agent.bounds, state_.normalizer};
  }

  // Frozen locomotion artifacts (online critic, current statistics).
  SldOracle oracle() const {
    if (!state_.inverse)
      throw UsageError("oracle: only a locomotion learner produces an oracle");
    SldOracle o;
    o.mu_obj = state_.agent.actor;
    o.q_obj = state_.agent.critic;
    o.inv = *state_.inverse;
    o.normalizer = state_.normalizer;
    o.obj_obs_dim = spec_.obs_dim;
    o.obj_goal_dim = spec_.goal_dim;
    return o;
  }

  // Oracle of the best-evaluated epoch so far; the current one before any epoch.
  SldOracle best_oracle() const { return state_.best_oracle ? *state_.best_oracle : oracle(); }
  int best_epoch() const { return state_.best_epoch; }

  // Deterministic object policy driven by an oracle's locomotion actor.
  Policy locomotion_policy(const SldOracle& o) const {
    if (spec_.variant != Variant::kLocomotion)
      throw UsageError("locomotion_policy: learner is not a locomotion learner");
    return Policy{cfg_.task, spec_.variant, options_, o.mu_obj, state_.agent.bounds,
                  o.normalizer};
  }

  // One epoch: n_cycles of (rollouts, storage, normalizer refresh, update
  // block, target averaging), then evaluation. `abort` is polled between
  // cycles; an aborted epoch throws without advancing the epoch counter.
  MetricsRow run_epoch(const std::function<bool()>& abort = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const TrainSchedule& sch = cfg_.schedule;
    double critic_loss = 0.0, sld_loss = 0.0, inv_loss = 0.0;
    int n_critic = 0, n_sld = 0, n_inv = 0;
    for (int cycle = 0; cycle < sch.n_cycles; ++cycle) {
      if (abort && abort()) throw UsageError("training aborted");
      collect_cycle();
      for (EpisodeRecord& ep : last_cycle_) state_.buffer.store_episode(ep);
      refresh_normalizer(last_cycle_);
      for (int u = 0; u < sch.n_updates; ++u) {
        const UpdateLosses l = train_step();
        critic_loss += l.critic;
        ++n_critic;
        for (double s : l.sld) {
          sld_loss += s;
          ++n_sld;
        }
        if (l.inverse) {
          inv_loss += *l.inverse;
          ++n_inv;
        }
      }
      update_targets(state_.agent);
      for (std::size_t i = 0; i < state_.sld_critics.size(); ++i)
        soft_update_inplace(state_.sld_critic_targets[i], state_.sld_critics[i],
                            state_.agent.tau);
    }
    ++state_.epoch;
    MetricsRow row;
    row.epoch = state_.epoch;
    row.test_success_rate = evaluate_epoch();
    row.critic_loss = n_critic ? critic_loss / n_critic : 0.0;
    row.sld_critic_loss = n_sld ? sld_loss / n_sld : 0.0;
    row.inv_dyn_loss = n_inv ? inv_loss / n_inv : 0.0;
    if (state_.inverse && row.test_success_rate >= state_.best_success) {
      state_.best_success = row.test_success_rate;
      state_.best_epoch = row.epoch;
      state_.best_oracle = oracle();
    }
    if (cfg_.hyper.record_wall_time)
      row.wall_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
  }

  std::vector<MetricsRow> run(const std::function<void(const MetricsRow&)>& on_epoch = {},
                              const std::function<bool()>& abort = {}) {
    std::vector<MetricsRow> rows;
    while (!finished()) {
      rows.push_back(run_epoch(abort));
      if (on_epoch) on_epoch(rows.back());
    }
    return rows;
  }

  double evaluate_epoch() const {
    PlanarEnv env(cfg_.task, spec_.variant, evaluation_options(options_));
    const Policy p = policy();
    const std::uint64_t seed =
        cfg_.schedule.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(state_.epoch);
    return evaluate_with(
        env, [&](const GoalObservation& o) { return policy_action(p, o); },
        cfg_.schedule.eval_rollouts, seed);
  }

  // SLD reward rows (one per object) for consecutive observation columns.
  Matrix sld_rewards(const Matrix& obs, const Matrix& obs_next) const {
    Matrix q(static_cast<Eigen::Index>(cfg_.oracles.size()), obs.cols());
    for (std::size_t i = 0; i < cfg_.oracles.size(); ++i) {
      const IndexRange r = spec_.object_slices[i];
      const Matrix s = obs.middleRows(r.begin, r.size);
      const Matrix sn = obs_next.middleRows(r.begin, r.size);
      if (cfg_.hyper.naive_sld) {
        for (Eigen::Index c = 0; c < obs.cols(); ++c)
          q(static_cast<Eigen::Index>(i), c) = std::clamp(
              naive_sld_reward(cfg_.oracles[i], s.col(c), sn.col(c)), -1.0, 0.0);
      } else {
        q.row(static_cast<Eigen::Index>(i)) =
            compute_sld_reward_batch(cfg_.oracles[i], s, sn).transpose();
      }
    }
    return q;
  }

 private:
  struct UpdateLosses {
    double critic = 0.0;
    std::vector<double> sld;
    std::optional<double> inverse;
  };

  double step_reward(const GoalObservation& o, double env_reward) const {
    return dense_rewards() ? dense_reward(o.achieved_goal, o.desired_goal) : env_reward;
  }

  EpisodeRecord rollout(PlanarEnv& env, Rng& rng) const {
    EpisodeRecord ep;
    GoalObservation o = env.reset(rng.next());
    ep.desired = o.desired_goal;
    ep.obs.push_back(o.observation);
    ep.achieved.push_back(o.achieved_goal);
    while (!env.done()) {
      const Vector x = normalize(state_.normalizer, policy_input(o));
      const Vector a = select_action(state_.agent, x, true, rng);
      StepResult r = env.step(a);
      ep.actions.push_back(a);
      ep.rewards.push_back(step_reward(r.obs, r.reward));
      o = std::move(r.obs);
      ep.obs.push_back(o.observation);
      ep.achieved.push_back(o.achieved_goal);
    }
    if (sld_enabled()) {
      const int T = ep.length();
      Matrix s(spec_.obs_dim, T), sn(spec_.obs_dim, T);
      for (int t = 0; t < T; ++t) {
        s.col(t) = ep.obs[static_cast<std::size_t>(t)];
        sn.col(t) = ep.obs[static_cast<std::size_t>(t + 1)];
      }
      ep.sld = sld_rewards(s, sn);
    }
    return ep;
  }

  void collect_cycle() {
    const TrainSchedule& sch = cfg_.schedule;
    const int workers = sch.n_rollout_workers;
    std::vector<std::vector<EpisodeRecord>> per_worker(static_cast<std::size_t>(workers));
    auto work = [&](int w) {
      auto& out = per_worker[static_cast<std::size_t>(w)];
      for (int r = 0; r < sch.n_rollouts_per_worker; ++r)
        out.push_back(rollout(envs_[static_cast<std::size_t>(w)],
                              state_.worker_rngs[static_cast<std::size_t>(w)]));
    };
    const int threads = rollout_threads(workers);
    if (threads <= 1) {
      for (int w = 0; w < workers; ++w) work(w);
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < threads; ++t)
        pool.emplace_back([&, t] {
          for (int w = t; w < workers; w += threads) work(w);
        });
      for (auto& th : pool) th.join();
    }
    last_cycle_.clear();
    for (auto& eps : per_worker)
      for (auto& ep : eps) last_cycle_.push_back(std::move(ep));
    state_.episodes_generated += static_cast<std::int64_t>(last_cycle_.size());
  }

  Vector retarget(const Vector& s, const Vector& g) const { return with_goal(s, g, spec_); }

  // Statistics come from the cycle's transitions with the same goal
  // relabeling the learner trains on.
  void refresh_normalizer(const std::vector<EpisodeRecord>& episodes) {
    const double p = relabel_probability(k_future());
    std::vector<Vector> batch;
    for (const EpisodeRecord& ep : episodes) {
      const int T = ep.length();
      for (int t = 0; t < T; ++t) {
        const auto ti = static_cast<std::size_t>(t);
        Vector x(spec_.obs_dim + spec_.goal_dim);
        if (p > 0.0 && state_.rng.uniform() < p) {
          const auto f = static_cast<std::size_t>(
              t + 1 + static_cast<int>(state_.rng.below(static_cast<std::uint64_t>(T - t))));
          x << retarget(ep.obs[ti], ep.achieved[f]), ep.achieved[f];
        } else {
          x << ep.obs[ti], ep.desired;
        }
        batch.push_back(std::move(x));
      }
    }
    normalizer_update_inplace(state_.normalizer, batch);
  }

  RelabelHooks hooks() const {
    RelabelHooks h;
    if (dense_rewards()) {
      h.reward_fn = [](const Vector& ag, const Vector& g) { return dense_reward(ag, g); };
    } else {
      h.reward_fn = [this](const Vector& ag, const Vector& g) {
        return compute_reward(ag, g, spec_);
      };
    }
    h.retarget_fn = [this](const Vector& s, const Vector& g) { return retarget(s, g); };
    if (sld_enabled() && cfg_.hyper.refresh_sld_on_relabel) {
      h.sld_fn = [this](std::span<Transition* const> trs) {
        Matrix s(spec_.obs_dim, static_cast<Eigen::Index>(trs.size()));
        Matrix sn(spec_.obs_dim, static_cast<Eigen::Index>(trs.size()));
        for (std::size_t i = 0; i < trs.size(); ++i) {
          s.col(static_cast<Eigen::Index>(i)) = trs[i]->s;
          sn.col(static_cast<Eigen::Index>(i)) = trs[i]->s_next;
        }
        const Matrix q = sld_rewards(s, sn);
        for (std::size_t i = 0; i < trs.size(); ++i)
          trs[i]->q = q.col(static_cast<Eigen::Index>(i));
      };
    }
    return h;
  }

  TrainingBatch assemble(const std::vector<Transition>& trs, Matrix* raw_s,
                         Matrix* raw_a, Matrix* raw_sn) const {
    const auto B = static_cast<Eigen::Index>(trs.size());
    const int in = spec_.obs_dim + spec_.goal_dim;
    Matrix x(in, B), xn(in, B), a(spec_.action_dim, B);
    TrainingBatch b;
    b.rewards.resize(B);
    b.sld.resize(static_cast<Eigen::Index>(state_.sld_critics.size()), B);
    for (Eigen::Index i = 0; i < B; ++i) {
      const Transition& t = trs[static_cast<std::size_t>(i)];
      x.col(i) << t.s, t.desired;
      xn.col(i) << t.s_next, t.desired;
      a.col(i) = t.a;
      b.rewards(i) = t.r;
      if (b.sld.rows() > 0) b.sld.col(i) = t.q;
    }
    if (raw_s) *raw_s = x.topRows(spec_.obs_dim);
    if (raw_sn) *raw_sn = xn.topRows(spec_.obs_dim);
    if (raw_a) *raw_a = a;
    b.inputs = normalize_batch(state_.normalizer, x);
    b.next_inputs = normalize_batch(state_.normalizer, xn);
    b.actions = state_.agent.bounds.to_unit(a);
    return b;
  }

  UpdateLosses train_step() {
    const std::vector<Transition> trs = sample_her_batch(
        state_.buffer, cfg_.schedule.batch_size, k_future(), hooks(), state_.rng);
    const bool loco = state_.inverse.has_value();
    Matrix raw_s, raw_a, raw_sn;
    const TrainingBatch batch = assemble(trs, loco ? &raw_s : nullptr,
                                         loco ? &raw_a : nullptr,
                                         loco ? &raw_sn : nullptr);
    UpdateLosses l;
    DdpgAgent& agent = state_.agent;
    const Vector y = critic_targets(agent, batch, RewardField::kEnvironment);
    l.critic = critic_update(agent, batch, y);
    for (std::size_t i = 0; i < state_.sld_critics.size(); ++i) {
      const Vector yq = critic_targets(agent, batch, RewardField::kSld,
                                       &state_.sld_critic_targets[i], static_cast<int>(i));
      l.sld.push_back(regress_critic(state_.sld_critics[i], state_.sld_critic_opts[i],
                                     batch.inputs, batch.actions, yq));
    }
    if (sld_enabled()) {
      multi_critic_actor_update(agent, state_.sld_critics, batch);
    } else {
      actor_update(agent, batch);
    }
    if (loco) {
      const RunningNormalizer obs_norm =
          normalizer_slice(state_.normalizer, 0, spec_.obs_dim);
      l.inverse = inverse_dynamics_update(*state_.inverse, obs_norm, raw_s, raw_a, raw_sn);
    }
    return l;
  }

  LearnerConfig cfg_;
  TaskOptions options_;
  EnvSpec spec_;
  LearnerState state_;
  std::vector<PlanarEnv> envs_;
  std::vector<EpisodeRecord> last_cycle_;
};

struct LocomotionResult {
  SldOracle oracle;  // best-evaluated epoch
  Policy policy;     // deterministic locomotion policy of that oracle
  int best_epoch = 0;
  std::vector<MetricsRow> metrics;
};

inline LocomotionResult train_locomotion(TaskId task, const TrainSchedule& schedule,
                                         const Hyperparams& hyper = {}) {
  if (!task_has_locomotion(task))
    throw ArgumentError(std::string("train_locomotion: task ") +
                        std::string(task_name(task)) + " has no locomotion variant");
  Learner learner({task, Stage::kLocomotion, Mode::kHerSparse, schedule, hyper, {}, {}});
  LocomotionResult out;
  out.metrics = learner.run();
  out.oracle = learner.best_oracle();
  out.policy = learner.locomotion_policy(out.oracle);
  out.best_epoch = learner.best_epoch();
  return out;
}

struct ManipulationResult {
  Policy policy;
  std::vector<MetricsRow> metrics;
};

inline ManipulationResult train_manipulation(TaskId task, std::vector<SldOracle> oracles,
                                             const TrainSchedule& schedule, Mode mode,
                                             const Hyperparams& hyper = {}) {
  Learner learner({task, Stage::kManipulation, mode, schedule, hyper, std::move(oracles), {}});
  ManipulationResult out;
  out.metrics = learner.run();
  out.policy = learner.policy();
  return out;
}

// Per-epoch median and interquartile range of success rate across runs.
struct SeedStudy {
  std::vector<int> epochs;
  std::vector<Spread> success;
  std::vector<std::vector<MetricsRow>> runs;
};

inline SeedStudy aggregate_runs(std::vector<std::vector<MetricsRow>> runs) {
  if (runs.empty()) throw ArgumentError("run_seed_study: at least one seed required");
  SeedStudy s;
  const std::size_t n = runs.front().size();
  for (const auto& r : runs)
    if (r.size() != n) throw ArgumentError("run_seed_study: runs have different lengths");
  for (std::size_t e = 0; e < n; ++e) {
    std::vector<double> v;
    for (const auto& r : runs) {
      if (r[e].epoch != runs.front()[e].epoch)
        throw ArgumentError("run_seed_study: epoch grids differ");
      v.push_back(r[e].test_success_rate);
    }
    s.epochs.push_back(runs.front()[e].epoch);
    s.success.push_back(spread(v));
  }
  s.runs = std::move(runs);
  return s;
}

struct StudyConfig {
  TaskId task = TaskId::kPush;
  Mode mode = Mode::kHerSparse;
  TrainSchedule schedule;
  Hyperparams hyper;
  // Per-seed oracle provider (SLD modes only).
  std::function<std::vector<SldOracle>(std::uint64_t seed)> oracles;
};

inline SeedStudy run_seed_study(const StudyConfig& cfg,
                                const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ArgumentError("run_seed_study: at least one seed required");
  std::vector<std::vector<MetricsRow>> runs;
  for (std::uint64_t seed : seeds) {
    TrainSchedule sch = cfg.schedule;
    sch.seed = seed;
    std::vector<SldOracle> oracles;
    if (uses_sld(cfg.mode) && cfg.oracles) oracles = cfg.oracles(seed);
    runs.push_back(train_manipulation(cfg.task, std::move(oracles), sch, cfg.mode,
                                      cfg.hyper)
                       .metrics);
  }
  return aggregate_runs(std::move(runs));
}

}  // namespace sldr
