#pragma once

// Deterministic planar (top-down) manipulation tasks, each paired with an
// object-locomotion variant in which the object moves itself by pose deltas.
//
// Observation layout of the manipulation variant:
//   [robot (5)] [object 0 block] ... [object N-1 block] [gripper-relative (3 per body)]
// An object block is, per body: pose (x, y, theta) and velocity; then per body
// the offset to its target; then per body the target itself. The locomotion
// variant observes exactly one object block, so psi is a contiguous slice.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sldr/errors.hpp"
#include "sldr/numerics.hpp"
#include "sldr/rng.hpp"

namespace sldr {

enum class TaskId { kPush, kPickPlace, kMulti2, kChain3 };
enum class Variant { kManipulation, kLocomotion };

inline std::string_view task_name(TaskId t) {
  switch (t) {
    case TaskId::kPush: return "push";
    case TaskId::kPickPlace: return "pickplace";
    case TaskId::kMulti2: return "multi2";
    case TaskId::kChain3: return "chain3";
  }
  return "?";
}

inline std::optional<TaskId> parse_task(std::string_view s) {
  for (TaskId t : {TaskId::kPush, TaskId::kPickPlace, TaskId::kMulti2,
                   TaskId::kChain3})
    if (task_name(t) == s) return t;
  return std::nullopt;
}

struct IndexRange {
  int begin = 0;
  int size = 0;
  int end() const { return begin + size; }
};

struct EnvSpec {
  TaskId task = TaskId::kPush;
  Variant variant = Variant::kManipulation;
  int obs_dim = 0;
  int action_dim = 0;
  int goal_dim = 0;
  Vector action_low;
  Vector action_high;
  int horizon = 50;
  double success_threshold = 0.05;
  // psi: one contiguous observation slice per object.
  std::vector<IndexRange> object_slices;
  // The part of the goal vector that belongs to each object.
  std::vector<IndexRange> goal_slices;
  int bodies_per_object = 1;

  int n_objects() const { return static_cast<int>(object_slices.size()); }
  // Observation / action size of the matching locomotion variant.
  int obj_obs_dim() const { return object_slices.front().size; }
  int obj_goal_dim() const { return goal_slices.front().size; }
  int obj_action_dim() const { return bodies_per_object == 1 ? 3 : 6; }
};

struct GoalObservation {
  Vector observation;
  Vector achieved_goal;
  Vector desired_goal;
};

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  friend bool operator==(const Pose2&, const Pose2&) = default;
};

struct Body {
  Pose2 pose;
  Pose2 velocity;  // pose change over the last tick

  friend bool operator==(const Body&, const Body&) = default;
};

// Full simulator state. Chain tasks store one hinge angle per adjacent body
// pair; the angle is the (unwrapped) relative orientation of the two blocks.
struct PlanarWorld {
  double gripper_x = 0.0;
  double gripper_y = 0.0;
  double aperture = 1.0;  // 1 open, 0 closed
  double gripper_vx = 0.0;
  double gripper_vy = 0.0;
  std::vector<Body> bodies;
  std::vector<std::array<double, 2>> targets;  // one per body
  std::vector<double> hinges;
  int grasped = -1;  // body index attached to the gripper
  double grasp_dx = 0.0;
  double grasp_dy = 0.0;

  friend bool operator==(const PlanarWorld&, const PlanarWorld&) = default;
};

// Geometry and dynamics constants shared by all tasks (workspace units).
struct PlanarGeometry {
  double half_extent = 0.4;       // workspace is [-h, h]^2
  double gripper_radius = 0.025;
  double body_radius = 0.025;
  double gripper_step = 0.05;     // max gripper translation per tick
  int substeps = 5;
  double grasp_radius = 0.04;
  double object_delta_limit = 0.05;  // locomotion per-step pose delta bound
  double block_width = 0.04;      // chain segment length, hinge to hinge
  double hinge_limit = std::numbers::pi;
  double rigid_threshold = 0.05;
  double chain_threshold = 0.02;
  double spawn_range = 0.15;       // targets are uniform in [-r, r]^2
  double spawn_min_radius = 0.1;   // object distance from the starting gripper
  double spawn_max_radius = 0.2;
  double park_x = -0.3;           // robot parking spot during locomotion
  double park_y = -0.3;
  double park_speed = 0.02;
};

struct TaskOptions {
  PlanarGeometry geometry;
  // Multi2: probability of the stacked (original) target layout; otherwise
  // targets are scattered on the table.
  double stack_probability = 0.5;
  int horizon = 50;
};

inline double wrap_angle(double a) {
  if (a > -std::numbers::pi && a <= std::numbers::pi) return a;
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a <= 0.0) a += two_pi;
  return a - std::numbers::pi;
}

inline int task_objects(TaskId t) { return t == TaskId::kMulti2 ? 2 : 1; }
inline int task_bodies_per_object(TaskId t) {
  return t == TaskId::kChain3 ? 3 : 1;
}
inline bool task_has_locomotion(TaskId t) { return t != TaskId::kMulti2; }

inline constexpr int kRobotFeatures = 5;
inline constexpr int kRelativeFeaturesPerBody = 3;

// Object block size for an object with `bodies` bodies.
inline constexpr int object_block_dim(int bodies) { return bodies * 10; }

inline EnvSpec make_env_spec(TaskId task, Variant variant,
                             const TaskOptions& opt = {}) {
  if (variant == Variant::kLocomotion && !task_has_locomotion(task))
    throw ArgumentError(std::string("task ") + std::string(task_name(task)) +
                        " has no locomotion variant");
  EnvSpec s;
  s.task = task;
  s.variant = variant;
  s.horizon = opt.horizon;
  s.bodies_per_object = task_bodies_per_object(task);
  s.success_threshold = task == TaskId::kChain3 ? opt.geometry.chain_threshold
                                                : opt.geometry.rigid_threshold;
  const int n_obj = task_objects(task);
  const int bpo = s.bodies_per_object;
  const int block = object_block_dim(bpo);
  if (variant == Variant::kManipulation) {
    s.obs_dim = kRobotFeatures + n_obj * block +
                n_obj * bpo * kRelativeFeaturesPerBody;
    for (int i = 0; i < n_obj; ++i)
      s.object_slices.push_back({kRobotFeatures + i * block, block});
    s.action_dim = 3;
    s.action_low = Vector::Constant(3, -1.0);
    s.action_high = Vector::Constant(3, 1.0);
  } else {
    s.obs_dim = block;
    s.object_slices.push_back({0, block});
    s.action_dim = bpo == 1 ? 3 : 6;
    s.action_low = Vector::Constant(s.action_dim, -opt.geometry.object_delta_limit);
    s.action_high = Vector::Constant(s.action_dim, opt.geometry.object_delta_limit);
  }
  s.goal_dim = 2 * bpo * n_obj;
  for (int i = 0; i < n_obj; ++i) s.goal_slices.push_back({2 * bpo * i, 2 * bpo});
  return s;
}

// Sparse reward: 0 when every body is within the threshold of its target
// (inclusive), otherwise -1.
inline double compute_reward(const Vector& achieved, const Vector& desired,
                             const EnvSpec& spec) {
  if (achieved.size() != desired.size() || achieved.size() != spec.goal_dim)
    throw ShapeError("compute_reward: goal lengths " +
                     std::to_string(achieved.size()) + " and " +
                     std::to_string(desired.size()) + ", expected " +
                     std::to_string(spec.goal_dim));
  for (Eigen::Index i = 0; i + 1 < achieved.size(); i += 2) {
    const double d = std::hypot(achieved(i) - desired(i),
                                achieved(i + 1) - desired(i + 1));
    if (!(d <= spec.success_threshold)) return -1.0;
  }
  return 0.0;
}

// Negative Euclidean goal distance (the dense baseline reward).
inline double dense_reward(const Vector& achieved, const Vector& desired) {
  if (achieved.size() != desired.size())
    throw ShapeError("dense_reward: goal length mismatch");
  return -(achieved - desired).norm();
}

// psi: the object-related features of object `object_index`.
inline Vector extract_object_state(const Vector& s, const EnvSpec& spec,
                                   int object_index) {
  if (object_index < 0 || object_index >= spec.n_objects())
    throw ArgumentError("extract_object_state: object index " +
                        std::to_string(object_index) + " out of range [0, " +
                        std::to_string(spec.n_objects()) + ")");
  if (s.size() != spec.obs_dim)
    throw ShapeError("extract_object_state: observation length " +
                     std::to_string(s.size()) + ", expected " +
                     std::to_string(spec.obs_dim));
  const IndexRange r = spec.object_slices[static_cast<std::size_t>(object_index)];
  return s.segment(r.begin, r.size);
}

inline Vector extract_object_goal(const Vector& g, const EnvSpec& spec,
                                  int object_index) {
  if (object_index < 0 || object_index >= spec.n_objects())
    throw ArgumentError("extract_object_goal: object index out of range");
  const IndexRange r = spec.goal_slices[static_cast<std::size_t>(object_index)];
  return g.segment(r.begin, r.size);
}

// Achieved goal read back from an observation (positions of every body).
inline Vector achieved_from_observation(const Vector& s, const EnvSpec& spec) {
  Vector g(spec.goal_dim);
  const int bpo = spec.bodies_per_object;
  for (int i = 0; i < spec.n_objects(); ++i) {
    const int base = spec.object_slices[static_cast<std::size_t>(i)].begin;
    for (int b = 0; b < bpo; ++b) {
      g(2 * (i * bpo + b)) = s(base + 6 * b);
      g(2 * (i * bpo + b) + 1) = s(base + 6 * b + 1);
    }
  }
  return g;
}

// Rewrites the target-dependent features of `s` for goal `g`.
inline Vector with_goal(const Vector& s, const Vector& g, const EnvSpec& spec) {
  if (g.size() != spec.goal_dim || s.size() != spec.obs_dim)
    throw ShapeError("with_goal: dimension mismatch");
  Vector out = s;
  const int bpo = spec.bodies_per_object;
  for (int i = 0; i < spec.n_objects(); ++i) {
    const int base = spec.object_slices[static_cast<std::size_t>(i)].begin;
    for (int b = 0; b < bpo; ++b) {
      const int gi = 2 * (i * bpo + b);
      const double tx = g(gi), ty = g(gi + 1);
      const double x = s(base + 6 * b), y = s(base + 6 * b + 1);
      out(base + 6 * bpo + 2 * b) = tx - x;
      out(base + 6 * bpo + 2 * b + 1) = ty - y;
      out(base + 8 * bpo + 2 * b) = tx;
      out(base + 8 * bpo + 2 * b + 1) = ty;
    }
  }
  return out;
}

namespace chain {

inline double unit_x(double theta) { return std::cos(theta); }
inline double unit_y(double theta) { return std::sin(theta); }

// Picks the representative of `candidate` closest to `previous` (no wrap jumps),
// then clamps it to the hinge limit.
inline double continue_hinge(double candidate, double previous, double limit) {
  const double unwrapped = previous + wrap_angle(candidate - previous);
  return std::clamp(unwrapped, -limit, limit);
}

// Rebuilds all block poses outward from block `anchor`, whose pose is kept,
// using the hinge angles in `hinges` (hinge j joins blocks j and j+1).
inline void rebuild_from(std::vector<Body>& blocks,
                         const std::vector<double>& hinges, int anchor,
                         double width) {
  const int n = static_cast<int>(blocks.size());
  const double half = 0.5 * width;
  for (int j = anchor + 1; j < n; ++j) {
    const Pose2& prev = blocks[static_cast<std::size_t>(j - 1)].pose;
    Pose2& cur = blocks[static_cast<std::size_t>(j)].pose;
    const double th = prev.theta + hinges[static_cast<std::size_t>(j - 1)];
    cur.theta = th;
    cur.x = prev.x + half * (unit_x(prev.theta) + unit_x(th));
    cur.y = prev.y + half * (unit_y(prev.theta) + unit_y(th));
  }
  for (int j = anchor - 1; j >= 0; --j) {
    const Pose2& next = blocks[static_cast<std::size_t>(j + 1)].pose;
    Pose2& cur = blocks[static_cast<std::size_t>(j)].pose;
    const double th = next.theta - hinges[static_cast<std::size_t>(j)];
    cur.theta = th;
    cur.x = next.x - half * (unit_x(next.theta) + unit_x(th));
    cur.y = next.y - half * (unit_y(next.theta) + unit_y(th));
  }
}

// Drag: block `leader` has been translated; every other block pivots about its
// hinge toward its previous far end, then hinge limits are enforced.
inline void follow_leader(std::vector<Body>& blocks, std::vector<double>& hinges,
                          int leader, double width, double limit) {
  const int n = static_cast<int>(blocks.size());
  const double half = 0.5 * width;
  bool clamped = false;
  for (int j = leader + 1; j < n; ++j) {
    const Pose2& a = blocks[static_cast<std::size_t>(j - 1)].pose;
    Pose2& b = blocks[static_cast<std::size_t>(j)].pose;
    const double hx = a.x + half * unit_x(a.theta);
    const double hy = a.y + half * unit_y(a.theta);
    const double ex = b.x + half * unit_x(b.theta);
    const double ey = b.y + half * unit_y(b.theta);
    double dx = ex - hx, dy = ey - hy;
    double len = std::hypot(dx, dy);
    const double th = len > 1e-12 ? std::atan2(dy, dx) : b.theta;
    auto& h = hinges[static_cast<std::size_t>(j - 1)];
    const double nh = continue_hinge(th - a.theta, h, limit);
    clamped |= nh != h + wrap_angle(th - a.theta - h);
    h = nh;
    b.theta = a.theta + h;
    b.x = hx + half * unit_x(b.theta);
    b.y = hy + half * unit_y(b.theta);
  }
  for (int j = leader - 1; j >= 0; --j) {
    const Pose2& a = blocks[static_cast<std::size_t>(j + 1)].pose;
    Pose2& b = blocks[static_cast<std::size_t>(j)].pose;
    const double hx = a.x - half * unit_x(a.theta);
    const double hy = a.y - half * unit_y(a.theta);
    const double ex = b.x - half * unit_x(b.theta);
    const double ey = b.y - half * unit_y(b.theta);
    const double dx = hx - ex, dy = hy - ey;
    const double len = std::hypot(dx, dy);
    const double th = len > 1e-12 ? std::atan2(dy, dx) : b.theta;
    auto& h = hinges[static_cast<std::size_t>(j)];
    const double nh = continue_hinge(a.theta - th, h, limit);
    clamped |= nh != h + wrap_angle(a.theta - th - h);
    h = nh;
    b.theta = a.theta - h;
    b.x = hx - half * unit_x(b.theta);
    b.y = hy - half * unit_y(b.theta);
  }
  if (clamped) rebuild_from(blocks, hinges, leader, width);
}

// Locomotion projection for a 3-block chain whose end blocks were displaced:
// the middle block is re-seated between the two end hinges (ends move
// symmetrically along the hinge axis if the gap is not one block width), the
// hinge angles are continued and clamped, and the chain is rebuilt around the
// middle block.
inline void project_ends(std::vector<Body>& blocks, std::vector<double>& hinges,
                         double width, double limit) {
  auto& b0 = blocks[0].pose;
  auto& b1 = blocks[1].pose;
  auto& b2 = blocks[2].pose;
  const double half = 0.5 * width;
  double h01x = b0.x + half * unit_x(b0.theta);
  double h01y = b0.y + half * unit_y(b0.theta);
  double h12x = b2.x - half * unit_x(b2.theta);
  double h12y = b2.y - half * unit_y(b2.theta);
  double dx = h12x - h01x, dy = h12y - h01y;
  const double len = std::hypot(dx, dy);
  double ux = unit_x(b1.theta), uy = unit_y(b1.theta);
  if (len > 1e-12) {
    ux = dx / len;
    uy = dy / len;
  }
  const double shift = 0.5 * (len - width);
  h01x += shift * ux;
  h01y += shift * uy;
  h12x -= shift * ux;
  h12y -= shift * uy;
  const double th1 = std::atan2(uy, ux);
  hinges[0] = continue_hinge(th1 - b0.theta, hinges[0], limit);
  hinges[1] = continue_hinge(b2.theta - th1, hinges[1], limit);
  b1.theta = th1;
  b1.x = 0.5 * (h01x + h12x);
  b1.y = 0.5 * (h01y + h12y);
  rebuild_from(blocks, hinges, 1, width);
}

}  // namespace chain

struct StepResult {
  GoalObservation obs;
  double reward = -1.0;
  bool done = false;
};

class PlanarEnv {
 public:
  PlanarEnv(TaskId task, Variant variant, TaskOptions options = {})
      : options_(options), spec_(make_env_spec(task, variant, options)) {}

  const EnvSpec& spec() const { return spec_; }
  const TaskOptions& options() const { return options_; }
  const PlanarWorld& world() const { return world_; }
  int steps_taken() const { return steps_; }
  bool done() const { return steps_ >= spec_.horizon; }

  // Replaces the simulator state; the step counter restarts at `steps`.
  void set_world(const PlanarWorld& w, int steps = 0) {
    world_ = w;
    steps_ = steps;
  }

  GoalObservation reset(std::uint64_t seed) {
    Rng rng(seed);
    const PlanarGeometry& geo = options_.geometry;
    world_ = PlanarWorld{};
    steps_ = 0;
    const double r = geo.spawn_range;
    auto spawn_near_gripper = [&](Body& b) {
      const double ang = rng.uniform(-std::numbers::pi, std::numbers::pi);
      const double rad = rng.uniform(geo.spawn_min_radius, geo.spawn_max_radius);
      b.pose.x = rad * std::cos(ang);
      b.pose.y = rad * std::sin(ang);
      b.pose.theta = rng.uniform(-std::numbers::pi, std::numbers::pi);
    };
    switch (spec_.task) {
      case TaskId::kPush:
      case TaskId::kPickPlace: {
        Body b;
        spawn_near_gripper(b);
        world_.bodies.push_back(b);
        world_.targets.push_back({rng.uniform(-r, r), rng.uniform(-r, r)});
        break;
      }
      case TaskId::kMulti2: {
        const std::array<double, 2> t0{rng.uniform(-r, r), rng.uniform(-r, r)};
        Body first;
        first.pose = {t0[0], t0[1], rng.uniform(-std::numbers::pi, std::numbers::pi)};
        Body second;
        spawn_near_gripper(second);
        const bool stacked = rng.uniform() < options_.stack_probability;
        std::array<double, 2> t1 = t0;
        if (!stacked) t1 = {rng.uniform(-r, r), rng.uniform(-r, r)};
        world_.bodies = {first, second};
        world_.targets = {t0, t1};
        break;
      }
      case TaskId::kChain3: {
        Body mid;
        mid.pose = {rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1), 0.0};
        world_.bodies = {Body{}, mid, Body{}};
        world_.hinges = {0.0, 0.0};
        chain::rebuild_from(world_.bodies, world_.hinges, 1, geo.block_width);
        const auto targets = chain_target(rng.below(2));
        world_.targets = {targets[0], targets[1], targets[2]};
        break;
      }
    }
    return observe();
  }

  // Target body positions of the two predefined chain poses.
  std::array<std::array<double, 2>, 3> chain_target(std::uint64_t which) const {
    std::vector<Body> blocks(3);
    blocks[1].pose = {0.0, 0.12, 0.0};
    std::vector<double> hinges = which == 0
                                     ? std::vector<double>{0.0, 0.0}
                                     : std::vector<double>{std::numbers::pi / 3,
                                                           std::numbers::pi / 3};
    chain::rebuild_from(blocks, hinges, 1, options_.geometry.block_width);
    std::array<std::array<double, 2>, 3> out{};
    for (std::size_t i = 0; i < 3; ++i)
      out[i] = {blocks[i].pose.x, blocks[i].pose.y};
    return out;
  }

  GoalObservation observe() const {
    GoalObservation o;
    o.achieved_goal = achieved_goal();
    o.desired_goal = desired_goal();
    o.observation = Vector::Zero(spec_.obs_dim);
    const int bpo = spec_.bodies_per_object;
    int at = 0;
    if (spec_.variant == Variant::kManipulation) {
      o.observation.head(kRobotFeatures) << world_.gripper_x, world_.gripper_y,
          world_.aperture, world_.gripper_vx, world_.gripper_vy;
      at = kRobotFeatures;
    }
    const int n_obj = spec_.variant == Variant::kManipulation
                          ? spec_.n_objects()
                          : task_objects(spec_.task);
    const int n_obs_obj = spec_.variant == Variant::kManipulation ? n_obj : 1;
    for (int i = 0; i < n_obs_obj; ++i) {
      for (int b = 0; b < bpo; ++b) {
        const Body& body = world_.bodies[static_cast<std::size_t>(i * bpo + b)];
        o.observation.segment(at, 6) << body.pose.x, body.pose.y,
            body.pose.theta, body.velocity.x, body.velocity.y,
            body.velocity.theta;
        at += 6;
      }
      for (int b = 0; b < bpo; ++b) {
        const std::size_t k = static_cast<std::size_t>(i * bpo + b);
        o.observation(at++) = world_.targets[k][0] - world_.bodies[k].pose.x;
        o.observation(at++) = world_.targets[k][1] - world_.bodies[k].pose.y;
      }
      for (int b = 0; b < bpo; ++b) {
        const std::size_t k = static_cast<std::size_t>(i * bpo + b);
        o.observation(at++) = world_.targets[k][0];
        o.observation(at++) = world_.targets[k][1];
      }
    }
    if (spec_.variant == Variant::kManipulation) {
      for (std::size_t k = 0; k < world_.bodies.size(); ++k) {
        o.observation(at++) = world_.bodies[k].pose.x - world_.gripper_x;
        o.observation(at++) = world_.bodies[k].pose.y - world_.gripper_y;
        o.observation(at++) = world_.grasped == static_cast<int>(k) ? 1.0 : 0.0;
      }
    }
    return o;
  }

  // Advances one tick with a robot action (manipulation) or an object action
  // (locomotion).
  StepResult step(const Vector& action) {
    if (spec_.variant == Variant::kLocomotion) return locomotion_step(action);
    begin_step(action);
    const Vector a = clip_action(action);
    const std::vector<Body> before = world_.bodies;
    robot_tick(a);
    finish_bodies(before);
    return end_step();
  }

  StepResult locomotion_step(const Vector& a_obj) {
    if (spec_.variant != Variant::kLocomotion)
      throw UsageError("locomotion_step: environment is a manipulation variant");
    begin_step(a_obj);
    const Vector a = clip_action(a_obj);
    const std::vector<Body> before = world_.bodies;
    const PlanarGeometry& geo = options_.geometry;
    if (spec_.bodies_per_object == 1) {
      Pose2& p = world_.bodies[0].pose;
      p.x += a(0);
      p.y += a(1);
      p.theta = wrap_angle(p.theta + a(2));
      clamp_body(world_.bodies[0]);
    } else {
      Pose2& b0 = world_.bodies[0].pose;
      Pose2& b2 = world_.bodies[2].pose;
      b0.x += a(0);
      b0.y += a(1);
      b0.theta += a(2);
      b2.x += a(3);
      b2.y += a(4);
      b2.theta += a(5);
      chain::project_ends(world_.bodies, world_.hinges, geo.block_width,
                          geo.hinge_limit);
      keep_chain_inside();
    }
    park_robot();
    finish_bodies(before);
    return end_step();
  }

 private:
  void begin_step(const Vector& action) {
    if (done())
      throw UsageError("step: episode already finished after " +
                       std::to_string(spec_.horizon) + " steps");
    if (action.size() != spec_.action_dim)
      throw ShapeError("step: action length " + std::to_string(action.size()) +
                       ", expected " + std::to_string(spec_.action_dim));
  }

  StepResult end_step() {
    ++steps_;
    StepResult r;
    r.obs = observe();
    r.reward = compute_reward(r.obs.achieved_goal, r.obs.desired_goal, spec_);
    r.done = done();
    return r;
  }

  Vector clip_action(const Vector& a) const {
    return a.cwiseMax(spec_.action_low).cwiseMin(spec_.action_high);
  }

  Vector achieved_goal() const {
    const int n = static_cast<int>(world_.bodies.size());
    Vector g(2 * n);
    for (int k = 0; k < n; ++k) {
      g(2 * k) = world_.bodies[static_cast<std::size_t>(k)].pose.x;
      g(2 * k + 1) = world_.bodies[static_cast<std::size_t>(k)].pose.y;
    }
    return g;
  }

  Vector desired_goal() const {
    const int n = static_cast<int>(world_.targets.size());
    Vector g(2 * n);
    for (int k = 0; k < n; ++k) {
      g(2 * k) = world_.targets[static_cast<std::size_t>(k)][0];
      g(2 * k + 1) = world_.targets[static_cast<std::size_t>(k)][1];
    }
    return g;
  }

  double body_limit() const {
    return options_.geometry.half_extent - options_.geometry.body_radius;
  }
  double gripper_limit() const {
    return options_.geometry.half_extent - options_.geometry.gripper_radius;
  }

  void clamp_body(Body& b) const {
    const double lim = body_limit();
    b.pose.x = std::clamp(b.pose.x, -lim, lim);
    b.pose.y = std::clamp(b.pose.y, -lim, lim);
  }

  // Translates the whole chain back inside the workspace (shape preserved).
  void keep_chain_inside() {
    const double lim = body_limit();
    double shift_x = 0.0, shift_y = 0.0;
    for (const Body& b : world_.bodies) {
      shift_x = std::max(shift_x, -lim - b.pose.x);
      shift_x = std::min(shift_x, lim - b.pose.x);
      shift_y = std::max(shift_y, -lim - b.pose.y);
      shift_y = std::min(shift_y, lim - b.pose.y);
    }
    for (Body& b : world_.bodies) {
      b.pose.x += shift_x;
      b.pose.y += shift_y;
    }
  }

  void finish_bodies(const std::vector<Body>& before) {
    for (std::size_t k = 0; k < world_.bodies.size(); ++k) {
      Body& b = world_.bodies[k];
      b.pose.theta = spec_.task == TaskId::kChain3 ? b.pose.theta
                                                    : wrap_angle(b.pose.theta);
      b.velocity = {b.pose.x - before[k].pose.x, b.pose.y - before[k].pose.y,
                    wrap_angle(b.pose.theta - before[k].pose.theta)};
    }
  }

  // Non-learning robot motion during locomotion: retract to the parking spot
  // at constant speed, then hold.
  void park_robot() {
    const PlanarGeometry& geo = options_.geometry;
    const double dx = geo.park_x - world_.gripper_x;
    const double dy = geo.park_y - world_.gripper_y;
    const double d = std::hypot(dx, dy);
    const double step = std::min(d, geo.park_speed);
    const double mx = d > 0.0 ? step * dx / d : 0.0;
    const double my = d > 0.0 ? step * dy / d : 0.0;
    world_.gripper_x += mx;
    world_.gripper_y += my;
    world_.gripper_vx = mx;
    world_.gripper_vy = my;
  }

  bool grasping_enabled() const { return spec_.task != TaskId::kPush; }

  void robot_tick(const Vector& a) {
    const PlanarGeometry& geo = options_.geometry;
    if (grasping_enabled()) {
      const bool was_closed = world_.aperture < 0.5;
      world_.aperture = 0.5 * (1.0 - a(2));
      const bool now_closed = world_.aperture < 0.5;
      if (!was_closed && now_closed) try_grasp();
      if (!now_closed) world_.grasped = -1;
    }
    const double gx0 = world_.gripper_x, gy0 = world_.gripper_y;
    const double dx = geo.gripper_step * a(0) / geo.substeps;
    const double dy = geo.gripper_step * a(1) / geo.substeps;
    const double glim = gripper_limit();
    for (int s = 0; s < geo.substeps; ++s) {
      world_.gripper_x = std::clamp(world_.gripper_x + dx, -glim, glim);
      world_.gripper_y = std::clamp(world_.gripper_y + dy, -glim, glim);
      if (world_.grasped >= 0) {
        carry_grasped();
      } else if (spec_.task == TaskId::kPush) {
        resolve_push(dx, dy);
      }
    }
    world_.gripper_vx = world_.gripper_x - gx0;
    world_.gripper_vy = world_.gripper_y - gy0;
  }

  void try_grasp() {
    const double r = options_.geometry.grasp_radius;
    int best = -1;
    double best_d = 0.0;
    for (std::size_t k = 0; k < world_.bodies.size(); ++k) {
      const auto& p = world_.bodies[k].pose;
      const double d = std::hypot(p.x - world_.gripper_x, p.y - world_.gripper_y);
      if (d <= r && (best < 0 || d <= best_d)) {
        best = static_cast<int>(k);
        best_d = d;
      }
    }
    world_.grasped = best;
    if (best >= 0) {
      const auto& p = world_.bodies[static_cast<std::size_t>(best)].pose;
      world_.grasp_dx = p.x - world_.gripper_x;
      world_.grasp_dy = p.y - world_.gripper_y;
    }
  }

  void carry_grasped() {
    Body& b = world_.bodies[static_cast<std::size_t>(world_.grasped)];
    b.pose.x = world_.gripper_x + world_.grasp_dx;
    b.pose.y = world_.gripper_y + world_.grasp_dy;
    clamp_body(b);
    if (spec_.task == TaskId::kChain3) {
      const PlanarGeometry& geo = options_.geometry;
      chain::follow_leader(world_.bodies, world_.hinges, world_.grasped,
                           geo.block_width, geo.hinge_limit);
      keep_chain_inside();
    }
  }

  // Kinematic overlap resolution: an overlapped body is pushed out along the
  // separating direction; if the wall stops it, the gripper is pushed back.
  void resolve_push(double dx, double dy) {
    const PlanarGeometry& geo = options_.geometry;
    const double contact = geo.gripper_radius + geo.body_radius;
    for (Body& b : world_.bodies) {
      double sx = b.pose.x - world_.gripper_x;
      double sy = b.pose.y - world_.gripper_y;
      double d = std::hypot(sx, sy);
      if (d >= contact) continue;
      if (d < 1e-12) {
        const double m = std::hypot(dx, dy);
        sx = m > 0.0 ? dx / m : 1.0;
        sy = m > 0.0 ? dy / m : 0.0;
        d = 1.0;
      }
      b.pose.x = world_.gripper_x + contact * sx / d;
      b.pose.y = world_.gripper_y + contact * sy / d;
      clamp_body(b);
      const double gx = world_.gripper_x - b.pose.x;
      const double gy = world_.gripper_y - b.pose.y;
      const double gd = std::hypot(gx, gy);
      if (gd < contact && gd > 1e-12) {
        const double glim = gripper_limit();
        world_.gripper_x = std::clamp(b.pose.x + contact * gx / gd, -glim, glim);
        world_.gripper_y = std::clamp(b.pose.y + contact * gy / gd, -glim, glim);
      }
    }
  }

  TaskOptions options_;
  EnvSpec spec_;
  PlanarWorld world_;
  int steps_ = 0;
};

}  // namespace sldr
