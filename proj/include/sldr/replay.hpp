#pragma once

// Episode ring buffer and hindsight relabeling with the "future" strategy.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sldr/errors.hpp"
#include "sldr/numerics.hpp"
#include "sldr/rng.hpp"

namespace sldr {

// One fixed-length episode. obs/achieved hold horizon+1 entries, the per-step
// arrays hold horizon entries. sld has one column per step and one row per
// SLD reward stream (zero rows when SLD rewards are not in use).
struct EpisodeRecord {
  std::vector<Vector> obs;
  std::vector<Vector> achieved;
  Vector desired;
  std::vector<Vector> actions;
  std::vector<double> rewards;
  Matrix sld;

  int length() const { return static_cast<int>(actions.size()); }

  friend bool operator==(const EpisodeRecord& a, const EpisodeRecord& b) {
    return a.obs == b.obs && a.achieved == b.achieved &&
           a.desired.size() == b.desired.size() && a.desired == b.desired &&
           a.actions == b.actions && a.rewards == b.rewards &&
           a.sld.rows() == b.sld.rows() && a.sld.cols() == b.sld.cols() &&
           a.sld == b.sld;
  }
};

struct Transition {
  Vector s;
  Vector a;
  double r = -1.0;
  Vector q;  // SLD rewards, one per object (empty when unused)
  Vector s_next;
  Vector achieved;
  Vector achieved_next;
  Vector desired;
  bool relabeled = false;
  int episode = 0;
  int t = 0;
  int goal_index = -1;  // index into achieved[] the relabeled goal came from
};

class ReplayBuffer {
 public:
  ReplayBuffer() = default;
  ReplayBuffer(int capacity, int horizon) : capacity_(capacity), horizon_(horizon) {
    if (capacity <= 0) throw ArgumentError("ReplayBuffer: capacity must be positive");
    if (horizon <= 0) throw ArgumentError("ReplayBuffer: horizon must be positive");
    episodes_.reserve(static_cast<std::size_t>(capacity));
  }

  int capacity() const { return capacity_; }
  int horizon() const { return horizon_; }
  int size() const { return static_cast<int>(episodes_.size()); }
  bool empty() const { return episodes_.empty(); }
  int cursor() const { return cursor_; }
  std::int64_t total_stored() const { return total_stored_; }

  // Episodes from oldest to newest.
  std::vector<const EpisodeRecord*> ordered() const {
    std::vector<const EpisodeRecord*> out;
    const int n = size();
    const int start = n < capacity_ ? 0 : cursor_;
    for (int i = 0; i < n; ++i)
      out.push_back(&episodes_[static_cast<std::size_t>((start + i) % n)]);
    return out;
  }

  const EpisodeRecord& slot(int i) const {
    return episodes_.at(static_cast<std::size_t>(i));
  }

  void store_episode(EpisodeRecord ep) {
    if (ep.length() != horizon_ ||
        static_cast<int>(ep.obs.size()) != horizon_ + 1 ||
        static_cast<int>(ep.achieved.size()) != horizon_ + 1 ||
        static_cast<int>(ep.rewards.size()) != horizon_)
      throw ArgumentError("store_episode: episode length " +
                          std::to_string(ep.length()) + ", expected " +
                          std::to_string(horizon_));
    if (size() < capacity_) {
      episodes_.push_back(std::move(ep));
    } else {
      episodes_[static_cast<std::size_t>(cursor_)] = std::move(ep);
    }
    cursor_ = (cursor_ + 1) % capacity_;
    ++total_stored_;
  }

  // Restores the exact ring layout (used when loading checkpoints).
  void restore(std::vector<EpisodeRecord> slots, int cursor,
               std::int64_t total_stored) {
    if (static_cast<int>(slots.size()) > capacity_)
      throw FormatError("ReplayBuffer: more slots than capacity");
    episodes_ = std::move(slots);
    cursor_ = cursor;
    total_stored_ = total_stored;
  }

 private:
  int capacity_ = 1;
  int horizon_ = 1;
  std::vector<EpisodeRecord> episodes_;
  int cursor_ = 0;
  std::int64_t total_stored_ = 0;
};

// Callbacks used when a transition receives a new goal.
struct RelabelHooks {
  // Reward for reaching `achieved_next` when the goal is `goal`.
  std::function<double(const Vector& achieved_next, const Vector& goal)> reward_fn;
  // Rewrites goal-dependent observation features; identity when empty.
  std::function<Vector(const Vector& s, const Vector& goal)> retarget_fn;
  // Recomputes q in place for the given (relabeled) transitions; optional.
  std::function<void(std::span<Transition* const>)> sld_fn;
};

inline double relabel_probability(int k_future) {
  return k_future <= 0 ? 0.0 : 1.0 - 1.0 / (1.0 + k_future);
}

// Draws `batch_size` uniform transitions; each is relabeled with probability
// k/(k+1) using the achieved goal of a strictly later step in its episode.
inline std::vector<Transition> sample_her_batch(const ReplayBuffer& buf,
                                                int batch_size, int k_future,
                                                const RelabelHooks& hooks,
                                                Rng& rng) {
  if (buf.empty()) throw UsageError("sample_her_batch: replay buffer is empty");
  if (batch_size <= 0) throw ArgumentError("sample_her_batch: batch_size must be positive");
  const double p = relabel_probability(k_future);
  const int horizon = buf.horizon();
  std::vector<Transition> out(static_cast<std::size_t>(batch_size));
  std::vector<Transition*> relabeled;
  for (auto& tr : out) {
    const int e = static_cast<int>(rng.below(static_cast<std::uint64_t>(buf.size())));
    const int t = static_cast<int>(rng.below(static_cast<std::uint64_t>(horizon)));
    const bool relabel = rng.uniform() < p;
    const EpisodeRecord& ep = buf.slot(e);
    const auto ti = static_cast<std::size_t>(t);
    tr.episode = e;
    tr.t = t;
    tr.a = ep.actions[ti];
    tr.achieved = ep.achieved[ti];
    tr.achieved_next = ep.achieved[ti + 1];
    if (ep.sld.rows() > 0) tr.q = ep.sld.col(t);
    if (!relabel) {
      tr.s = ep.obs[ti];
      tr.s_next = ep.obs[ti + 1];
      tr.r = ep.rewards[ti];
      tr.desired = ep.desired;
      continue;
    }
    const int future = t + 1 +
        static_cast<int>(rng.below(static_cast<std::uint64_t>(horizon - t)));
    tr.relabeled = true;
    tr.goal_index = future;
    tr.desired = ep.achieved[static_cast<std::size_t>(future)];
    if (hooks.retarget_fn) {
      tr.s = hooks.retarget_fn(ep.obs[ti], tr.desired);
      tr.s_next = hooks.retarget_fn(ep.obs[ti + 1], tr.desired);
    } else {
      tr.s = ep.obs[ti];
      tr.s_next = ep.obs[ti + 1];
    }
    tr.r = hooks.reward_fn(tr.achieved_next, tr.desired);
    relabeled.push_back(&tr);
  }
  if (hooks.sld_fn && !relabeled.empty()) hooks.sld_fn(relabeled);
  return out;
}

}  // namespace sldr
