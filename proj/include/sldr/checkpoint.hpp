#pragma once

// Binary checkpoint container: "SLDRCKPT", a format version, then named
// length-prefixed blocks. Integers and 64-bit floats are little-endian,
// matrices row-major.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sldr/errors.hpp"
#include "sldr/numerics.hpp"
#include "sldr/replay.hpp"
#include "sldr/rng.hpp"
#include "sldr/sld.hpp"
#include "sldr/trainer.hpp"

namespace sldr {

inline constexpr std::string_view kCheckpointMagic = "SLDRCKPT";
inline constexpr std::uint32_t kCheckpointVersion = 1;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(std::string_view s) {
    u64(s.size());
    buf_.append(s);
  }
  void vec(const Vector& v) {
    u64(static_cast<std::uint64_t>(v.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v(i));
  }
  void mat(const Matrix& m) {
    u64(static_cast<std::uint64_t>(m.rows()));
    u64(static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) f64(m(r, c));
  }

  const std::string& bytes() const { return buf_; }
  std::string take() { return std::move(buf_); }

 private:
  std::string buf_;
};

class ByteReader {
 public:
  ByteReader(std::string_view data, std::string context)
      : data_(data), context_(std::move(context)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s(data_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  Vector vec() {
    const std::uint64_t n = u64();
    need(n * 8);
    Vector v(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f64();
    return v;
  }
  Matrix mat() {
    const std::uint64_t r = u64();
    const std::uint64_t c = u64();
    if (c != 0 && r > (data_.size() - pos_) / 8 / c) fail("matrix larger than block");
    Matrix m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = f64();
    return m;
  }
  int count(std::uint64_t limit = 1u << 30) {
    const std::uint64_t n = u64();
    if (n > limit) fail("implausible count " + std::to_string(n));
    return static_cast<int>(n);
  }

  bool at_end() const { return pos_ == data_.size(); }
  void expect_end() const {
    if (!at_end()) fail("trailing bytes");
  }
  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(context_ + ": " + what + " at byte " + std::to_string(pos_));
  }

 private:
  void need(std::uint64_t n) const {
    if (n > data_.size() - pos_) fail("truncated data");
  }

  std::string_view data_;
  std::size_t pos_ = 0;
  std::string context_;
};

// Ordered named blocks.
struct BlockFile {
  std::vector<std::pair<std::string, std::string>> blocks;

  void add(std::string name, std::string payload) {
    blocks.emplace_back(std::move(name), std::move(payload));
  }

  const std::string* find(std::string_view name) const {
    for (const auto& [n, p] : blocks)
      if (n == name) return &p;
    return nullptr;
  }

  const std::string& at(std::string_view name) const {
    if (const std::string* p = find(name)) return *p;
    throw FormatError("checkpoint: missing block '" + std::string(name) + "'");
  }

  std::string encode() const {
    ByteWriter w;
    for (char c : kCheckpointMagic) w.u8(static_cast<std::uint8_t>(c));
    w.u32(kCheckpointVersion);
    w.u64(blocks.size());
    for (const auto& [name, payload] : blocks) {
      w.str(name);
      w.str(payload);
    }
    return w.take();
  }

  static BlockFile decode(std::string_view bytes) {
    ByteReader r(bytes, "checkpoint");
    for (char c : kCheckpointMagic)
      if (r.u8() != static_cast<std::uint8_t>(c)) r.fail("bad magic");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
      r.fail("unsupported format version " + std::to_string(version));
    BlockFile f;
    const int n = r.count(1u << 16);
    for (int i = 0; i < n; ++i) {
      std::string name = r.str();
      std::string payload = r.str();
      f.add(std::move(name), std::move(payload));
    }
    r.expect_end();
    return f;
  }
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, std::string_view bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot write '" + tmp + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("short write to '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw FormatError("cannot rename '" + tmp + "' to '" + path + "'");
}

// ---- value codecs ----

inline void put_layers(ByteWriter& w, const std::vector<DenseLayer>& layers) {
  w.u64(layers.size());
  for (const DenseLayer& l : layers) {
    w.mat(l.weight);
    w.vec(l.bias);
  }
}

inline std::vector<DenseLayer> get_layers(ByteReader& r) {
  std::vector<DenseLayer> out(static_cast<std::size_t>(r.count(64)));
  for (DenseLayer& l : out) {
    l.weight = r.mat();
    l.bias = r.vec();
  }
  return out;
}

inline void put(ByteWriter& w, const MlpParams& p) {
  w.u8(static_cast<std::uint8_t>(p.hidden_activation));
  w.u8(static_cast<std::uint8_t>(p.output_activation));
  put_layers(w, p.layers);
}

inline Activation get_activation(ByteReader& r) {
  const std::uint8_t a = r.u8();
  if (a > 2) r.fail("unknown activation code " + std::to_string(a));
  return static_cast<Activation>(a);
}

inline MlpParams get_mlp(ByteReader& r) {
  MlpParams p;
  p.hidden_activation = get_activation(r);
  p.output_activation = get_activation(r);
  p.layers = get_layers(r);
  try {
    validate(p);
  } catch (const std::exception& e) {
    r.fail(std::string("invalid network: ") + e.what());
  }
  return p;
}

inline void put(ByteWriter& w, const AdamState& s) {
  w.f64(s.hyper.learning_rate);
  w.f64(s.hyper.beta1);
  w.f64(s.hyper.beta2);
  w.f64(s.hyper.epsilon);
  w.i64(s.step_count);
  put_layers(w, s.first_moment);
  put_layers(w, s.second_moment);
}

inline AdamState get_adam(ByteReader& r) {
  AdamState s;
  s.hyper.learning_rate = r.f64();
  s.hyper.beta1 = r.f64();
  s.hyper.beta2 = r.f64();
  s.hyper.epsilon = r.f64();
  s.step_count = r.i64();
  s.first_moment = get_layers(r);
  s.second_moment = get_layers(r);
  return s;
}

inline void put(ByteWriter& w, const RunningNormalizer& n) {
  w.f64(n.count);
  w.vec(n.sum);
  w.vec(n.sum_sq);
  w.f64(n.clip_range);
  w.f64(n.eps);
}

inline RunningNormalizer get_normalizer(ByteReader& r) {
  RunningNormalizer n;
  n.count = r.f64();
  n.sum = r.vec();
  n.sum_sq = r.vec();
  n.clip_range = r.f64();
  n.eps = r.f64();
  if (n.sum.size() != n.sum_sq.size()) r.fail("normalizer moment lengths differ");
  return n;
}

inline void put(ByteWriter& w, const ActionBounds& b) {
  w.vec(b.low);
  w.vec(b.high);
}

inline ActionBounds get_bounds(ByteReader& r) {
  ActionBounds b;
  b.low = r.vec();
  b.high = r.vec();
  return b;
}

inline void put(ByteWriter& w, const InverseDynamicsModel& m) {
  put(w, m.net);
  put(w, m.opt);
  put(w, m.bounds);
}

inline InverseDynamicsModel get_inverse(ByteReader& r) {
  InverseDynamicsModel m;
  m.net = get_mlp(r);
  m.opt = get_adam(r);
  m.bounds = get_bounds(r);
  return m;
}

inline void put(ByteWriter& w, const SldOracle& o) {
  put(w, o.mu_obj);
  put(w, o.q_obj);
  put(w, o.inv);
  put(w, o.normalizer);
  w.u64(static_cast<std::uint64_t>(o.obj_obs_dim));
  w.u64(static_cast<std::uint64_t>(o.obj_goal_dim));
}

inline SldOracle get_oracle(ByteReader& r) {
  SldOracle o;
  o.mu_obj = get_mlp(r);
  o.q_obj = get_mlp(r);
  o.inv = get_inverse(r);
  o.normalizer = get_normalizer(r);
  o.obj_obs_dim = r.count(1 << 20);
  o.obj_goal_dim = r.count(1 << 20);
  return o;
}

inline void put(ByteWriter& w, const DdpgAgent& a) {
  put(w, a.actor);
  put(w, a.critic);
  put(w, a.actor_target);
  put(w, a.critic_target);
  put(w, a.actor_opt);
  put(w, a.critic_opt);
  w.f64(a.gamma);
  w.f64(a.tau);
  w.f64(a.noise_std);
  w.f64(a.random_action_prob);
  w.u8(a.clip_targets ? 1 : 0);
  put(w, a.bounds);
}

inline DdpgAgent get_agent(ByteReader& r) {
  DdpgAgent a;
  a.actor = get_mlp(r);
  a.critic = get_mlp(r);
  a.actor_target = get_mlp(r);
  a.critic_target = get_mlp(r);
  a.actor_opt = get_adam(r);
  a.critic_opt = get_adam(r);
  a.gamma = r.f64();
  a.tau = r.f64();
  a.noise_std = r.f64();
  a.random_action_prob = r.f64();
  a.clip_targets = r.u8() != 0;
  a.bounds = get_bounds(r);
  return a;
}

inline void put_vectors(ByteWriter& w, const std::vector<Vector>& vs) {
  w.u64(vs.size());
  for (const Vector& v : vs) w.vec(v);
}

inline std::vector<Vector> get_vectors(ByteReader& r) {
  std::vector<Vector> out(static_cast<std::size_t>(r.count()));
  for (Vector& v : out) v = r.vec();
  return out;
}

inline void put(ByteWriter& w, const EpisodeRecord& ep) {
  put_vectors(w, ep.obs);
  put_vectors(w, ep.achieved);
  w.vec(ep.desired);
  put_vectors(w, ep.actions);
  w.u64(ep.rewards.size());
  for (double x : ep.rewards) w.f64(x);
  w.mat(ep.sld);
}

inline EpisodeRecord get_episode(ByteReader& r) {
  EpisodeRecord ep;
  ep.obs = get_vectors(r);
  ep.achieved = get_vectors(r);
  ep.desired = r.vec();
  ep.actions = get_vectors(r);
  ep.rewards.resize(static_cast<std::size_t>(r.count()));
  for (double& x : ep.rewards) x = r.f64();
  ep.sld = r.mat();
  return ep;
}

inline void put(ByteWriter& w, const ReplayBuffer& b) {
  w.u64(static_cast<std::uint64_t>(b.capacity()));
  w.u64(static_cast<std::uint64_t>(b.horizon()));
  w.u64(static_cast<std::uint64_t>(b.cursor()));
  w.i64(b.total_stored());
  w.u64(static_cast<std::uint64_t>(b.size()));
  for (int i = 0; i < b.size(); ++i) put(w, b.slot(i));
}

inline ReplayBuffer get_buffer(ByteReader& r) {
  const int capacity = r.count();
  const int horizon = r.count();
  const int cursor = r.count();
  const std::int64_t total = r.i64();
  const int n = r.count();
  if (capacity <= 0 || horizon <= 0 || n > capacity || cursor >= capacity)
    r.fail("inconsistent replay buffer header");
  ReplayBuffer b(capacity, horizon);
  std::vector<EpisodeRecord> slots;
  slots.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) slots.push_back(get_episode(r));
  b.restore(std::move(slots), cursor, total);
  return b;
}

inline void put(ByteWriter& w, const Rng& rng) { w.str(rng.state()); }

inline Rng get_rng(ByteReader& r) {
  Rng rng;
  try {
    rng.set_state(r.str());
  } catch (const std::exception& e) {
    r.fail(std::string("bad generator state: ") + e.what());
  }
  return rng;
}

// ---- learner checkpoints ----

// Run description stored alongside the state; `config_text` is the flat
// key = value configuration that recreates the learner.
struct CheckpointMeta {
  std::string config_text;
  int epoch = 0;
  std::int64_t episodes_generated = 0;
};

inline std::string encode_learner_state(const LearnerState& s) {
  ByteWriter w;
  w.u64(static_cast<std::uint64_t>(s.epoch));
  put(w, s.agent);
  w.u64(s.sld_critics.size());
  for (std::size_t i = 0; i < s.sld_critics.size(); ++i) {
    put(w, s.sld_critics[i]);
    put(w, s.sld_critic_targets[i]);
    put(w, s.sld_critic_opts[i]);
  }
  w.u8(s.inverse ? 1 : 0);
  if (s.inverse) put(w, *s.inverse);
  w.u8(s.best_oracle ? 1 : 0);
  if (s.best_oracle) {
    put(w, *s.best_oracle);
    w.f64(s.best_success);
    w.u64(static_cast<std::uint64_t>(s.best_epoch));
  }
  put(w, s.normalizer);
  put(w, s.rng);
  w.u64(s.worker_rngs.size());
  for (const Rng& g : s.worker_rngs) put(w, g);
  return w.take();
}

inline LearnerState decode_learner_state(std::string_view bytes,
                                         std::string_view replay) {
  ByteReader r(bytes, "checkpoint block 'learner'");
  LearnerState s;
  s.epoch = r.count();
  s.agent = get_agent(r);
  const int n = r.count(64);
  for (int i = 0; i < n; ++i) {
    s.sld_critics.push_back(get_mlp(r));
    s.sld_critic_targets.push_back(get_mlp(r));
    s.sld_critic_opts.push_back(get_adam(r));
  }
  if (r.u8() != 0) s.inverse = get_inverse(r);
  if (r.u8() != 0) {
    s.best_oracle = get_oracle(r);
    s.best_success = r.f64();
    s.best_epoch = r.count();
  }
  s.normalizer = get_normalizer(r);
  s.rng = get_rng(r);
  const int workers = r.count(1 << 16);
  for (int i = 0; i < workers; ++i) s.worker_rngs.push_back(get_rng(r));
  r.expect_end();
  ByteReader rb(replay, "checkpoint block 'replay'");
  s.buffer = get_buffer(rb);
  rb.expect_end();
  return s;
}

inline std::string encode_oracles(const std::vector<SldOracle>& oracles) {
  ByteWriter w;
  w.u64(oracles.size());
  for (const SldOracle& o : oracles) put(w, o);
  return w.take();
}

inline std::vector<SldOracle> decode_oracles(std::string_view bytes) {
  ByteReader r(bytes, "checkpoint block 'oracles'");
  std::vector<SldOracle> out(static_cast<std::size_t>(r.count(64)));
  for (SldOracle& o : out) o = get_oracle(r);
  r.expect_end();
  return out;
}

inline std::string encode_checkpoint(const Learner& learner, const std::string& config_text) {
  BlockFile f;
  ByteWriter meta;
  meta.str(config_text);
  meta.u64(static_cast<std::uint64_t>(learner.epoch()));
  meta.i64(learner.episodes_generated());
  f.add("meta", meta.take());
  f.add("learner", encode_learner_state(learner.state()));
  ByteWriter replay;
  put(replay, learner.state().buffer);
  f.add("replay", replay.take());
  f.add("oracles", encode_oracles(learner.config().oracles));
  return f.encode();
}

struct LoadedCheckpoint {
  CheckpointMeta meta;
  LearnerState state;
  std::vector<SldOracle> oracles;
};

inline LoadedCheckpoint decode_checkpoint(std::string_view bytes) {
  const BlockFile f = BlockFile::decode(bytes);
  LoadedCheckpoint out;
  ByteReader m(f.at("meta"), "checkpoint block 'meta'");
  out.meta.config_text = m.str();
  out.meta.epoch = m.count();
  out.meta.episodes_generated = m.i64();
  m.expect_end();
  out.state = decode_learner_state(f.at("learner"), f.at("replay"));
  out.oracles = decode_oracles(f.at("oracles"));
  out.state.episodes_generated = out.meta.episodes_generated;
  if (out.state.epoch != out.meta.epoch)
    throw FormatError("checkpoint: epoch counters disagree");
  return out;
}

inline void save_checkpoint(const std::string& path, const Learner& learner,
                            const std::string& config_text) {
  write_file(path, encode_checkpoint(learner, config_text));
}

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path));
}

// Standalone bundle holding the frozen locomotion artifacts of one task.
inline std::string encode_oracle_bundle(TaskId task, const SldOracle& oracle) {
  BlockFile f;
  ByteWriter meta;
  meta.str(task_name(task));
  f.add("oracle_meta", meta.take());
  f.add("oracles", encode_oracles({oracle}));
  return f.encode();
}

struct OracleBundle {
  TaskId task = TaskId::kPush;
  SldOracle oracle;
};

inline OracleBundle decode_oracle_bundle(std::string_view bytes) {
  const BlockFile f = BlockFile::decode(bytes);
  ByteReader m(f.at("oracle_meta"), "checkpoint block 'oracle_meta'");
  const std::string name = m.str();
  m.expect_end();
  const std::optional<TaskId> task = parse_task(name);
  if (!task) throw FormatError("oracle bundle: unknown task '" + name + "'");
  std::vector<SldOracle> o = decode_oracles(f.at("oracles"));
  if (o.size() != 1) throw FormatError("oracle bundle: expected exactly one oracle");
  return {*task, std::move(o.front())};
}

}  // namespace sldr
