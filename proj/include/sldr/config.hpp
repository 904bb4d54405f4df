#pragma once

// Flat "key = value" run configuration with '#' comments.

#include <charconv>
#include <cmath>
#include <fstream>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sldr/errors.hpp"
#include "sldr/trainer.hpp"

namespace sldr {

struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  TaskId task = TaskId::kPush;
  Stage stage = Stage::kManipulation;
  Mode mode = Mode::kHerSparse;
  TrainSchedule schedule;
  Hyperparams hyper;
  TaskOptions env;
  std::string oracle_path;  // locomotion oracle bundle, SLD modes only
  std::string out_dir = "run";
  std::vector<std::uint64_t> seeds{1};
  int checkpoint_every = 5;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <typename T>
bool parse_number(const std::string& s, T& out) {
  const char* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && p == end;
}

}  // namespace detail

class ConfigParser {
 public:
  explicit ConfigParser(std::string source) : source_(std::move(source)) {}

  RunConfig parse(std::string_view text) {
    RunConfig cfg;
    std::map<std::string, int> seen;
    std::istringstream in{std::string(text)};
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
      ++line_no;
      line_ = line_no;
      const auto hash = raw.find('#');
      const std::string line = detail::trim(raw.substr(0, hash));
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail("expected 'key = value', got '" + line + "'");
      key_ = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      if (key_.empty()) fail("missing key before '='");
      if (auto it = seen.find(key_); it != seen.end())
        fail("duplicate key '" + key_ + "' (first set on line " +
             std::to_string(it->second) + ")");
      seen[key_] = line_no;
      if (value.empty()) fail("key '" + key_ + "' has an empty value");
      apply(cfg, value);
    }
    line_ = 0;
    key_.clear();
    try {
      cfg.schedule.validate();
    } catch (const std::exception& e) {
      throw ConfigError(source_ + ": " + e.what());
    }
    if (cfg.stage == Stage::kLocomotion && !task_has_locomotion(cfg.task))
      throw ConfigError(source_ + ": task '" + std::string(task_name(cfg.task)) +
                        "' has no locomotion stage");
    if (cfg.stage == Stage::kManipulation && uses_sld(cfg.mode) && cfg.oracle_path.empty())
      throw ConfigError(source_ + ": mode '" + std::string(mode_name(cfg.mode)) +
                        "' requires key 'oracle'");
    return cfg;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw ConfigError(source_ + ":" + std::to_string(line_) + ": " + what);
  }

  int as_int(const std::string& v) const {
    int x = 0;
    if (!detail::parse_number(v, x)) fail("key '" + key_ + "': '" + v + "' is not an integer");
    return x;
  }
  std::uint64_t as_u64(const std::string& v) const {
    std::uint64_t x = 0;
    if (!detail::parse_number(v, x))
      fail("key '" + key_ + "': '" + v + "' is not a non-negative integer");
    return x;
  }
  double as_real(const std::string& v) const {
    double x = 0.0;
    if (!detail::parse_number(v, x) || !std::isfinite(x))
      fail("key '" + key_ + "': '" + v + "' is not a finite number");
    return x;
  }
  bool as_bool(const std::string& v) const {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail("key '" + key_ + "': '" + v + "' is not a boolean");
  }
  double as_probability(const std::string& v) const {
    const double x = as_real(v);
    if (x < 0.0 || x > 1.0) fail("key '" + key_ + "' must lie in [0, 1]");
    return x;
  }
  double as_positive(const std::string& v) const {
    const double x = as_real(v);
    if (!(x > 0.0)) fail("key '" + key_ + "' must be positive");
    return x;
  }
  int as_count(const std::string& v, int min = 1) const {
    const int x = as_int(v);
    if (x < min) fail("key '" + key_ + "' must be >= " + std::to_string(min));
    return x;
  }

  void apply(RunConfig& c, const std::string& v) {
    const std::string& k = key_;
    TrainSchedule& s = c.schedule;
    Hyperparams& h = c.hyper;
    if (k == "task") {
      const auto t = parse_task(v);
      if (!t) fail("unknown task '" + v + "' (push, pickplace, multi2, chain3)");
      c.task = *t;
    } else if (k == "stage") {
      if (v == "locomotion") c.stage = Stage::kLocomotion;
      else if (v == "manipulation") c.stage = Stage::kManipulation;
      else fail("unknown stage '" + v + "' (locomotion, manipulation)");
    } else if (k == "mode") {
      const auto m = parse_mode(v);
      if (!m) fail("unknown mode '" + v + "'");
      c.mode = *m;
    } else if (k == "n_epochs") {
      s.n_epochs = as_count(v, 0);
    } else if (k == "n_cycles") {
      s.n_cycles = as_count(v);
    } else if (k == "n_rollout_workers") {
      s.n_rollout_workers = as_count(v);
    } else if (k == "n_rollouts_per_worker") {
      s.n_rollouts_per_worker = as_count(v);
    } else if (k == "n_updates") {
      s.n_updates = as_count(v);
    } else if (k == "batch_size") {
      s.batch_size = as_count(v);
    } else if (k == "eval_rollouts") {
      s.eval_rollouts = as_count(v);
    } else if (k == "seed") {
      c.seeds = {as_u64(v)};
    } else if (k == "seeds") {
      c.seeds.clear();
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) c.seeds.push_back(as_u64(detail::trim(item)));
      if (c.seeds.empty()) fail("key 'seeds' lists no seed");
    } else if (k == "gamma") {
      h.gamma = as_real(v);
      if (!(h.gamma > 0.0 && h.gamma < 1.0)) fail("key 'gamma' must lie in (0, 1)");
    } else if (k == "tau") {
      h.tau = as_real(v);
      if (!(h.tau > 0.0 && h.tau <= 1.0)) fail("key 'tau' must lie in (0, 1]");
    } else if (k == "actor_lr") {
      h.actor_lr = as_positive(v);
    } else if (k == "critic_lr") {
      h.critic_lr = as_positive(v);
    } else if (k == "inverse_lr") {
      h.inverse_lr = as_positive(v);
    } else if (k == "hidden") {
      h.hidden = as_count(v);
    } else if (k == "k_future") {
      h.k_future = as_count(v, 0);
    } else if (k == "buffer_episodes") {
      h.buffer_episodes = as_count(v);
    } else if (k == "noise_std") {
      h.noise_std = as_real(v);
      if (*h.noise_std < 0.0) fail("key 'noise_std' must be >= 0");
    } else if (k == "random_action_prob") {
      h.random_action_prob = as_probability(v);
    } else if (k == "clip_obs") {
      h.clip_obs = as_positive(v);
    } else if (k == "norm_eps") {
      h.norm_eps = as_positive(v);
    } else if (k == "clip_targets") {
      h.clip_targets = as_bool(v);
    } else if (k == "refresh_sld_on_relabel") {
      h.refresh_sld_on_relabel = as_bool(v);
    } else if (k == "naive_sld") {
      h.naive_sld = as_bool(v);
    } else if (k == "record_wall_time") {
      h.record_wall_time = as_bool(v);
    } else if (k == "stack_probability") {
      c.env.stack_probability = as_probability(v);
    } else if (k == "horizon") {
      c.env.horizon = as_count(v);
    } else if (k == "oracle") {
      c.oracle_path = v;
    } else if (k == "out") {
      c.out_dir = v;
    } else if (k == "checkpoint_every") {
      c.checkpoint_every = as_count(v);
    } else {
      fail("unknown key '" + k + "'");
    }
  }

  std::string source_;
  int line_ = 0;
  std::string key_;
};

inline RunConfig parse_config(std::string_view text, std::string source = "<config>") {
  return ConfigParser(std::move(source)).parse(text);
}

inline std::string read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Canonical text form; parse_config(to_config_text(c)) reproduces c.
inline std::string to_config_text(const RunConfig& c) {
  std::ostringstream o;
  o.precision(17);
  const TrainSchedule& s = c.schedule;
  const Hyperparams& h = c.hyper;
  o << "task = " << task_name(c.task) << "\n"
    << "stage = " << stage_name(c.stage) << "\n"
    << "mode = " << mode_name(c.mode) << "\n"
    << "n_epochs = " << s.n_epochs << "\n"
    << "n_cycles = " << s.n_cycles << "\n"
    << "n_rollout_workers = " << s.n_rollout_workers << "\n"
    << "n_rollouts_per_worker = " << s.n_rollouts_per_worker << "\n"
    << "n_updates = " << s.n_updates << "\n"
    << "batch_size = " << s.batch_size << "\n"
    << "eval_rollouts = " << s.eval_rollouts << "\n";
  o << "seeds = ";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) o << (i ? "," : "") << c.seeds[i];
  o << "\n"
    << "gamma = " << h.gamma << "\n"
    << "tau = " << h.tau << "\n"
    << "actor_lr = " << h.actor_lr << "\n"
    << "critic_lr = " << h.critic_lr << "\n"
    << "inverse_lr = " << h.inverse_lr << "\n"
    << "hidden = " << h.hidden << "\n"
    << "k_future = " << h.k_future << "\n"
    << "buffer_episodes = " << h.buffer_episodes << "\n";
  if (h.noise_std) o << "noise_std = " << *h.noise_std << "\n";
  if (h.random_action_prob) o << "random_action_prob = " << *h.random_action_prob << "\n";
  o << "clip_obs = " << h.clip_obs << "\n"
    << "norm_eps = " << h.norm_eps << "\n"
    << "clip_targets = " << (h.clip_targets ? "true" : "false") << "\n"
    << "refresh_sld_on_relabel = " << (h.refresh_sld_on_relabel ? "true" : "false") << "\n"
    << "naive_sld = " << (h.naive_sld ? "true" : "false") << "\n"
    << "record_wall_time = " << (h.record_wall_time ? "true" : "false") << "\n"
    << "stack_probability = " << c.env.stack_probability << "\n"
    << "horizon = " << c.env.horizon << "\n";
  if (!c.oracle_path.empty()) o << "oracle = " << c.oracle_path << "\n";
  o << "out = " << c.out_dir << "\n"
    << "checkpoint_every = " << c.checkpoint_every << "\n";
  return o.str();
}

inline LearnerConfig learner_config(const RunConfig& c, std::uint64_t seed,
                                    std::vector<SldOracle> oracles) {
  LearnerConfig lc;
  lc.task = c.task;
  lc.stage = c.stage;
  lc.mode = c.mode;
  lc.schedule = c.schedule;
  lc.schedule.seed = seed;
  lc.hyper = c.hyper;
  lc.env = c.env;
  lc.oracles = std::move(oracles);
  return lc;
}

}  // namespace sldr
