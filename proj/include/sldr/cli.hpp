#pragma once

// Command-line front end: train, evaluate, plot, replay.

#include <atomic>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sldr/checkpoint.hpp"
#include "sldr/config.hpp"
#include "sldr/metrics.hpp"
#include "sldr/trainer.hpp"

#ifndef SLDR_VERSION
#define SLDR_VERSION "0.1.0"
#endif

namespace sldr::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

namespace fs = std::filesystem;

inline std::atomic<bool>& interrupt_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

inline void on_interrupt(int) { interrupt_flag().store(true); }

inline std::string run_dir_for(const RunConfig& cfg, std::uint64_t seed) {
  if (cfg.seeds.size() == 1) return cfg.out_dir;
  return (fs::path(cfg.out_dir) / ("seed-" + std::to_string(seed))).string();
}

// The configuration a single-seed learner is built from.
inline RunConfig seed_config(RunConfig cfg, std::uint64_t seed) {
  cfg.seeds = {seed};
  return cfg;
}

// Settings that may change between an interrupted run and its resumption.
inline std::string resume_key(RunConfig cfg) {
  cfg.schedule.n_epochs = 0;
  cfg.out_dir.clear();
  cfg.checkpoint_every = 1;
  return to_config_text(cfg);
}

inline std::vector<SldOracle> load_oracles(const RunConfig& cfg) {
  if (cfg.stage != Stage::kManipulation || !uses_sld(cfg.mode)) return {};
  const OracleBundle b = decode_oracle_bundle(read_file(cfg.oracle_path));
  const EnvSpec spec = make_env_spec(cfg.task, Variant::kManipulation, cfg.env);
  return std::vector<SldOracle>(static_cast<std::size_t>(spec.n_objects()), b.oracle);
}

inline std::string manifest_text(const RunConfig& cfg, std::uint64_t seed,
                                 const std::string& config_source) {
  std::ostringstream o;
  o << "code_version = " << SLDR_VERSION << "\n"
    << "checkpoint_format = " << kCheckpointVersion << "\n"
    << "config_source = " << config_source << "\n"
    << "task = " << task_name(cfg.task) << "\n"
    << "stage = " << stage_name(cfg.stage) << "\n"
    << "mode = " << mode_name(cfg.mode) << "\n"
    << "seed = " << seed << "\n";
  if (!cfg.oracle_path.empty()) o << "oracle = " << cfg.oracle_path << "\n";
  return o.str();
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> checkpoint;
};

inline int train_one(const RunConfig& run, std::uint64_t seed, const TrainArgs& args,
                     std::ostream& log) {
  const RunConfig cfg = seed_config(run, seed);
  const std::string dir = run_dir_for(run, seed);
  fs::create_directories(fs::path(dir) / "checkpoints");
  const std::string config_text = to_config_text(cfg);
  write_file((fs::path(dir) / "config.txt").string(), config_text);
  write_file((fs::path(dir) / "manifest.txt").string(),
             manifest_text(cfg, seed, args.config));

  Learner learner(learner_config(cfg, seed, load_oracles(cfg)));
  int resume_epoch = -1;
  if (args.checkpoint) {
    LoadedCheckpoint ck = load_checkpoint(*args.checkpoint);
    RunConfig saved = parse_config(ck.meta.config_text, *args.checkpoint + " (stored config)");
    if (resume_key(saved) != resume_key(cfg))
      throw ConfigError("checkpoint '" + *args.checkpoint +
                        "' was written by a different configuration");
    if (saved.stage == Stage::kManipulation && uses_sld(saved.mode) &&
        !(ck.oracles == learner.config().oracles))
      throw ConfigError("checkpoint '" + *args.checkpoint +
                        "' was trained against a different oracle");
    learner.state() = std::move(ck.state);
    resume_epoch = learner.epoch();
    log << "resuming " << dir << " from epoch " << resume_epoch << "\n";
  }

  const std::string metrics_path = (fs::path(dir) / "metrics.csv").string();
  if (resume_epoch >= 0 && !fs::exists(metrics_path))
    throw FormatError("cannot resume: '" + metrics_path + "' is missing");
  MetricsWriter metrics(metrics_path, resume_epoch);
  const std::string latest = (fs::path(dir) / "checkpoint.ckpt").string();
  auto snapshot = [&] {
    char name[32];
    std::snprintf(name, sizeof name, "epoch-%06d.ckpt", learner.epoch());
    const std::string bytes = encode_checkpoint(learner, config_text);
    write_file((fs::path(dir) / "checkpoints" / name).string(), bytes);
    write_file(latest, bytes);
  };

  try {
    while (!learner.finished()) {
      const MetricsRow row =
          learner.run_epoch([] { return interrupt_flag().load(); });
      metrics.append(row);
      log << task_name(cfg.task) << " " << stage_name(cfg.stage) << " seed " << seed
          << " epoch " << row.epoch << " success " << format_real(row.test_success_rate)
          << "\n";
      if (row.epoch % run.checkpoint_every == 0) snapshot();
    }
  } catch (const NumericError& e) {
    write_file((fs::path(dir) / "diverged.ckpt").string(),
               encode_checkpoint(learner, config_text));
    throw NumericError(std::string(e.what()) + " (diagnostic state in " + dir +
                       "/diverged.ckpt)");
  }
  snapshot();
  if (cfg.stage == Stage::kLocomotion)
    write_file((fs::path(dir) / "oracle.bin").string(),
               encode_oracle_bundle(cfg.task, learner.best_oracle()));
  return kOk;
}

inline int cmd_train(const TrainArgs& args, std::ostream& log) {
  RunConfig cfg = parse_config(read_config_file(args.config), args.config);
  if (args.seed) cfg.seeds = {*args.seed};
  if (args.out) cfg.out_dir = *args.out;
  if (!cfg.oracle_path.empty() && !fs::exists(cfg.oracle_path))
    throw ConfigError(args.config + ": oracle '" + cfg.oracle_path + "' does not exist");
  if (args.checkpoint && cfg.seeds.size() != 1)
    throw ConfigError("--checkpoint resumes a single seed; pass --seed");
  for (std::uint64_t seed : cfg.seeds) train_one(cfg, seed, args, log);
  return kOk;
}

// Rebuilds the deterministic policy (and oracles) stored in a checkpoint.
struct StoredRun {
  RunConfig config;
  Learner learner;
};

inline StoredRun open_checkpoint(const std::string& path) {
  LoadedCheckpoint ck = load_checkpoint(path);
  RunConfig cfg = parse_config(ck.meta.config_text, path + " (stored config)");
  if (cfg.seeds.size() != 1) throw FormatError(path + ": stored config has several seeds");
  StoredRun run{cfg, Learner(learner_config(cfg, cfg.seeds.front(), std::move(ck.oracles)))};
  run.learner.state() = std::move(ck.state);
  return run;
}

inline int cmd_evaluate(const std::string& checkpoint, int rollouts, std::uint64_t seed,
                        std::ostream& out) {
  if (rollouts < 1) throw ArgumentError("--rollouts must be >= 1");
  const StoredRun run = open_checkpoint(checkpoint);
  const double rate = evaluate(run.learner.policy(), rollouts, seed);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", rate);
  out << buf << "\n";
  return kOk;
}

inline int cmd_replay(const std::string& checkpoint, std::uint64_t seed,
                      const std::optional<std::string>& out_path, std::ostream& out) {
  const StoredRun run = open_checkpoint(checkpoint);
  const Learner& l = run.learner;
  const Policy p = l.policy();
  PlanarEnv env(p.task, p.variant, evaluation_options(p.options));
  GoalObservation o = env.reset(seed);
  std::vector<TraceStep> steps;
  while (!env.done()) {
    TraceStep st;
    st.s = o.observation;
    st.desired = o.desired_goal;
    st.a = policy_action(p, o);
    StepResult r = env.step(st.a);
    st.r = r.reward;
    st.achieved = r.obs.achieved_goal;
    if (!l.config().oracles.empty()) {
      const Matrix q = l.sld_rewards(Matrix(st.s), Matrix(r.obs.observation));
      st.q = q.col(0);
    }
    steps.push_back(std::move(st));
    o = std::move(r.obs);
  }
  const std::string text = trace_csv(p.task, seed, env.spec().horizon, steps);
  if (out_path) {
    write_file(*out_path, text);
  } else {
    out << text;
  }
  return kOk;
}

// Each input is "label=file[,file...]" or a single metrics file.
inline CurveGroup parse_group(const std::string& spec) {
  CurveGroup g;
  std::string files = spec;
  if (const auto eq = spec.find('='); eq != std::string::npos) {
    g.label = spec.substr(0, eq);
    files = spec.substr(eq + 1);
  }
  std::stringstream ss(files);
  std::string f;
  while (std::getline(ss, f, ',')) {
    if (f.empty()) continue;
    std::vector<MetricsRow> rows = read_metrics_csv(f);
    if (rows.empty()) throw FormatError("'" + f + "' holds no metrics rows");
    g.runs.push_back(std::move(rows));
  }
  if (g.runs.empty()) throw ArgumentError("plot input '" + spec + "' names no file");
  if (g.label.empty()) g.label = fs::path(files).stem().string();
  return g;
}

inline int cmd_plot(const std::vector<std::string>& inputs, const std::string& out_path,
                    const std::string& title) {
  if (inputs.empty()) throw ArgumentError("plot needs at least one metrics file");
  std::vector<CurveBand> bands;
  for (const std::string& in : inputs) {
    const CurveGroup g = parse_group(in);
    try {
      bands.push_back(curve_band(g));
    } catch (const ArgumentError& e) {
      throw FormatError("group '" + g.label + "': " + e.what());
    }
  }
  const std::vector<int>& grid = bands.front().epochs;
  for (const CurveBand& b : bands)
    if (b.epochs != grid)
      throw FormatError("group '" + b.label + "' has a different epoch grid than '" +
                        bands.front().label + "'");
  write_file(out_path, render_learning_curves(bands, title));
  return kOk;
}

// Parses argv and dispatches; never throws.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Goal-conditioned manipulation learning with simulated locomotion demonstrations"};
  app.require_subcommand(1);
  app.set_version_flag("--version", SLDR_VERSION);

  TrainArgs targs;
  std::uint64_t seed_value = 1;
  std::string out_value, checkpoint_value;
  auto* train = app.add_subcommand("train", "Train from a configuration file");
  train->add_option("--config", targs.config, "Run configuration (key = value)")->required();
  train->add_option("--seed", seed_value, "Override the configured seed(s)");
  train->add_option("--out", out_value, "Override the output directory");
  train->add_option("--checkpoint", checkpoint_value, "Resume from this checkpoint");

  int rollouts = 100;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Deterministic test rollouts");
  evaluate_cmd->add_option("--checkpoint", checkpoint_value, "Checkpoint file")->required();
  evaluate_cmd->add_option("--rollouts", rollouts, "Number of rollouts")->check(CLI::PositiveNumber);
  evaluate_cmd->add_option("--seed", seed_value, "Reset seed");

  std::vector<std::string> inputs;
  std::string title;
  auto* plot = app.add_subcommand("plot", "Median/IQR learning curves as SVG");
  plot->add_option("inputs", inputs, "metrics.csv files or label=file,file,...")->required();
  plot->add_option("--out", out_value, "Output SVG path")->required();
  plot->add_option("--title", title, "Plot title");

  auto* replay = app.add_subcommand("replay", "Write one deterministic episode trace");
  replay->add_option("--checkpoint", checkpoint_value, "Checkpoint file")->required();
  replay->add_option("--seed", seed_value, "Reset seed");
  replay->add_option("--out", out_value, "Trace CSV path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (train->parsed()) {
      if (train->count("--seed")) targs.seed = seed_value;
      if (train->count("--out")) targs.out = out_value;
      if (train->count("--checkpoint")) targs.checkpoint = checkpoint_value;
      interrupt_flag().store(false);
      auto previous = std::signal(SIGINT, on_interrupt);
      int code = kOk;
      try {
        code = cmd_train(targs, err);
      } catch (...) {
        std::signal(SIGINT, previous);
        throw;
      }
      std::signal(SIGINT, previous);
      return code;
    }
    if (evaluate_cmd->parsed()) return cmd_evaluate(checkpoint_value, rollouts, seed_value, out);
    if (plot->parsed()) return cmd_plot(inputs, out_value, title);
    if (replay->parsed()) {
      std::optional<std::string> path;
      if (replay->count("--out")) path = out_value;
      return cmd_replay(checkpoint_value, seed_value, path, out);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
  return kUsage;
}

}  // namespace sldr::cli
