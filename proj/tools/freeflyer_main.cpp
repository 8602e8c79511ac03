// freeflyer command line: train / eval / track / bench.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure,
// 4 checkpoint/task mismatch.

#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "freeflyer/agent.hpp"
#include "freeflyer/checkpoint.hpp"
#include "freeflyer/config.hpp"
#include "freeflyer/evalkit.hpp"
#include "freeflyer/planner.hpp"
#include "freeflyer/vecenv.hpp"

namespace fs = std::filesystem;
using namespace ff;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitMismatch = 4;

int default_workers() {
  if (const char* w = std::getenv("FREEFLYER_WORKERS")) {
    int v = std::atoi(w);
    if (v >= 1) return v;
  }
  return 1;
}

struct CommonArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed = 1;
  int workers = default_workers();
  std::optional<std::string> task;
};

cfg::RunConfig load_config(const CommonArgs& args) {
  cfg::ConfigFile file = args.config_path.empty()
                             ? cfg::ConfigFile::parse_text("", "<defaults>")
                             : cfg::ConfigFile::parse_file(args.config_path);
  return cfg::load_run_config(file, args.task);
}

void write_text(const fs::path& path, const std::string& text) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw IoError("cannot write " + path.string());
  std::fputs(text.c_str(), f);
  std::fclose(f);
}

void write_curve_csv(const fs::path& path,
                     const std::vector<agent::EpochRow>& curve) {
  std::FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw IoError("cannot write " + path.string());
  std::fprintf(f,
               "epoch,mean_return,mean_final_distance,policy_loss,value_loss,"
               "entropy,clip_fraction,steps_per_second\n");
  for (const auto& r : curve)
    std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.epoch,
                 r.mean_return, r.mean_final_distance, r.policy_loss,
                 r.value_loss, r.entropy, r.clip_fraction,
                 r.steps_per_second);
  std::fclose(f);
}

int cmd_train(const CommonArgs& args, std::optional<int> num_envs,
              std::optional<int> epochs) {
  cfg::RunConfig rc = load_config(args);
  if (num_envs) rc.ppo.n_envs = *num_envs;
  if (epochs) rc.ppo.epochs = *epochs;
  cfg::finalize_run_config(rc);
  fs::create_directories(args.out_dir);

  auto save = [&](const fs::path& p, const net::PolicyNet& n) {
    ckpt::save_checkpoint(p, ckpt::Checkpoint::of(n, rc.env.task, rc.hash));
  };
  auto periodic = [&](int epoch, const net::PolicyNet& n) {
    char name[64];
    std::snprintf(name, sizeof name, "checkpoint_ep%06d.ckpt", epoch);
    save(fs::path(args.out_dir) / name, n);
  };
  agent::TrainResult result = agent::train(rc.env, rc.ppo, args.seed,
                                           args.workers, periodic, &std::cout);
  save(fs::path(args.out_dir) / "checkpoint.ckpt", result.net);
  write_curve_csv(fs::path(args.out_dir) / "curve.csv", result.curve);
  write_text(fs::path(args.out_dir) / "resolved.cfg", rc.resolved_text);
  write_text(fs::path(args.out_dir) / "run_manifest.txt",
             cfg::make_manifest("train", args.seed, rc,
                                {{"epochs", std::to_string(rc.ppo.epochs)},
                                 {"n_envs", std::to_string(rc.ppo.n_envs)},
                                 {"workers", std::to_string(args.workers)}}));
  std::cout << "train: wrote checkpoint + curve to " << args.out_dir << "\n";
  return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint_path,
             std::optional<int> num_envs, std::optional<int> steps,
             bool stochastic) {
  ckpt::Checkpoint c = ckpt::load_checkpoint(checkpoint_path);
  CommonArgs adjusted = args;
  if (!adjusted.task) adjusted.task = std::string(tasks::task_name(c.task));
  cfg::RunConfig rc = load_config(adjusted);
  if (num_envs) rc.eval.n_envs = *num_envs;
  if (steps) rc.eval.steps = *steps;
  if (stochastic) rc.eval.stochastic = true;
  cfg::finalize_run_config(rc);

  net::PolicyNet net = ckpt::to_net(c);
  auto metrics = evalkit::run_eval(net, rc.env, rc.eval, args.seed,
                                   args.workers);
  auto summary = evalkit::summarize(metrics);
  std::string manifest = cfg::make_manifest(
      "eval", args.seed, rc,
      {{"checkpoint", checkpoint_path},
       {"checkpoint_hash", c.config_hash},
       {"n_envs", std::to_string(rc.eval.n_envs)},
       {"steps", std::to_string(rc.eval.steps)},
       {"stochastic", rc.eval.stochastic ? "true" : "false"}});
  evalkit::write_report(metrics, summary, args.out_dir, manifest);
  write_text(fs::path(args.out_dir) / "resolved.cfg", rc.resolved_text);

  double mean_final = 0.0, succ = 0.0;
  for (int i = 0; i < metrics.n_envs; ++i) {
    mean_final += metrics.final_distance[static_cast<std::size_t>(i)];
    succ += metrics.success_pos_coarse[static_cast<std::size_t>(i)];
  }
  std::cout << "eval: n_envs=" << metrics.n_envs << " steps=" << metrics.steps
            << " mean_final_distance=" << mean_final / metrics.n_envs
            << " success@" << rc.eval.threshold_pos_coarse << "="
            << succ / metrics.n_envs << "\n";
  std::cout << "eval: reports written to " << args.out_dir << "\n";
  return kExitOk;
}

int cmd_track(const CommonArgs& args, const std::string& checkpoint_path,
              std::optional<std::string> shape, std::optional<int> steps) {
  ckpt::Checkpoint c = ckpt::load_checkpoint(checkpoint_path);
  if (c.task != tasks::TaskKind::track_xy_velocity)
    throw PolicyTaskMismatch("track: checkpoint was trained for '" +
                             std::string(tasks::task_name(c.task)) +
                             "', need 'trackxyvel'");
  CommonArgs adjusted = args;
  adjusted.task = std::string(tasks::task_name(c.task));
  cfg::RunConfig rc = load_config(adjusted);
  if (shape) rc.planner_shape = *shape;
  if (steps) rc.planner_steps = *steps;
  cfg::finalize_run_config(rc);

  net::PolicyNet net = ckpt::to_net(c);
  plan::ReferencePath path =
      plan::gen_path(plan::parse_shape(rc.planner_shape), rc.planner);
  vec::VecEnv env(rc.env, 1, args.seed, 1, /*auto_reset=*/false);
  auto log = plan::follow(net, env, path, rc.planner_steps, rc.planner);

  fs::create_directories(args.out_dir);
  {
    std::FILE* f = std::fopen(
        (fs::path(args.out_dir) / "tracking.csv").string().c_str(), "w");
    if (!f) throw IoError("cannot write tracking.csv");
    std::fprintf(f, "step,x,y,cmd_vx,cmd_vy,meas_vx,meas_vy,target_index\n");
    for (const auto& r : log)
      std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%ld\n", r.step,
                   r.x, r.y, r.cmd_vx, r.cmd_vy, r.meas_vx, r.meas_vy,
                   r.target_index);
    std::fclose(f);
  }
  write_text(fs::path(args.out_dir) / "resolved.cfg", rc.resolved_text);
  write_text(fs::path(args.out_dir) / "run_manifest.txt",
             cfg::make_manifest("track", args.seed, rc,
                                {{"checkpoint", checkpoint_path},
                                 {"shape", rc.planner_shape},
                                 {"steps", std::to_string(rc.planner_steps)}}));
  double err = 0.0;
  for (const auto& r : log)
    err += std::hypot(r.cmd_vx - r.meas_vx, r.cmd_vy - r.meas_vy);
  std::cout << "track: shape=" << rc.planner_shape << " steps=" << log.size()
            << " mean_velocity_error="
            << (log.empty() ? 0.0 : err / static_cast<double>(log.size()))
            << "\n";
  std::cout << "track: log written to " << args.out_dir << "\n";
  return kExitOk;
}

int cmd_bench(const CommonArgs& args, int num_envs, int steps) {
  cfg::RunConfig rc = load_config(args);
  cfg::finalize_run_config(rc);
  auto rep = vec::bench(rc.env, num_envs, steps, args.seed, args.workers);
  std::string text = vec::bench_report_text(rep, rc.hash, args.workers);
  std::cout << text;
  if (!args.out_dir.empty() && args.out_dir != "-") {
    fs::create_directories(args.out_dir);
    write_text(fs::path(args.out_dir) / "bench.txt", text);
  }
  return kExitOk;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const PolicyTaskMismatch& e) {
    std::cerr << "error (checkpoint mismatch): " << e.what() << "\n";
    return kExitMismatch;
  } catch (const NonFiniteLoss& e) {
    std::cerr << "error (numeric): " << e.what() << "\n";
    return kExitNumeric;
  } catch (const NonFiniteState& e) {
    std::cerr << "error (numeric): " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Error& e) {
    std::cerr << "error (config): " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"freeflyer: batched thruster-craft simulator and PPO toolkit"};
  app.require_subcommand(1);

  CommonArgs common;
  std::string checkpoint_path;
  std::optional<int> num_envs, steps, epochs;
  std::optional<std::string> shape;
  bool stochastic = false;
  std::string task_flag;

  auto add_common = [&](CLI::App* cmd, bool with_task) {
    cmd->add_option("--config", common.config_path, "config file path");
    cmd->add_option("--out", common.out_dir, "output directory");
    cmd->add_option("--seed", common.seed, "master seed");
    cmd->add_option("--workers", common.workers, "worker thread count");
    if (with_task)
      cmd->add_option("--task", task_flag,
                      "task kind (gotoxy, gotopose2d, trackxyvel, "
                      "trackxyovel, gotoxyz, gotopose3d, trackxyzvel)");
  };

  CLI::App* train = app.add_subcommand("train", "train a PPO policy");
  add_common(train, true);
  train->add_option("--num-envs", [&](const auto& v) {
    num_envs = std::stoi(v[0]);
    return true;
  }, "parallel environments");
  train->add_option("--epochs", [&](const auto& v) {
    epochs = std::stoi(v[0]);
    return true;
  }, "training epochs");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval, true);
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  eval->add_option("--num-envs", [&](const auto& v) {
    num_envs = std::stoi(v[0]);
    return true;
  }, "parallel eval environments");
  eval->add_option("--steps", [&](const auto& v) {
    steps = std::stoi(v[0]);
    return true;
  }, "episode steps");
  eval->add_flag("--stochastic", stochastic, "sample instead of argmax");

  CLI::App* track = app.add_subcommand("track", "follow a reference path");
  add_common(track, false);
  track->add_option("--checkpoint", checkpoint_path,
                    "trackxyvel checkpoint file")
      ->required();
  track->add_option("--shape", [&](const auto& v) {
    shape = v[0];
    return true;
  }, "circle | spiral | square");
  track->add_option("--steps", [&](const auto& v) {
    steps = std::stoi(v[0]);
    return true;
  }, "control steps to run");

  CLI::App* bench = app.add_subcommand("bench", "environment throughput");
  add_common(bench, true);
  int bench_envs = 4096, bench_steps = 1000;
  bench->add_option("--num-envs", bench_envs, "environments");
  bench->add_option("--steps", bench_steps, "steps to time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (!task_flag.empty()) common.task = task_flag;

  if (train->parsed())
    return guarded([&] { return cmd_train(common, num_envs, epochs); });
  if (eval->parsed())
    return guarded([&] {
      return cmd_eval(common, checkpoint_path, num_envs, steps, stochastic);
    });
  if (track->parsed())
    return guarded(
        [&] { return cmd_track(common, checkpoint_path, shape, steps); });
  if (bench->parsed())
    return guarded([&] { return cmd_bench(common, bench_envs, bench_steps); });
  return kExitConfig;
}
