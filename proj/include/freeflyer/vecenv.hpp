#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <functional>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "freeflyer/dynamics.hpp"
#include "freeflyer/tasks.hpp"

namespace ff::vec {

using dyn::BodyParams;
using dyn::RigidState;
using dyn::ThrusterLayout;
using geom::Vec3;
using tasks::TaskGoal;
using tasks::TaskKind;

// Static-chunk fork/join pool. Each item is owned by exactly one worker per
// run; per-item work must not touch any other item's state, which keeps the
// result independent of the worker count.
class WorkerPool {
 public:
  explicit WorkerPool(int threads = 1) { start(threads); }

  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  ~WorkerPool() { stop(); }

  int size() const { return static_cast<int>(threads_.size()) + 1; }

  // f(begin, end) over a static partition of [0, n).
  void run(int n, const std::function<void(int, int)>& f) {
    if (n <= 0) return;
    const int workers = size();
    if (workers == 1 || n == 1) {
      f(0, n);
      return;
    }
    {
      std::unique_lock lk(mu_);
      task_ = &f;
      task_n_ = n;
      pending_ = static_cast<int>(threads_.size());
      ++generation_;
    }
    cv_start_.notify_all();
    // the calling thread takes the first chunk
    auto [b, e] = chunk(0, n, workers);
    if (b < e) run_guarded(f, b, e);
    {
      std::unique_lock lk(mu_);
      cv_done_.wait(lk, [this] { return pending_ == 0; });
      task_ = nullptr;
    }
    if (error_) {
      auto err = error_;
      error_ = nullptr;
      std::rethrow_exception(err);
    }
  }

 private:
  static std::pair<int, int> chunk(int w, int n, int workers) {
    int b = static_cast<int>(static_cast<long long>(n) * w / workers);
    int e = static_cast<int>(static_cast<long long>(n) * (w + 1) / workers);
    return {b, e};
  }

  void run_guarded(const std::function<void(int, int)>& f, int b, int e) {
    try {
      f(b, e);
    } catch (...) {
      std::lock_guard lk(err_mu_);
      if (!error_) error_ = std::current_exception();
    }
  }

  void start(int threads) {
    int extra = std::max(0, threads - 1);
    for (int w = 0; w < extra; ++w) {
      threads_.emplace_back([this, w] { worker_loop(w + 1); });
    }
  }

  void worker_loop(int index) {
    std::uint64_t seen = 0;
    for (;;) {
      const std::function<void(int, int)>* task = nullptr;
      int n = 0;
      {
        std::unique_lock lk(mu_);
        cv_start_.wait(lk, [&] { return stop_ || generation_ != seen; });
        if (stop_) return;
        seen = generation_;
        task = task_;
        n = task_n_;
      }
      auto [b, e] = chunk(index, n, size());
      if (b < e) run_guarded(*task, b, e);
      {
        std::lock_guard lk(mu_);
        if (--pending_ == 0) cv_done_.notify_all();
      }
    }
  }

  void stop() {
    {
      std::lock_guard lk(mu_);
      stop_ = true;
    }
    cv_start_.notify_all();
    for (auto& t : threads_) t.join();
  }

  std::vector<std::thread> threads_;
  std::mutex mu_, err_mu_;
  std::condition_variable cv_start_, cv_done_;
  const std::function<void(int, int)>* task_ = nullptr;
  int task_n_ = 0;
  int pending_ = 0;
  std::uint64_t generation_ = 0;
  bool stop_ = false;
  std::exception_ptr error_;
};

struct SimParams {
  double control_hz = 10.0;  // 5 or 10
  int substeps = 10;
  int horizon = 500;
  double out_of_bounds_dist = 10.0;

  double control_dt() const { return 1.0 / control_hz; }

  void validate() const {
    if (control_hz != 5.0 && control_hz != 10.0)
      throw ConfigInvalid("sim: control_hz must be 5 or 10");
    if (substeps < 1) throw ConfigInvalid("sim: substeps must be >= 1");
    if (horizon < 1) throw ConfigInvalid("sim: horizon must be >= 1");
    if (!(out_of_bounds_dist > 0.0))
      throw ConfigInvalid("sim: out_of_bounds_dist must be > 0");
  }
};

struct EnvConfig {
  TaskKind task = TaskKind::go_to_xy;
  BodyParams body = dyn::default_body_3dof();
  ThrusterLayout layout = dyn::default_layout_3dof();
  SimParams sim;
  tasks::GoalParams goal;
  tasks::SpawnParams spawn = tasks::SpawnParams::defaults(TaskKind::go_to_xy);
  tasks::RewardParams reward;

  static EnvConfig defaults(TaskKind task) {
    EnvConfig c;
    c.task = task;
    if (!tasks::is_planar(task)) {
      c.body = dyn::default_body_6dof();
      c.layout = dyn::default_layout_6dof();
    }
    c.spawn = tasks::SpawnParams::defaults(task);
    return c;
  }

  void validate() const {
    body.validate();
    layout.validate(tasks::dof_mode(task));
    sim.validate();
    int need = tasks::is_planar(task) ? 3 : 6;
    int rank = dyn::wrench_rank(layout);
    if (rank < need)
      throw ConfigInvalid("thrusters: wrench rank " + std::to_string(rank) +
                          " < " + std::to_string(need) +
                          " required for the task's DoF class");
  }
};

struct StepBatch {
  std::vector<double> observations;  // n_envs x obs_dim, row-major
  std::vector<double> rewards;
  std::vector<std::uint8_t> dones;
  std::vector<std::uint8_t> reset_mask;
  std::vector<std::uint8_t> done_reasons;   // DoneReason as int
  std::vector<double> terminal_observations;  // valid where dones[i] != 0
  std::vector<double> episode_returns;  // running; completed total where done
};

// N identical, independent environments stepped in lockstep. Per-env state is
// stored one field per sequence; env i's RNG stream is child(master, i), so
// trajectories do not depend on how the batch is partitioned over workers.
class VecEnv {
 public:
  VecEnv(EnvConfig cfg, int n_envs, std::uint64_t master_seed,
         int workers = 1, bool auto_reset = true,
         tasks::SpawnMode spawn_mode = tasks::SpawnMode::train)
      : cfg_(std::move(cfg)),
        n_envs_(n_envs),
        auto_reset_(auto_reset),
        spawn_mode_(spawn_mode),
        pool_(workers) {
    if (n_envs < 1) throw ConfigInvalid("vecenv: n_envs must be >= 1");
    cfg_.validate();
    obs_dim_ = tasks::observation_dim(cfg_.task);
    act_dim_ = static_cast<int>(cfg_.layout.size());
    position_.resize(n_envs_, Vec3::Zero());
    orientation_.resize(n_envs_);
    lin_vel_.resize(n_envs_, Vec3::Zero());
    ang_vel_.resize(n_envs_, Vec3::Zero());
    goal_.resize(n_envs_);
    step_count_.assign(n_envs_, 0);
    episode_return_.assign(n_envs_, 0.0);
    rng_.reserve(n_envs_);
    for (int i = 0; i < n_envs_; ++i)
      rng_.push_back(Rng::child(master_seed, static_cast<std::uint64_t>(i)));
    batch_.observations.assign(static_cast<std::size_t>(n_envs_) * obs_dim_, 0.0);
    batch_.rewards.assign(n_envs_, 0.0);
    batch_.dones.assign(n_envs_, 0);
    batch_.reset_mask.assign(n_envs_, 0);
    batch_.done_reasons.assign(n_envs_, 0);
    batch_.terminal_observations.assign(
        static_cast<std::size_t>(n_envs_) * obs_dim_, 0.0);
    batch_.episode_returns.assign(n_envs_, 0.0);
    for (int i = 0; i < n_envs_; ++i) {
      reset_env(i);
      write_obs(i);
    }
  }

  int n_envs() const { return n_envs_; }
  int obs_dim() const { return obs_dim_; }
  int action_dim() const { return act_dim_; }
  const EnvConfig& config() const { return cfg_; }
  const std::vector<double>& observations() const { return batch_.observations; }

  RigidState state(int i) const {
    return RigidState{position_[i], orientation_[i], lin_vel_[i], ang_vel_[i]};
  }
  const TaskGoal& goal(int i) const { return goal_[i]; }
  int step_count(int i) const { return step_count_[i]; }
  double episode_return(int i) const { return episode_return_[i]; }

  // Used by the path follower: retarget the goal velocity and refresh the
  // env's observation row in place.
  void set_goal_velocity(int i, const Vec3& v) {
    goal_[i].velocity = v;
    write_obs(i);
  }

  // Advances every env one control step; auto-resets finished episodes so the
  // returned observations always belong to a live episode.
  const StepBatch& step_batch(std::span<const std::uint8_t> actions) {
    if (actions.size() != static_cast<std::size_t>(n_envs_) * act_dim_)
      throw ShapeMismatch("step_batch: expected " + std::to_string(n_envs_) +
                          " x " + std::to_string(act_dim_) + " action bits");
    pool_.run(n_envs_, [&](int begin, int end) {
      for (int i = begin; i < end; ++i) step_env(i, actions);
    });
    return batch_;
  }

 private:
  void reset_env(int i) {
    goal_[i] = tasks::sample_goal(cfg_.task, cfg_.goal, rng_[i]);
    RigidState s =
        tasks::sample_initial_state(cfg_.task, spawn_mode_, cfg_.spawn, rng_[i]);
    position_[i] = s.position;
    orientation_[i] = s.orientation;
    lin_vel_[i] = s.lin_vel;
    ang_vel_[i] = s.ang_vel;
    step_count_[i] = 0;
    episode_return_[i] = 0.0;
  }

  void write_obs(int i) {
    tasks::observe_into(cfg_.task, state(i), goal_[i],
                        std::span<double>(batch_.observations)
                            .subspan(static_cast<std::size_t>(i) * obs_dim_,
                                     obs_dim_));
  }

  void step_env(int i, std::span<const std::uint8_t> actions) {
    auto action = actions.subspan(static_cast<std::size_t>(i) * act_dim_,
                                  act_dim_);
    tasks::DoneInfo done;
    double r = 0.0;
    bool stepped = true;
    RigidState next;
    try {
      next = dyn::step(state(i), cfg_.body, cfg_.layout, action,
                       cfg_.sim.control_dt(), cfg_.sim.substeps,
                       tasks::dof_mode(cfg_.task));
    } catch (const NonFiniteState&) {
      stepped = false;
      next = state(i);
      done = {true, tasks::DoneReason::out_of_bounds};
    }
    ++step_count_[i];
    if (stepped) {
      r = tasks::reward(cfg_.task, next, goal_[i], action, cfg_.reward);
      position_[i] = next.position;
      orientation_[i] = next.orientation;
      lin_vel_[i] = next.lin_vel;
      ang_vel_[i] = next.ang_vel;
      done = tasks::episode_done(step_count_[i], next, goal_[i],
                                 cfg_.sim.horizon, cfg_.sim.out_of_bounds_dist);
    }
    episode_return_[i] += r;
    batch_.rewards[i] = r;
    batch_.episode_returns[i] = episode_return_[i];
    batch_.dones[i] = done.done ? 1 : 0;
    batch_.done_reasons[i] = static_cast<std::uint8_t>(done.reason);
    batch_.reset_mask[i] = 0;
    if (done.done) {
      if (stepped) {
        // terminal observation, for value bootstrapping on truncation
        tasks::observe_into(cfg_.task, next, goal_[i],
                            std::span<double>(batch_.terminal_observations)
                                .subspan(static_cast<std::size_t>(i) * obs_dim_,
                                         obs_dim_));
      }
      if (auto_reset_) {
        reset_env(i);
        batch_.reset_mask[i] = 1;
      }
    }
    write_obs(i);
  }

  EnvConfig cfg_;
  int n_envs_ = 0;
  int obs_dim_ = 0;
  int act_dim_ = 0;
  bool auto_reset_ = true;
  tasks::SpawnMode spawn_mode_ = tasks::SpawnMode::train;
  WorkerPool pool_;

  // structure-of-sequences state
  std::vector<Vec3> position_;
  std::vector<geom::UnitQuaternion> orientation_;
  std::vector<Vec3> lin_vel_;
  std::vector<Vec3> ang_vel_;
  std::vector<TaskGoal> goal_;
  std::vector<int> step_count_;
  std::vector<double> episode_return_;
  std::vector<Rng> rng_;

  StepBatch batch_;
};

struct BenchReport {
  int n_envs = 0;
  int n_steps = 0;
  long long env_steps = 0;
  double wall_s = 0.0;
  double steps_per_s = 0.0;
  double per_env_step_us = 0.0;
};

// Throughput measurement with pseudo-random actions; the action stream is a
// pure function of (seed, env, step) so runs are repeatable.
inline BenchReport bench(const EnvConfig& cfg, int n_envs, int n_steps,
                         std::uint64_t seed = 1, int workers = 1) {
  VecEnv env(cfg, n_envs, seed, workers);
  const int act = env.action_dim();
  std::vector<std::uint8_t> actions(static_cast<std::size_t>(n_envs) * act);
  BenchReport rep;
  rep.n_envs = n_envs;
  rep.n_steps = n_steps;
  auto t0 = std::chrono::steady_clock::now();
  for (int t = 0; t < n_steps; ++t) {
    for (int i = 0; i < n_envs; ++i) {
      std::uint64_t bits = splitmix64(
          seed ^ splitmix64(static_cast<std::uint64_t>(i) * 0x10001 + t));
      for (int j = 0; j < act; ++j)
        actions[static_cast<std::size_t>(i) * act + j] = (bits >> j) & 1u;
    }
    env.step_batch(actions);
  }
  auto t1 = std::chrono::steady_clock::now();
  rep.wall_s = std::chrono::duration<double>(t1 - t0).count();
  rep.env_steps = static_cast<long long>(n_envs) * n_steps;
  rep.steps_per_s = rep.wall_s > 0.0 ? rep.env_steps / rep.wall_s : 0.0;
  rep.per_env_step_us =
      rep.env_steps > 0 ? rep.wall_s * 1e6 / rep.env_steps : 0.0;
  return rep;
}

inline std::string bench_report_text(const BenchReport& r,
                                     const std::string& config_hash,
                                     int workers) {
  std::ostringstream os;
  os << "schema=bench-v1\n";
  os << "version=" << kVersion << "\n";
  os << "config_hash=" << config_hash << "\n";
  os << "n_envs=" << r.n_envs << "\n";
  os << "n_steps=" << r.n_steps << "\n";
  os << "workers=" << workers << "\n";
  os << "env_steps=" << r.env_steps << "\n";
  os << "wall_s=" << r.wall_s << "\n";
  os << "steps_per_s=" << r.steps_per_s << "\n";
  os << "per_env_step_us=" << r.per_env_step_us << "\n";
  return os.str();
}

}  // namespace ff::vec
