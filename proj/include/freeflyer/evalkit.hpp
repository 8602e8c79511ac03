#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "freeflyer/agent.hpp"
#include "freeflyer/vecenv.hpp"

namespace ff::evalkit {

struct EvalParams {
  int n_envs = 1024;
  int steps = 500;
  bool stochastic = false;  // default decoding is per-head argmax
  double threshold_pos = 0.2;         // [m]
  double threshold_pos_coarse = 0.5;  // [m]
  double threshold_rot = 0.1;         // [rad]
  double threshold_vel = 0.1;         // [m/s]

  void validate() const {
    if (n_envs < 1 || steps < 1)
      throw ConfigInvalid("eval: n_envs and steps must be >= 1");
    if (!(threshold_pos > 0.0) || !(threshold_pos_coarse > 0.0) ||
        !(threshold_rot > 0.0) || !(threshold_vel > 0.0))
      throw ConfigInvalid("eval: thresholds must be > 0");
  }
};

// Row t holds the state seen when choosing action t (row 0 is the spawn) and
// the reward that action earned; per-episode fields describe the state after
// the final step.
struct EpisodeMetrics {
  int n_envs = 0;
  int steps = 0;
  tasks::TaskKind task = tasks::TaskKind::go_to_xy;
  bool planar = true;
  // per-step grids, env-major: value(i, t) = v[i * steps + t]
  std::vector<double> distance;
  std::vector<double> rot_err;
  std::vector<double> speed;
  std::vector<double> ang_speed;
  std::vector<double> reward;
  std::vector<int> fired;
  std::vector<double> x, y, z;  // trajectory samples, same indexing
  // per-episode
  std::vector<double> total_reward;
  std::vector<long> total_actions;
  std::vector<double> final_distance;
  std::vector<double> final_rot_err;
  std::vector<std::uint8_t> success_pos;         // final_distance < pos
  std::vector<std::uint8_t> success_pos_coarse;  // final_distance < coarse
  std::vector<std::uint8_t> success_rot;
  std::vector<std::uint8_t> success_vel;

  std::size_t at(int env, int t) const {
    return static_cast<std::size_t>(env) * steps + t;
  }
};

// Fixed-horizon batched evaluation: every env runs exactly `steps` steps from
// an eval-mode spawn, no auto-reset.
inline EpisodeMetrics run_eval(const net::PolicyNet& net,
                               const vec::EnvConfig& cfg, const EvalParams& ep,
                               std::uint64_t seed, int workers = 1) {
  ep.validate();
  vec::VecEnv env(cfg, ep.n_envs, seed, workers, /*auto_reset=*/false,
                  tasks::SpawnMode::eval);
  if (net.spec.obs_dim != env.obs_dim() || net.spec.n_heads != env.action_dim())
    throw PolicyTaskMismatch(
        "run_eval: policy built for obs/action widths " +
        std::to_string(net.spec.obs_dim) + "/" +
        std::to_string(net.spec.n_heads) + ", task needs " +
        std::to_string(env.obs_dim()) + "/" + std::to_string(env.action_dim()));

  EpisodeMetrics m;
  m.n_envs = ep.n_envs;
  m.steps = ep.steps;
  m.task = cfg.task;
  m.planar = tasks::is_planar(cfg.task);
  const std::size_t grid = static_cast<std::size_t>(ep.n_envs) * ep.steps;
  m.distance.resize(grid);
  m.rot_err.resize(grid);
  m.speed.resize(grid);
  m.ang_speed.resize(grid);
  m.reward.resize(grid);
  m.fired.resize(grid);
  m.x.resize(grid);
  m.y.resize(grid);
  m.z.resize(grid);
  m.total_reward.assign(ep.n_envs, 0.0);
  m.total_actions.assign(ep.n_envs, 0);

  Eigen::MatrixXd logits;
  Eigen::VectorXd values, logp, entropy;
  std::vector<std::uint8_t> actions(
      static_cast<std::size_t>(ep.n_envs) * env.action_dim());
  Rng action_rng(child_seed(seed, 0xe7a1));

  for (int t = 0; t < ep.steps; ++t) {
    for (int i = 0; i < ep.n_envs; ++i) {
      auto s = env.state(i);
      const auto& g = env.goal(i);
      std::size_t k = m.at(i, t);
      m.distance[k] = tasks::goal_distance(cfg.task, s, g);
      m.rot_err[k] = tasks::rotation_error(cfg.task, s, g);
      m.speed[k] = s.lin_vel.norm();
      m.ang_speed[k] = m.planar ? std::abs(s.ang_vel.z()) : s.ang_vel.norm();
      m.x[k] = s.position.x();
      m.y[k] = s.position.y();
      m.z[k] = s.position.z();
    }
    net.forward(agent::obs_as_columns(env.observations(), env.obs_dim()),
                logits, values);
    if (ep.stochastic)
      agent::sample_actions(logits, action_rng, actions, logp, entropy);
    else
      agent::greedy_actions(logits, actions);
    const auto& out = env.step_batch(actions);
    for (int i = 0; i < ep.n_envs; ++i) {
      std::size_t k = m.at(i, t);
      m.reward[k] = out.rewards[i];
      int f = 0;
      for (int j = 0; j < env.action_dim(); ++j)
        f += actions[static_cast<std::size_t>(i) * env.action_dim() + j];
      m.fired[k] = f;
      m.total_reward[i] += out.rewards[i];
      m.total_actions[i] += f;
    }
  }

  m.final_distance.resize(ep.n_envs);
  m.final_rot_err.resize(ep.n_envs);
  m.success_pos.resize(ep.n_envs);
  m.success_pos_coarse.resize(ep.n_envs);
  m.success_rot.resize(ep.n_envs);
  m.success_vel.resize(ep.n_envs);
  for (int i = 0; i < ep.n_envs; ++i) {
    auto s = env.state(i);
    const auto& g = env.goal(i);
    m.final_distance[i] = tasks::goal_distance(cfg.task, s, g);
    m.final_rot_err[i] = tasks::rotation_error(cfg.task, s, g);
    m.success_pos[i] = m.final_distance[i] < ep.threshold_pos;
    m.success_pos_coarse[i] = m.final_distance[i] < ep.threshold_pos_coarse;
    m.success_rot[i] = m.final_rot_err[i] < ep.threshold_rot;
    m.success_vel[i] =
        (g.velocity - s.lin_vel).norm() < ep.threshold_vel;
  }
  return m;
}

struct StatRow {
  std::string metric;
  int step = -1;  // -1 for per-episode rows
  double mean = 0, stddev = 0, min = 0, max = 0, median = 0, p05 = 0, p95 = 0;
};

struct SummaryStats {
  std::vector<StatRow> per_step;
  std::vector<StatRow> per_episode;
  int best_env = 0;   // highest total reward
  int worst_env = 0;  // lowest total reward
};

namespace detail {

inline double percentile(std::vector<double> sorted, double q) {
  // expects sorted input; linear interpolation between order statistics
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  double pos = q * static_cast<double>(n - 1);
  std::size_t lo = static_cast<std::size_t>(pos);
  double frac = pos - static_cast<double>(lo);
  if (lo + 1 >= n) return sorted[n - 1];
  return (1.0 - frac) * sorted[lo] + frac * sorted[lo + 1];
}

inline StatRow stat_row(const std::string& metric, int step,
                        std::vector<double> v) {
  StatRow r;
  r.metric = metric;
  r.step = step;
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var = v.size() > 1 ? var / (n - 1.0) : 0.0;
  std::sort(v.begin(), v.end());
  r.mean = mean;
  r.stddev = std::sqrt(var);
  r.min = v.front();
  r.max = v.back();
  r.median = percentile(v, 0.5);
  r.p05 = percentile(v, 0.05);
  r.p95 = percentile(v, 0.95);
  return r;
}

}  // namespace detail

inline SummaryStats summarize(const EpisodeMetrics& m) {
  if (m.n_envs < 1 || m.steps < 1) throw EmptyInput("summarize: empty metrics");
  SummaryStats s;
  auto add_per_step = [&](const std::string& name, const auto& grid) {
    std::vector<double> col(static_cast<std::size_t>(m.n_envs));
    for (int t = 0; t < m.steps; ++t) {
      for (int i = 0; i < m.n_envs; ++i)
        col[static_cast<std::size_t>(i)] =
            static_cast<double>(grid[m.at(i, t)]);
      s.per_step.push_back(detail::stat_row(name, t, col));
    }
  };
  add_per_step("distance", m.distance);
  add_per_step("rot_err", m.rot_err);
  add_per_step("speed", m.speed);
  add_per_step("ang_speed", m.ang_speed);
  add_per_step("reward", m.reward);
  add_per_step("fired", m.fired);

  auto add_per_episode = [&](const std::string& name, const auto& v) {
    std::vector<double> col(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
      col[i] = static_cast<double>(v[i]);
    s.per_episode.push_back(detail::stat_row(name, -1, col));
  };
  add_per_episode("total_reward", m.total_reward);
  add_per_episode("total_actions", m.total_actions);
  add_per_episode("final_distance", m.final_distance);
  add_per_episode("final_rot_err", m.final_rot_err);

  s.best_env = 0;
  s.worst_env = 0;
  for (int i = 1; i < m.n_envs; ++i) {
    if (m.total_reward[static_cast<std::size_t>(i)] >
        m.total_reward[static_cast<std::size_t>(s.best_env)])
      s.best_env = i;
    if (m.total_reward[static_cast<std::size_t>(i)] <
        m.total_reward[static_cast<std::size_t>(s.worst_env)])
      s.worst_env = i;
  }
  return s;
}

namespace detail {

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& p, const std::string& header) {
    f_ = std::fopen(p.string().c_str(), "w");
    if (!f_) throw IoError("cannot open " + p.string() + " for writing");
    std::fprintf(f_, "%s\n", header.c_str());
  }
  ~CsvFile() {
    if (f_) std::fclose(f_);
  }
  void cell(double v) { sep(); std::fprintf(f_, "%.17g", v); }
  void cell(long v) { sep(); std::fprintf(f_, "%ld", v); }
  void cell(int v) { sep(); std::fprintf(f_, "%d", v); }
  void cell(const std::string& v) { sep(); std::fprintf(f_, "%s", v.c_str()); }
  void endrow() {
    std::fprintf(f_, "\n");
    first_ = true;
  }

 private:
  void sep() {
    if (!first_) std::fprintf(f_, ",");
    first_ = false;
  }
  std::FILE* f_ = nullptr;
  bool first_ = true;
};

}  // namespace detail

// Emits per_step.csv, per_episode.csv, summary.csv, trajectories.csv and
// run_manifest.txt under out_dir. File contents are deterministic for a given
// run; only the manifest carries a timestamp.
inline void write_report(const EpisodeMetrics& m, const SummaryStats& s,
                         const std::filesystem::path& out_dir,
                         const std::string& manifest_text) {
  if (m.n_envs < 1 || m.steps < 1)
    throw EmptyInput("write_report: empty metrics");
  std::filesystem::create_directories(out_dir);

  {
    detail::CsvFile csv(out_dir / "per_step.csv",
                        "env,step,distance,rot_err,speed,ang_speed,reward,fired");
    for (int i = 0; i < m.n_envs; ++i)
      for (int t = 0; t < m.steps; ++t) {
        std::size_t k = m.at(i, t);
        csv.cell(i);
        csv.cell(t);
        csv.cell(m.distance[k]);
        csv.cell(m.rot_err[k]);
        csv.cell(m.speed[k]);
        csv.cell(m.ang_speed[k]);
        csv.cell(m.reward[k]);
        csv.cell(m.fired[k]);
        csv.endrow();
      }
  }
  {
    detail::CsvFile csv(out_dir / "per_episode.csv",
                        "env,total_reward,total_actions,final_distance,"
                        "final_rot_err,success_pos,success_pos_coarse,"
                        "success_rot,success_vel");
    for (int i = 0; i < m.n_envs; ++i) {
      csv.cell(i);
      csv.cell(m.total_reward[static_cast<std::size_t>(i)]);
      csv.cell(m.total_actions[static_cast<std::size_t>(i)]);
      csv.cell(m.final_distance[static_cast<std::size_t>(i)]);
      csv.cell(m.final_rot_err[static_cast<std::size_t>(i)]);
      csv.cell(static_cast<int>(m.success_pos[static_cast<std::size_t>(i)]));
      csv.cell(static_cast<int>(
          m.success_pos_coarse[static_cast<std::size_t>(i)]));
      csv.cell(static_cast<int>(m.success_rot[static_cast<std::size_t>(i)]));
      csv.cell(static_cast<int>(m.success_vel[static_cast<std::size_t>(i)]));
      csv.endrow();
    }
  }
  {
    detail::CsvFile csv(out_dir / "summary.csv",
                        "scope,metric,step,mean,std,min,max,median,p05,p95");
    auto emit = [&](const std::string& scope, const StatRow& r) {
      csv.cell(scope);
      csv.cell(r.metric);
      csv.cell(r.step);
      csv.cell(r.mean);
      csv.cell(r.stddev);
      csv.cell(r.min);
      csv.cell(r.max);
      csv.cell(r.median);
      csv.cell(r.p05);
      csv.cell(r.p95);
      csv.endrow();
    };
    for (const auto& r : s.per_step) emit("step", r);
    for (const auto& r : s.per_episode) emit("episode", r);
    csv.cell(std::string("best_env"));
    csv.cell(std::string("total_reward"));
    csv.cell(s.best_env);
    csv.cell(m.total_reward[static_cast<std::size_t>(s.best_env)]);
    for (int pad = 0; pad < 5; ++pad) csv.cell(0.0);
    csv.endrow();
    csv.cell(std::string("worst_env"));
    csv.cell(std::string("total_reward"));
    csv.cell(s.worst_env);
    csv.cell(m.total_reward[static_cast<std::size_t>(s.worst_env)]);
    for (int pad = 0; pad < 5; ++pad) csv.cell(0.0);
    csv.endrow();
  }
  {
    detail::CsvFile csv(out_dir / "trajectories.csv",
                        m.planar ? "env,step,x,y" : "env,step,x,y,z");
    for (int i = 0; i < m.n_envs; ++i)
      for (int t = 0; t < m.steps; ++t) {
        std::size_t k = m.at(i, t);
        csv.cell(i);
        csv.cell(t);
        csv.cell(m.x[k]);
        csv.cell(m.y[k]);
        if (!m.planar) csv.cell(m.z[k]);
        csv.endrow();
      }
  }
  {
    std::FILE* f =
        std::fopen((out_dir / "run_manifest.txt").string().c_str(), "w");
    if (!f) throw IoError("cannot write run_manifest.txt");
    std::fputs(manifest_text.c_str(), f);
    std::fclose(f);
  }
}

}  // namespace ff::evalkit
