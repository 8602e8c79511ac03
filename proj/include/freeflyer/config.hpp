#pragma once

#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "freeflyer/agent.hpp"
#include "freeflyer/evalkit.hpp"
#include "freeflyer/planner.hpp"
#include "freeflyer/vecenv.hpp"

namespace ff::cfg {

// Sectioned key = value file:
//   [section]
//   key = 1.5          # comment
//   arr = [1, 2, 3]
//   name = "circle"
// Every key must be consumed by a typed getter; leftovers are rejected with
// their line number.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigInvalid("cannot open config file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_text(ss.str(), path.string());
  }

  static ConfigFile parse_text(const std::string& text,
                               const std::string& name = "<config>") {
    ConfigFile c;
    c.name_ = name;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::string t = trim(line);
      if (t.empty()) continue;
      if (t.front() == '[') {
        if (t.back() != ']')
          throw ConfigInvalid(c.where(line_no) + "unterminated section header");
        section = trim(t.substr(1, t.size() - 2));
        if (section.empty())
          throw ConfigInvalid(c.where(line_no) + "empty section name");
        continue;
      }
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigInvalid(c.where(line_no) + "expected key = value");
      std::string key = trim(t.substr(0, eq));
      std::string val = trim(t.substr(eq + 1));
      if (key.empty() || val.empty())
        throw ConfigInvalid(c.where(line_no) + "empty key or value");
      if (section.empty())
        throw ConfigInvalid(c.where(line_no) + "key outside any [section]");
      std::string full = section + "." + key;
      if (c.values_.count(full))
        throw ConfigInvalid(c.where(line_no) + "duplicate key '" + full + "'");
      c.values_[full] = Entry{val, line_no, false};
    }
    return c;
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  double get_double(const std::string& key, double fallback) {
    auto* e = take(key);
    if (!e) return fallback;
    return parse_double(e->text, e->line);
  }

  int get_int(const std::string& key, int fallback) {
    auto* e = take(key);
    if (!e) return fallback;
    double v = parse_double(e->text, e->line);
    int i = static_cast<int>(v);
    if (static_cast<double>(i) != v)
      throw ConfigInvalid(where(e->line) + "expected integer for '" + key +
                          "'");
    return i;
  }

  bool get_bool(const std::string& key, bool fallback) {
    auto* e = take(key);
    if (!e) return fallback;
    if (e->text == "true") return true;
    if (e->text == "false") return false;
    throw ConfigInvalid(where(e->line) + "expected true/false for '" + key +
                        "'");
  }

  std::string get_string(const std::string& key, const std::string& fallback) {
    auto* e = take(key);
    if (!e) return fallback;
    std::string v = e->text;
    if (v.size() >= 2 && v.front() == '"' && v.back() == '"')
      v = v.substr(1, v.size() - 2);
    return v;
  }

  std::vector<double> get_array(const std::string& key,
                                std::vector<double> fallback) {
    auto* e = take(key);
    if (!e) return fallback;
    std::string v = e->text;
    if (v.size() < 2 || v.front() != '[' || v.back() != ']')
      throw ConfigInvalid(where(e->line) + "expected [a, b, ...] for '" + key +
                          "'");
    std::vector<double> out;
    std::string body = v.substr(1, v.size() - 2);
    std::istringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty())
        throw ConfigInvalid(where(e->line) + "empty array element in '" + key +
                            "'");
      out.push_back(parse_double(item, e->line));
    }
    return out;
  }

  // every parsed key must have been consumed
  void reject_unknown() const {
    for (const auto& [key, e] : values_)
      if (!e.consumed)
        throw ConfigInvalid(where(e.line) + "unknown key '" + key + "'");
  }

 private:
  struct Entry {
    std::string text;
    int line = 0;
    bool consumed = false;
  };

  static std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    if (b == std::string::npos) return "";
    return s.substr(b, e - b + 1);
  }

  std::string where(int line) const {
    return name_ + ":" + std::to_string(line) + ": ";
  }

  double parse_double(const std::string& s, int line) const {
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
      throw ConfigInvalid(where(line) + "expected number, got '" + s + "'");
    return v;
  }

  Entry* take(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end()) return nullptr;
    it->second.consumed = true;
    return &it->second;
  }

  std::string name_;
  std::map<std::string, Entry> values_;
};

struct RunConfig {
  vec::EnvConfig env;
  agent::PpoParams ppo;
  evalkit::EvalParams eval;
  plan::PlannerParams planner;
  std::string planner_shape = "circle";
  int planner_steps = 700;

  std::string resolved_text;  // canonical dump, itself a loadable config
  std::string hash;           // fnv1a of resolved_text
};

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string fmt_array(const std::vector<double>& v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ", ";
    s += fmt(v[i]);
  }
  return s + "]";
}

}  // namespace detail

// Canonical dump of every resolved value; reloading this text reproduces the
// exact same configuration.
inline std::string dump_config(const RunConfig& rc) {
  using detail::fmt;
  using detail::fmt_array;
  std::ostringstream os;
  const auto& env = rc.env;
  os << "[body]\n";
  os << "mass = " << fmt(env.body.mass) << "\n";
  os << "inertia = "
     << fmt_array({env.body.inertia(0, 0), env.body.inertia(1, 1),
                   env.body.inertia(2, 2)})
     << "\n";
  os << "\n[thrusters]\n";
  os << "magnitude = " << fmt(env.layout.magnitude) << "\n";
  std::vector<double> pts, dirs;
  for (const auto& p : env.layout.points) {
    pts.push_back(p.x());
    pts.push_back(p.y());
    pts.push_back(p.z());
  }
  for (const auto& d : env.layout.directions) {
    dirs.push_back(d.x());
    dirs.push_back(d.y());
    dirs.push_back(d.z());
  }
  os << "points = " << fmt_array(pts) << "\n";
  os << "directions = " << fmt_array(dirs) << "\n";
  os << "\n[sim]\n";
  os << "control_hz = " << fmt(env.sim.control_hz) << "\n";
  os << "substeps = " << env.sim.substeps << "\n";
  os << "horizon = " << env.sim.horizon << "\n";
  os << "out_of_bounds = " << fmt(env.sim.out_of_bounds_dist) << "\n";
  os << "\n[task]\n";
  os << "kind = \"" << tasks::task_name(env.task) << "\"\n";
  os << "sigma_pos = " << fmt(env.reward.sigma_pos) << "\n";
  os << "sigma_rot = " << fmt(env.reward.sigma_rot) << "\n";
  os << "sigma_vel = " << fmt(env.reward.sigma_vel) << "\n";
  os << "sigma_omega = " << fmt(env.reward.sigma_omega) << "\n";
  os << "action_cost = " << fmt(env.reward.action_cost) << "\n";
  os << "goal_max_speed = " << fmt(env.goal.max_speed) << "\n";
  os << "goal_max_ang_rate = " << fmt(env.goal.max_ang_rate) << "\n";
  os << "spawn_train_radius = "
     << fmt_array({env.spawn.train_radius_min, env.spawn.train_radius_max})
     << "\n";
  os << "spawn_eval_radius = "
     << fmt_array({env.spawn.eval_radius_min, env.spawn.eval_radius_max})
     << "\n";
  os << "\n[ppo]\n";
  os << "epochs = " << rc.ppo.epochs << "\n";
  os << "n_envs = " << rc.ppo.n_envs << "\n";
  os << "rollout_steps = " << rc.ppo.rollout_steps << "\n";
  os << "minibatches = " << rc.ppo.minibatches << "\n";
  os << "update_epochs = " << rc.ppo.update_epochs << "\n";
  os << "gamma = " << fmt(rc.ppo.gamma) << "\n";
  os << "lambda = " << fmt(rc.ppo.gae_lambda) << "\n";
  os << "clip = " << fmt(rc.ppo.clip) << "\n";
  os << "value_coef = " << fmt(rc.ppo.value_coef) << "\n";
  os << "entropy_coef = " << fmt(rc.ppo.entropy_coef) << "\n";
  os << "learning_rate = " << fmt(rc.ppo.learning_rate) << "\n";
  os << "max_grad_norm = " << fmt(rc.ppo.max_grad_norm) << "\n";
  os << "hidden = " << rc.ppo.hidden << "\n";
  os << "layers = " << rc.ppo.layers << "\n";
  os << "checkpoint_every = " << rc.ppo.checkpoint_every << "\n";
  os << "\n[eval]\n";
  os << "n_envs = " << rc.eval.n_envs << "\n";
  os << "steps = " << rc.eval.steps << "\n";
  os << "stochastic = " << (rc.eval.stochastic ? "true" : "false") << "\n";
  os << "threshold_pos = " << fmt(rc.eval.threshold_pos) << "\n";
  os << "threshold_pos_coarse = " << fmt(rc.eval.threshold_pos_coarse) << "\n";
  os << "threshold_rot = " << fmt(rc.eval.threshold_rot) << "\n";
  os << "threshold_vel = " << fmt(rc.eval.threshold_vel) << "\n";
  os << "\n[planner]\n";
  os << "shape = \"" << rc.planner_shape << "\"\n";
  os << "steps = " << rc.planner_steps << "\n";
  os << "cruise_speed = " << fmt(rc.planner.cruise_speed) << "\n";
  os << "lookahead_radius = " << fmt(rc.planner.lookahead_radius) << "\n";
  os << "spacing = " << fmt(rc.planner.spacing) << "\n";
  os << "circle_radius = " << fmt(rc.planner.circle_radius) << "\n";
  os << "spiral_r0 = " << fmt(rc.planner.spiral_r0) << "\n";
  os << "spiral_rate = " << fmt(rc.planner.spiral_rate) << "\n";
  os << "spiral_rmax = " << fmt(rc.planner.spiral_rmax) << "\n";
  os << "square_side = " << fmt(rc.planner.square_side) << "\n";
  return os.str();
}

// Layered resolution: task-kind defaults, then file values, then caller
// overrides applied by the CLI before validation.
inline RunConfig load_run_config(ConfigFile& file,
                                 std::optional<std::string> task_override) {
  RunConfig rc;
  std::string kind_name =
      file.get_string("task.kind", std::string(tasks::task_name(
                                       tasks::TaskKind::go_to_xy)));
  if (task_override) kind_name = *task_override;
  tasks::TaskKind task = tasks::parse_task_name(kind_name);
  rc.env = vec::EnvConfig::defaults(task);

  rc.env.body.mass = file.get_double("body.mass", rc.env.body.mass);
  {
    std::vector<double> di = file.get_array(
        "body.inertia", {rc.env.body.inertia(0, 0), rc.env.body.inertia(1, 1),
                         rc.env.body.inertia(2, 2)});
    if (di.size() != 3)
      throw ConfigInvalid("body.inertia: expected 3 diagonal entries");
    rc.env.body = dyn::BodyParams::from_diagonal(rc.env.body.mass,
                                                 geom::Vec3(di[0], di[1], di[2]));
  }
  rc.env.layout.magnitude =
      file.get_double("thrusters.magnitude", rc.env.layout.magnitude);
  {
    std::vector<double> pts = file.get_array("thrusters.points", {});
    std::vector<double> dirs = file.get_array("thrusters.directions", {});
    if (pts.empty() != dirs.empty())
      throw ConfigInvalid(
          "thrusters: points and directions must be given together");
    if (!pts.empty()) {
      if (pts.size() % 3 != 0 || pts.size() != dirs.size())
        throw ConfigInvalid(
            "thrusters: points/directions must be equal-length flat [x,y,z] "
            "triples");
      rc.env.layout.points.clear();
      rc.env.layout.directions.clear();
      for (std::size_t i = 0; i + 2 < pts.size(); i += 3) {
        rc.env.layout.points.emplace_back(pts[i], pts[i + 1], pts[i + 2]);
        rc.env.layout.directions.emplace_back(dirs[i], dirs[i + 1],
                                              dirs[i + 2]);
      }
    }
  }
  rc.env.sim.control_hz = file.get_double("sim.control_hz", rc.env.sim.control_hz);
  rc.env.sim.substeps = file.get_int("sim.substeps", rc.env.sim.substeps);
  rc.env.sim.horizon = file.get_int("sim.horizon", rc.env.sim.horizon);
  rc.env.sim.out_of_bounds_dist =
      file.get_double("sim.out_of_bounds", rc.env.sim.out_of_bounds_dist);

  rc.env.reward.sigma_pos = file.get_double("task.sigma_pos", rc.env.reward.sigma_pos);
  rc.env.reward.sigma_rot = file.get_double("task.sigma_rot", rc.env.reward.sigma_rot);
  rc.env.reward.sigma_vel = file.get_double("task.sigma_vel", rc.env.reward.sigma_vel);
  rc.env.reward.sigma_omega =
      file.get_double("task.sigma_omega", rc.env.reward.sigma_omega);
  rc.env.reward.action_cost =
      file.get_double("task.action_cost", rc.env.reward.action_cost);
  rc.env.goal.max_speed = file.get_double("task.goal_max_speed", rc.env.goal.max_speed);
  rc.env.goal.max_ang_rate =
      file.get_double("task.goal_max_ang_rate", rc.env.goal.max_ang_rate);
  {
    auto tr = file.get_array("task.spawn_train_radius",
                             {rc.env.spawn.train_radius_min,
                              rc.env.spawn.train_radius_max});
    auto er = file.get_array("task.spawn_eval_radius",
                             {rc.env.spawn.eval_radius_min,
                              rc.env.spawn.eval_radius_max});
    if (tr.size() != 2 || er.size() != 2)
      throw ConfigInvalid("task.spawn_*_radius: expected [min, max]");
    rc.env.spawn.train_radius_min = tr[0];
    rc.env.spawn.train_radius_max = tr[1];
    rc.env.spawn.eval_radius_min = er[0];
    rc.env.spawn.eval_radius_max = er[1];
  }

  rc.ppo.epochs = file.get_int("ppo.epochs", rc.ppo.epochs);
  rc.ppo.n_envs = file.get_int("ppo.n_envs", rc.ppo.n_envs);
  rc.ppo.rollout_steps = file.get_int("ppo.rollout_steps", rc.ppo.rollout_steps);
  rc.ppo.minibatches = file.get_int("ppo.minibatches", rc.ppo.minibatches);
  rc.ppo.update_epochs = file.get_int("ppo.update_epochs", rc.ppo.update_epochs);
  rc.ppo.gamma = file.get_double("ppo.gamma", rc.ppo.gamma);
  rc.ppo.gae_lambda = file.get_double("ppo.lambda", rc.ppo.gae_lambda);
  rc.ppo.clip = file.get_double("ppo.clip", rc.ppo.clip);
  rc.ppo.value_coef = file.get_double("ppo.value_coef", rc.ppo.value_coef);
  rc.ppo.entropy_coef = file.get_double("ppo.entropy_coef", rc.ppo.entropy_coef);
  rc.ppo.learning_rate =
      file.get_double("ppo.learning_rate", rc.ppo.learning_rate);
  rc.ppo.max_grad_norm =
      file.get_double("ppo.max_grad_norm", rc.ppo.max_grad_norm);
  rc.ppo.hidden = file.get_int("ppo.hidden", rc.ppo.hidden);
  rc.ppo.layers = file.get_int("ppo.layers", rc.ppo.layers);
  rc.ppo.checkpoint_every =
      file.get_int("ppo.checkpoint_every", rc.ppo.checkpoint_every);

  rc.eval.n_envs = file.get_int("eval.n_envs", rc.eval.n_envs);
  rc.eval.steps = file.get_int("eval.steps", rc.eval.steps);
  rc.eval.stochastic = file.get_bool("eval.stochastic", rc.eval.stochastic);
  rc.eval.threshold_pos =
      file.get_double("eval.threshold_pos", rc.eval.threshold_pos);
  rc.eval.threshold_pos_coarse =
      file.get_double("eval.threshold_pos_coarse", rc.eval.threshold_pos_coarse);
  rc.eval.threshold_rot =
      file.get_double("eval.threshold_rot", rc.eval.threshold_rot);
  rc.eval.threshold_vel =
      file.get_double("eval.threshold_vel", rc.eval.threshold_vel);

  rc.planner_shape = file.get_string("planner.shape", rc.planner_shape);
  rc.planner_steps = file.get_int("planner.steps", rc.planner_steps);
  rc.planner.cruise_speed =
      file.get_double("planner.cruise_speed", rc.planner.cruise_speed);
  rc.planner.lookahead_radius =
      file.get_double("planner.lookahead_radius", rc.planner.lookahead_radius);
  rc.planner.spacing = file.get_double("planner.spacing", rc.planner.spacing);
  rc.planner.circle_radius =
      file.get_double("planner.circle_radius", rc.planner.circle_radius);
  rc.planner.spiral_r0 = file.get_double("planner.spiral_r0", rc.planner.spiral_r0);
  rc.planner.spiral_rate =
      file.get_double("planner.spiral_rate", rc.planner.spiral_rate);
  rc.planner.spiral_rmax =
      file.get_double("planner.spiral_rmax", rc.planner.spiral_rmax);
  rc.planner.square_side =
      file.get_double("planner.square_side", rc.planner.square_side);

  file.reject_unknown();
  return rc;
}

// validation + canonical text + hash; call after applying CLI overrides
inline void finalize_run_config(RunConfig& rc) {
  rc.env.validate();
  rc.ppo.validate();
  rc.eval.validate();
  rc.planner.validate();
  if (rc.planner_steps < 0)
    throw ConfigInvalid("planner.steps must be >= 0");
  plan::parse_shape(rc.planner_shape);
  rc.resolved_text = dump_config(rc);
  rc.hash = hex64(fnv1a(rc.resolved_text));
}

inline RunConfig default_run_config(tasks::TaskKind task) {
  ConfigFile empty = ConfigFile::parse_text("", "<defaults>");
  RunConfig rc =
      load_run_config(empty, std::string(tasks::task_name(task)));
  finalize_run_config(rc);
  return rc;
}

// The values below are artifact choices, not paper-reported numbers; the
// manifest flags them so downstream consumers can tell them apart.
inline const char* nonpaper_default_keys() {
  return "body.mass,body.inertia,thrusters.magnitude,thrusters.points,"
         "thrusters.directions,task.sigma_pos,task.sigma_rot,task.sigma_vel,"
         "task.sigma_omega,task.action_cost,task.goal_max_speed,"
         "task.goal_max_ang_rate,task.spawn_train_radius,sim.out_of_bounds,"
         "ppo.*(except epochs),eval.threshold_*,planner.spacing,"
         "planner.circle_radius,planner.spiral_*,planner.square_side";
}

inline std::string make_manifest(const std::string& command,
                                 std::uint64_t seed, const RunConfig& rc,
                                 const std::vector<std::pair<std::string,
                                                             std::string>>&
                                     extra = {}) {
  std::ostringstream os;
  os << "schema=run-manifest-v1\n";
  os << "version=" << kVersion << "\n";
  std::time_t now = std::time(nullptr);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  os << "timestamp=" << buf << "\n";
  os << "command=" << command << "\n";
  os << "seed=" << seed << "\n";
  os << "config_hash=" << rc.hash << "\n";
  os << "nonpaper_defaults=" << nonpaper_default_keys() << "\n";
  for (const auto& [k, v] : extra) os << k << "=" << v << "\n";
  os << "resolved_config_begin\n";
  os << rc.resolved_text;
  os << "resolved_config_end\n";
  return os.str();
}

}  // namespace ff::cfg
