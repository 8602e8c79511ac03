#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "freeflyer/dynamics.hpp"
#include "freeflyer/geom.hpp"
#include "freeflyer/rng.hpp"

namespace ff::tasks {

using dyn::ActionView;
using dyn::DofMode;
using dyn::RigidState;
using geom::Mat3;
using geom::Vec3;

enum class TaskKind {
  go_to_xy,
  go_to_pose_2d,
  track_xy_velocity,
  track_xyo_velocity,
  go_to_xyz,
  go_to_pose_3d,
  track_xyz_velocity,
};

inline bool is_planar(TaskKind k) {
  switch (k) {
    case TaskKind::go_to_xy:
    case TaskKind::go_to_pose_2d:
    case TaskKind::track_xy_velocity:
    case TaskKind::track_xyo_velocity:
      return true;
    default:
      return false;
  }
}

inline DofMode dof_mode(TaskKind k) {
  return is_planar(k) ? DofMode::planar : DofMode::spatial;
}

// Task flag: 0 position, 1 pose, 2 velocity tracking. track_xyo_velocity is
// absent from the published task table; it gets 3 as a flagged extension.
inline double task_flag(TaskKind k) {
  switch (k) {
    case TaskKind::go_to_xy:
    case TaskKind::go_to_xyz:
      return 0.0;
    case TaskKind::go_to_pose_2d:
    case TaskKind::go_to_pose_3d:
      return 1.0;
    case TaskKind::track_xy_velocity:
    case TaskKind::track_xyz_velocity:
      return 2.0;
    case TaskKind::track_xyo_velocity:
      return 3.0;
  }
  return 0.0;
}

inline int td_width(TaskKind k) { return is_planar(k) ? 4 : 9; }

// Populated td entries; the remaining slots are zero-filled.
inline int td_used(TaskKind k) {
  switch (k) {
    case TaskKind::go_to_xy: return 2;
    case TaskKind::go_to_pose_2d: return 4;
    case TaskKind::track_xy_velocity: return 2;
    case TaskKind::track_xyo_velocity: return 3;
    case TaskKind::go_to_xyz: return 3;
    case TaskKind::go_to_pose_3d: return 9;
    case TaskKind::track_xyz_velocity: return 3;
  }
  return 0;
}

inline int observation_dim(TaskKind k) { return is_planar(k) ? 10 : 22; }

// Per-dimension input conditioning for policy networks: position deltas span
// the +-10 m out-of-bounds envelope and saturate tanh trunks, so they are
// compressed; unit-scale entries (trig pairs, velocities, rotation rows, tf)
// pass through. Observations themselves are never rescaled.
inline std::vector<double> observation_scale(TaskKind k) {
  std::vector<double> s(static_cast<std::size_t>(observation_dim(k)), 1.0);
  const double pos_scale = 0.2;
  int td0 = is_planar(k) ? 6 : 13;
  switch (k) {
    case TaskKind::go_to_xy:
    case TaskKind::go_to_pose_2d:
      s[static_cast<std::size_t>(td0)] = pos_scale;
      s[static_cast<std::size_t>(td0) + 1] = pos_scale;
      break;
    case TaskKind::go_to_xyz:
    case TaskKind::go_to_pose_3d:
      s[static_cast<std::size_t>(td0)] = pos_scale;
      s[static_cast<std::size_t>(td0) + 1] = pos_scale;
      s[static_cast<std::size_t>(td0) + 2] = pos_scale;
      break;
    default:
      break;
  }
  return s;
}

inline int default_action_dim(TaskKind k) { return is_planar(k) ? 8 : 16; }

inline std::string_view task_name(TaskKind k) {
  switch (k) {
    case TaskKind::go_to_xy: return "gotoxy";
    case TaskKind::go_to_pose_2d: return "gotopose2d";
    case TaskKind::track_xy_velocity: return "trackxyvel";
    case TaskKind::track_xyo_velocity: return "trackxyovel";
    case TaskKind::go_to_xyz: return "gotoxyz";
    case TaskKind::go_to_pose_3d: return "gotopose3d";
    case TaskKind::track_xyz_velocity: return "trackxyzvel";
  }
  return "?";
}

inline TaskKind parse_task_name(std::string_view s) {
  for (TaskKind k :
       {TaskKind::go_to_xy, TaskKind::go_to_pose_2d, TaskKind::track_xy_velocity,
        TaskKind::track_xyo_velocity, TaskKind::go_to_xyz,
        TaskKind::go_to_pose_3d, TaskKind::track_xyz_velocity}) {
    if (task_name(k) == s) return k;
  }
  throw ConfigInvalid("unknown task kind '" + std::string(s) + "'");
}

struct TaskGoal {
  TaskKind kind = TaskKind::go_to_xy;
  Vec3 position = Vec3::Zero();     // GoTo* tasks [m]
  double heading = 0.0;             // go_to_pose_2d [rad], in (-pi, pi]
  Mat3 rotation = Mat3::Identity(); // go_to_pose_3d
  Vec3 velocity = Vec3::Zero();     // Track* tasks [m/s]
  double ang_rate = 0.0;            // track_xyo_velocity [rad/s]
};

struct GoalParams {
  double max_speed = 0.5;     // goal speed ~ U[0, max_speed]
  double max_ang_rate = 0.5;  // goal rate ~ U[-max_ang_rate, max_ang_rate]
};

struct SpawnParams {
  double eval_radius_min = 0.0;  // resolved per DoF class by defaults()
  double eval_radius_max = 0.0;
  double train_radius_min = 0.0;
  double train_radius_max = 0.0;

  static SpawnParams defaults(TaskKind k) {
    SpawnParams s;
    if (is_planar(k)) {
      s.eval_radius_min = 3.0;
      s.eval_radius_max = 4.0;
      s.train_radius_min = 1.0;
      s.train_radius_max = 4.0;
    } else {
      s.eval_radius_min = 1.0;
      s.eval_radius_max = 5.0;
      s.train_radius_min = 1.0;
      s.train_radius_max = 5.0;
    }
    return s;
  }
};

struct RewardParams {
  double sigma_pos = 0.5;     // [m]
  double sigma_rot = 0.25;    // [rad]
  double sigma_vel = 0.2;     // [m/s]
  double sigma_omega = 0.2;   // [rad/s]
  double action_cost = 0.01;  // per-step penalty scale
};

enum class SpawnMode { train, eval };

namespace detail {

inline Vec3 uniform_direction_s2(Rng& rng) {
  double z = rng.uniform(-1.0, 1.0);
  double phi = rng.uniform(-kPi, kPi);
  double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return Vec3(r * std::cos(phi), r * std::sin(phi), z);
}

// Shoemake's method: uniform over SO(3).
inline geom::UnitQuaternion uniform_rotation(Rng& rng) {
  double u1 = rng.uniform();
  double u2 = rng.uniform();
  double u3 = rng.uniform();
  double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  return geom::UnitQuaternion{b * std::cos(2.0 * kPi * u3),
                              a * std::sin(2.0 * kPi * u2),
                              a * std::cos(2.0 * kPi * u2),
                              b * std::sin(2.0 * kPi * u3)}
      .normalized();
}

}  // namespace detail

// Goals for GoTo tasks sit at the origin (the craft spawns offset); velocity
// goals are drawn uniform in direction with speed U[0, max_speed].
inline TaskGoal sample_goal(TaskKind kind, const GoalParams& gp, Rng& rng) {
  TaskGoal g;
  g.kind = kind;
  switch (kind) {
    case TaskKind::go_to_xy:
    case TaskKind::go_to_xyz:
      break;
    case TaskKind::go_to_pose_2d:
      g.heading = geom::wrap_angle(rng.uniform(-kPi, kPi));
      break;
    case TaskKind::go_to_pose_3d:
      g.rotation = detail::uniform_rotation(rng).to_matrix();
      break;
    case TaskKind::track_xy_velocity:
    case TaskKind::track_xyo_velocity: {
      double ang = rng.uniform(-kPi, kPi);
      double speed = rng.uniform(0.0, gp.max_speed);
      g.velocity = Vec3(speed * std::cos(ang), speed * std::sin(ang), 0.0);
      if (kind == TaskKind::track_xyo_velocity)
        g.ang_rate = rng.uniform(-gp.max_ang_rate, gp.max_ang_rate);
      break;
    }
    case TaskKind::track_xyz_velocity: {
      double speed = rng.uniform(0.0, gp.max_speed);
      g.velocity = speed * detail::uniform_direction_s2(rng);
      break;
    }
  }
  return g;
}

inline RigidState sample_initial_state(TaskKind kind, SpawnMode mode,
                                       const SpawnParams& sp, Rng& rng) {
  const bool eval = (mode == SpawnMode::eval);
  const double r_min = eval ? sp.eval_radius_min : sp.train_radius_min;
  const double r_max = eval ? sp.eval_radius_max : sp.train_radius_max;
  RigidState s;
  double r = rng.uniform(r_min, r_max);
  if (is_planar(kind)) {
    double alpha = rng.uniform(-kPi, kPi);
    s.position = Vec3(r * std::cos(alpha), r * std::sin(alpha), 0.0);
    s.orientation =
        geom::UnitQuaternion::from_yaw(rng.uniform(-kPi, kPi));
  } else {
    s.position = r * detail::uniform_direction_s2(rng);
    s.orientation = detail::uniform_rotation(rng);
  }
  return s;
}

namespace detail {

inline void check_kind(TaskKind kind, const TaskGoal& goal, const char* where) {
  if (goal.kind != kind)
    throw KindMismatch(std::string(where) + ": goal built for '" +
                       std::string(task_name(goal.kind)) + "', task is '" +
                       std::string(task_name(kind)) + "'");
}

}  // namespace detail

// Task-specific data, laid out per the task table; deltas are goal - current
// in the world frame. Returns the number of populated slots.
inline int task_data_into(TaskKind kind, const RigidState& s,
                          const TaskGoal& g, std::span<double> out) {
  detail::check_kind(kind, g, "task_data");
  const Vec3 dp = g.position - s.position;
  switch (kind) {
    case TaskKind::go_to_xy:
      out[0] = dp.x();
      out[1] = dp.y();
      return 2;
    case TaskKind::go_to_pose_2d: {
      double dtheta = geom::heading_delta(s.orientation.yaw(), g.heading);
      out[0] = dp.x();
      out[1] = dp.y();
      out[2] = std::cos(dtheta);
      out[3] = std::sin(dtheta);
      return 4;
    }
    case TaskKind::track_xy_velocity: {
      Vec3 dv = g.velocity - s.lin_vel;
      out[0] = dv.x();
      out[1] = dv.y();
      return 2;
    }
    case TaskKind::track_xyo_velocity: {
      Vec3 dv = g.velocity - s.lin_vel;
      out[0] = dv.x();
      out[1] = dv.y();
      out[2] = g.ang_rate - s.ang_vel.z();
      return 3;
    }
    case TaskKind::go_to_xyz:
      out[0] = dp.x();
      out[1] = dp.y();
      out[2] = dp.z();
      return 3;
    case TaskKind::go_to_pose_3d: {
      Mat3 dr = geom::relative_rotation(s.orientation.to_matrix(), g.rotation);
      out[0] = dp.x();
      out[1] = dp.y();
      out[2] = dp.z();
      // first two rows of dR, row-major
      out[3] = dr(0, 0);
      out[4] = dr(0, 1);
      out[5] = dr(0, 2);
      out[6] = dr(1, 0);
      out[7] = dr(1, 1);
      out[8] = dr(1, 2);
      return 9;
    }
    case TaskKind::track_xyz_velocity: {
      Vec3 dv = g.velocity - s.lin_vel;
      out[0] = dv.x();
      out[1] = dv.y();
      out[2] = dv.z();
      return 3;
    }
  }
  return 0;
}

inline std::vector<double> task_data(TaskKind kind, const RigidState& s,
                                     const TaskGoal& g) {
  std::vector<double> td(static_cast<std::size_t>(td_width(kind)), 0.0);
  task_data_into(kind, s, g, td);
  return td;
}

// Observation layouts:
//   3DoF (10): cos t, sin t, vx, vy, wz, tf, td1..td4
//   6DoF (22): 6D, vx, vy, vz, wx, wy, wz, tf, td1..td9
// Velocities are world frame; the 6D block encodes the absolute attitude.
inline void observe_into(TaskKind kind, const RigidState& s, const TaskGoal& g,
                         std::span<double> out) {
  detail::check_kind(kind, g, "observe");
  if (static_cast<int>(out.size()) != observation_dim(kind))
    throw ShapeMismatch("observe: output span has wrong width");
  std::size_t i = 0;
  if (is_planar(kind)) {
    double theta = s.orientation.yaw();
    out[i++] = std::cos(theta);
    out[i++] = std::sin(theta);
    out[i++] = s.lin_vel.x();
    out[i++] = s.lin_vel.y();
    out[i++] = s.ang_vel.z();
  } else {
    geom::SixD sixd = geom::rotmat_to_sixd(s.orientation.to_matrix());
    for (int k = 0; k < 6; ++k) out[i++] = sixd[k];
    Vec3 w_world = s.orientation.rotate(s.ang_vel);
    out[i++] = s.lin_vel.x();
    out[i++] = s.lin_vel.y();
    out[i++] = s.lin_vel.z();
    out[i++] = w_world.x();
    out[i++] = w_world.y();
    out[i++] = w_world.z();
  }
  out[i++] = task_flag(kind);
  std::fill(out.begin() + i, out.end(), 0.0);
  task_data_into(kind, s, g, out.subspan(i));
}

inline std::vector<double> observe(TaskKind kind, const RigidState& s,
                                   const TaskGoal& g) {
  std::vector<double> obs(static_cast<std::size_t>(observation_dim(kind)));
  observe_into(kind, s, g, obs);
  return obs;
}

inline int fired_count(ActionView action) {
  int n = 0;
  for (auto b : action) n += (b != 0);
  return n;
}

// Attitude error against the goal, in radians; zero for tasks without an
// attitude goal.
inline double rotation_error(TaskKind kind, const RigidState& s,
                             const TaskGoal& g) {
  switch (kind) {
    case TaskKind::go_to_pose_2d:
      return std::abs(geom::heading_delta(s.orientation.yaw(), g.heading));
    case TaskKind::go_to_pose_3d:
      return geom::rotation_angle(
          geom::relative_rotation(s.orientation.to_matrix(), g.rotation));
    default:
      return 0.0;
  }
}

// Exponential shaping kernels, each term in [0, 1] before the per-step
// action-count penalty.
inline double reward(TaskKind kind, const RigidState& next, const TaskGoal& g,
                     ActionView action, const RewardParams& rp) {
  detail::check_kind(kind, g, "reward");
  const double penalty =
      rp.action_cost * fired_count(action) / static_cast<double>(action.size());
  const double d = (g.position - next.position).norm();
  switch (kind) {
    case TaskKind::go_to_xy:
    case TaskKind::go_to_xyz:
      return std::exp(-d / rp.sigma_pos) - penalty;
    case TaskKind::go_to_pose_2d:
    case TaskKind::go_to_pose_3d: {
      double err = rotation_error(kind, next, g);
      return 0.5 * std::exp(-d / rp.sigma_pos) +
             0.5 * std::exp(-err / rp.sigma_rot) - penalty;
    }
    case TaskKind::track_xy_velocity:
    case TaskKind::track_xyz_velocity: {
      double dv = (g.velocity - next.lin_vel).norm();
      return std::exp(-dv / rp.sigma_vel) - penalty;
    }
    case TaskKind::track_xyo_velocity: {
      double dv = (g.velocity - next.lin_vel).norm();
      double dw = std::abs(g.ang_rate - next.ang_vel.z());
      return 0.5 * std::exp(-dv / rp.sigma_vel) +
             0.5 * std::exp(-dw / rp.sigma_omega) - penalty;
    }
  }
  return 0.0;
}

// Scalar progress metric: position distance for GoTo tasks, tracking error
// for velocity tasks.
inline double goal_distance(TaskKind kind, const RigidState& s,
                            const TaskGoal& g) {
  switch (kind) {
    case TaskKind::go_to_xy:
    case TaskKind::go_to_pose_2d:
    case TaskKind::go_to_xyz:
    case TaskKind::go_to_pose_3d:
      return (g.position - s.position).norm();
    case TaskKind::track_xy_velocity:
    case TaskKind::track_xyz_velocity:
      return (g.velocity - s.lin_vel).norm();
    case TaskKind::track_xyo_velocity: {
      double dv = (g.velocity - s.lin_vel).norm();
      double dw = g.ang_rate - s.ang_vel.z();
      return std::sqrt(dv * dv + dw * dw);
    }
  }
  return 0.0;
}

enum class DoneReason { none, horizon, out_of_bounds };

struct DoneInfo {
  bool done = false;
  DoneReason reason = DoneReason::none;
};

// Fixed horizon plus an escape bound on the distance to the goal position
// (the origin, for tasks without one).
inline DoneInfo episode_done(int step_index, const RigidState& s,
                             const TaskGoal& g, int horizon = 500,
                             double out_of_bounds_dist = 10.0) {
  if (!s.is_finite()) return {true, DoneReason::out_of_bounds};
  if ((g.position - s.position).norm() > out_of_bounds_dist)
    return {true, DoneReason::out_of_bounds};
  if (step_index >= horizon) return {true, DoneReason::horizon};
  return {};
}

}  // namespace ff::tasks
