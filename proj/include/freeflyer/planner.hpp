#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "freeflyer/agent.hpp"
#include "freeflyer/vecenv.hpp"

namespace ff::plan {

using Vec2 = Eigen::Vector2d;

struct ReferencePath {
  std::vector<Vec2> points;
  bool closed = false;

  void validate(double lookahead_radius) const {
    if (points.size() < 2)
      throw ParamInvalid("path: need at least 2 points");
    auto gap = [](const Vec2& a, const Vec2& b) { return (a - b).norm(); };
    for (std::size_t i = 1; i < points.size(); ++i)
      if (gap(points[i - 1], points[i]) > lookahead_radius)
        throw ParamInvalid("path: spacing exceeds the look-ahead radius at " +
                           std::to_string(i));
    if (closed && gap(points.back(), points.front()) > lookahead_radius)
      throw ParamInvalid("path: seam gap exceeds the look-ahead radius");
  }
};

struct PlannerParams {
  double cruise_speed = 0.25;    // [m/s]
  double lookahead_radius = 0.25;  // [m]
  double spacing = 0.05;         // [m] between consecutive path points
  double circle_radius = 1.5;
  double spiral_r0 = 0.2;
  double spiral_rate = 0.08;  // dr/dphi
  double spiral_rmax = 2.0;
  double square_side = 2.0;

  void validate() const {
    if (!(cruise_speed > 0.0)) throw ParamInvalid("planner: cruise_speed must be > 0");
    if (!(lookahead_radius > 0.0))
      throw ParamInvalid("planner: lookahead_radius must be > 0");
    if (!(spacing > 0.0) || spacing > lookahead_radius)
      throw ParamInvalid("planner: need 0 < spacing <= lookahead_radius");
    if (!(circle_radius > 0.0) || !(square_side > 0.0) ||
        !(spiral_r0 > 0.0) || !(spiral_rate > 0.0) ||
        spiral_rmax <= spiral_r0)
      throw ParamInvalid("planner: degenerate shape parameters");
  }
};

struct Lookahead {
  Vec2 point = Vec2::Zero();
  std::size_t index = 0;
};

// Farthest point (greatest index) within the look-ahead disk; the globally
// closest point when the disk is empty. Ties break to the lower index.
inline Lookahead lookahead_point(const ReferencePath& path, const Vec2& pos,
                                 double radius = 0.25) {
  bool found = false;
  std::size_t best_in = 0;
  std::size_t best_near = 0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < path.points.size(); ++i) {
    double d = (path.points[i] - pos).norm();
    if (d <= radius) {
      found = true;
      best_in = i;  // scanning forward keeps the greatest index
    }
    if (d < best_dist) {
      best_dist = d;
      best_near = i;
    }
  }
  std::size_t idx = found ? best_in : best_near;
  return {path.points[idx], idx};
}

// cruise-speed command toward the target; zero on a degenerate offset
inline Vec2 velocity_command(const Vec2& target, const Vec2& pos,
                             double cruise) {
  if (!(cruise > 0.0)) throw ParamInvalid("velocity_command: cruise must be > 0");
  Vec2 offset = target - pos;
  double d = offset.norm();
  if (d < 1e-9) return Vec2::Zero();
  return cruise * (offset / d);
}

enum class PathShape { circle, spiral, square };

inline PathShape parse_shape(const std::string& s) {
  if (s == "circle") return PathShape::circle;
  if (s == "spiral") return PathShape::spiral;
  if (s == "square") return PathShape::square;
  throw ParamInvalid("unknown trajectory shape '" + s + "'");
}

inline ReferencePath gen_path(PathShape shape, const PlannerParams& pp) {
  pp.validate();
  ReferencePath path;
  switch (shape) {
    case PathShape::circle: {
      double r = pp.circle_radius;
      int n = static_cast<int>(std::ceil(2.0 * kPi * r / pp.spacing));
      for (int k = 0; k < n; ++k) {
        double a = 2.0 * kPi * k / n;
        path.points.emplace_back(r * std::cos(a), r * std::sin(a));
      }
      path.closed = true;
      break;
    }
    case PathShape::spiral: {
      double phi = 0.0;
      for (;;) {
        double r = pp.spiral_r0 + pp.spiral_rate * phi;
        if (r > pp.spiral_rmax) break;
        path.points.emplace_back(r * std::cos(phi), r * std::sin(phi));
        // arc-length step, midpoint-refined so chords stay under spacing
        double dphi = pp.spacing / std::hypot(r, pp.spiral_rate);
        double r_mid = r + 0.5 * pp.spiral_rate * dphi;
        phi += pp.spacing / std::hypot(r_mid, pp.spiral_rate);
      }
      path.closed = false;
      break;
    }
    case PathShape::square: {
      double h = pp.square_side / 2.0;
      Vec2 corners[4] = {{+h, +h}, {-h, +h}, {-h, -h}, {+h, -h}};
      int per_side =
          static_cast<int>(std::ceil(pp.square_side / pp.spacing));
      for (int side = 0; side < 4; ++side) {
        Vec2 a = corners[side], b = corners[(side + 1) % 4];
        for (int k = 0; k < per_side; ++k)
          path.points.emplace_back(a + (b - a) * (static_cast<double>(k) /
                                                  per_side));
      }
      path.closed = true;
      break;
    }
  }
  path.validate(pp.lookahead_radius);
  return path;
}

struct TrackRow {
  int step = 0;
  double x = 0.0, y = 0.0;          // position when the command was issued
  double cmd_vx = 0.0, cmd_vy = 0.0;
  double meas_vx = 0.0, meas_vy = 0.0;  // velocity after the control step
  long target_index = 0;
};

// Drives one velocity-tracking env along the path: look-ahead target ->
// cruise command -> policy action, logging commanded vs measured velocity.
inline std::vector<TrackRow> follow(const net::PolicyNet& net,
                                    vec::VecEnv& env,
                                    const ReferencePath& path, int steps,
                                    const PlannerParams& pp) {
  if (env.config().task != tasks::TaskKind::track_xy_velocity)
    throw PolicyTaskMismatch("follow: env task must be trackxyvel");
  if (env.n_envs() != 1)
    throw PolicyTaskMismatch("follow: expected a single-env batch");
  if (net.spec.obs_dim != env.obs_dim() ||
      net.spec.n_heads != env.action_dim())
    throw PolicyTaskMismatch("follow: policy shape does not match the env");
  path.validate(pp.lookahead_radius);

  std::vector<TrackRow> log;
  log.reserve(static_cast<std::size_t>(std::max(0, steps)));
  Eigen::MatrixXd logits;
  Eigen::VectorXd values;
  std::vector<std::uint8_t> actions(static_cast<std::size_t>(env.action_dim()));
  for (int t = 0; t < steps; ++t) {
    Vec2 pos = env.state(0).position.head<2>();
    Lookahead la = lookahead_point(path, pos, pp.lookahead_radius);
    Vec2 cmd = velocity_command(la.point, pos, pp.cruise_speed);
    env.set_goal_velocity(0, geom::Vec3(cmd.x(), cmd.y(), 0.0));
    net.forward(agent::obs_as_columns(env.observations(), env.obs_dim()),
                logits, values);
    agent::greedy_actions(logits, actions);
    env.step_batch(actions);
    TrackRow row;
    row.step = t;
    row.x = pos.x();
    row.y = pos.y();
    row.cmd_vx = cmd.x();
    row.cmd_vy = cmd.y();
    row.meas_vx = env.state(0).lin_vel.x();
    row.meas_vy = env.state(0).lin_vel.y();
    row.target_index = static_cast<long>(la.index);
    log.push_back(row);
  }
  return log;
}

}  // namespace ff::plan
