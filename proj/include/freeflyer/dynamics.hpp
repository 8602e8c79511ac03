#pragma once

#include <Eigen/Core>
#include <Eigen/SVD>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "freeflyer/common.hpp"
#include "freeflyer/geom.hpp"

namespace ff::dyn {

using geom::Mat3;
using geom::UnitQuaternion;
using geom::Vec3;

// One on/off bit per thruster.
using Action = std::vector<std::uint8_t>;
using ActionView = std::span<const std::uint8_t>;

enum class DofMode { planar, spatial };

struct BodyParams {
  double mass = 5.0;
  Mat3 inertia = Mat3::Identity();      // body frame, about the COM
  Mat3 inertia_inv = Mat3::Identity();  // cached

  static BodyParams from_diagonal(double mass, const Vec3& diag) {
    BodyParams p;
    p.mass = mass;
    p.inertia = diag.asDiagonal();
    p.inertia_inv = Vec3(diag.cwiseInverse()).asDiagonal();
    return p;
  }

  void validate() const {
    if (!(mass > 0.0)) throw ConfigInvalid("body: mass must be > 0");
    if (!inertia.isApprox(inertia.transpose(), 1e-12))
      throw ConfigInvalid("body: inertia must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat3> es(inertia);
    if (es.eigenvalues().minCoeff() <= 0.0)
      throw ConfigInvalid("body: inertia must be positive definite");
  }
};

struct ThrusterLayout {
  std::vector<Vec3> points;      // body-frame application points [m]
  std::vector<Vec3> directions;  // body-frame unit directions
  double magnitude = 1.0;        // [N] per thruster while firing

  std::size_t size() const { return points.size(); }

  void validate(DofMode mode) const {
    if (points.size() != directions.size() || points.empty())
      throw ConfigInvalid("thrusters: need matching, non-empty point/direction lists");
    for (std::size_t i = 0; i < directions.size(); ++i) {
      if (std::abs(directions[i].norm() - 1.0) > 1e-12)
        throw ConfigInvalid("thrusters: direction " + std::to_string(i) +
                            " is not unit length");
    }
    if (!(magnitude > 0.0)) throw ConfigInvalid("thrusters: magnitude must be > 0");
    if (mode == DofMode::planar) {
      for (std::size_t i = 0; i < points.size(); ++i) {
        if (points[i].z() != 0.0 || directions[i].z() != 0.0)
          throw ConfigInvalid("thrusters: planar layout requires z = 0 exactly "
                              "(thruster " + std::to_string(i) + ")");
      }
    }
  }
};

// Default planar layout: two thrusters at each corner of a 0.5 m square,
// one pushing along -sign(x)*x, one along -sign(y)*y. Mirror pairs give pure
// +-x / +-y translation; diagonal pairs give a pure z couple.
inline ThrusterLayout default_layout_3dof(double magnitude = 1.0) {
  ThrusterLayout l;
  l.magnitude = magnitude;
  const double c = 0.25;
  for (double sx : {+1.0, -1.0}) {
    for (double sy : {+1.0, -1.0}) {
      Vec3 corner(sx * c, sy * c, 0.0);
      l.points.push_back(corner);
      l.directions.push_back(Vec3(-sx, 0.0, 0.0));
      l.points.push_back(corner);
      l.directions.push_back(Vec3(0.0, -sy, 0.0));
    }
  }
  return l;
}

// Planar set plus one +z and one -z thruster at each corner (8 extra).
inline ThrusterLayout default_layout_6dof(double magnitude = 1.0) {
  ThrusterLayout l = default_layout_3dof(magnitude);
  const double c = 0.25;
  for (double sx : {+1.0, -1.0}) {
    for (double sy : {+1.0, -1.0}) {
      Vec3 corner(sx * c, sy * c, 0.0);
      l.points.push_back(corner);
      l.directions.push_back(Vec3(0.0, 0.0, +1.0));
      l.points.push_back(corner);
      l.directions.push_back(Vec3(0.0, 0.0, -1.0));
    }
  }
  return l;
}

inline BodyParams default_body_3dof() {
  return BodyParams::from_diagonal(5.0, Vec3(0.05, 0.05, 0.078));
}

inline BodyParams default_body_6dof() { return default_body_3dof(); }

struct RigidState {
  Vec3 position = Vec3::Zero();    // world [m]
  UnitQuaternion orientation{};  // body -> world
  Vec3 lin_vel = Vec3::Zero();     // world [m/s]
  Vec3 ang_vel = Vec3::Zero();     // body [rad/s]

  bool is_finite() const {
    return position.allFinite() && orientation.is_finite() &&
           lin_vel.allFinite() && ang_vel.allFinite();
  }
};

struct Wrench {
  Vec3 force = Vec3::Zero();   // body frame [N]
  Vec3 torque = Vec3::Zero();  // body frame [N*m]
};

inline Wrench net_wrench(const ThrusterLayout& layout, ActionView action) {
  if (action.size() != layout.size())
    throw LayoutMismatch("net_wrench: action length " +
                         std::to_string(action.size()) + " vs " +
                         std::to_string(layout.size()) + " thrusters");
  Wrench w;
  for (std::size_t i = 0; i < layout.size(); ++i) {
    if (!action[i]) continue;
    Vec3 f = layout.magnitude * layout.directions[i];
    w.force += f;
    w.torque += layout.points[i].cross(f);
  }
  return w;
}

// Column i is the unit-activation wrench (force; torque) of thruster i.
inline Eigen::MatrixXd wrench_matrix(const ThrusterLayout& layout) {
  Eigen::MatrixXd m(6, static_cast<Eigen::Index>(layout.size()));
  for (std::size_t i = 0; i < layout.size(); ++i) {
    Vec3 f = layout.magnitude * layout.directions[i];
    Vec3 tau = layout.points[i].cross(f);
    m.col(static_cast<Eigen::Index>(i)) << f, tau;
  }
  return m;
}

inline int wrench_rank(const ThrusterLayout& layout, double tol = 1e-9) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(wrench_matrix(layout));
  svd.setThreshold(tol);
  return static_cast<int>(svd.rank());
}

namespace detail {

// Planar fast path: only (x, y, theta, vx, vy, wz) are ever touched, so the
// z / roll / pitch channels stay identically zero.
inline RigidState step_planar(const RigidState& s, const BodyParams& p,
                              const Wrench& w, double h, int substeps) {
  double theta = s.orientation.yaw();
  double x = s.position.x(), y = s.position.y();
  double vx = s.lin_vel.x(), vy = s.lin_vel.y();
  double wz = s.ang_vel.z();
  const double inv_m = 1.0 / p.mass;
  const double inv_izz = p.inertia_inv(2, 2);
  const double fbx = w.force.x(), fby = w.force.y(), tz = w.torque.z();
  for (int k = 0; k < substeps; ++k) {
    double c = std::cos(theta), sn = std::sin(theta);
    vx += (c * fbx - sn * fby) * inv_m * h;
    vy += (sn * fbx + c * fby) * inv_m * h;
    x += vx * h;
    y += vy * h;
    wz += tz * inv_izz * h;
    theta = geom::wrap_angle(theta + wz * h);
  }
  RigidState out;
  out.position = Vec3(x, y, 0.0);
  out.orientation = UnitQuaternion::from_yaw(theta);
  out.lin_vel = Vec3(vx, vy, 0.0);
  out.ang_vel = Vec3(0.0, 0.0, wz);
  return out;
}

// The angular update propagates world-frame angular momentum and re-derives
// the body rate each substep. To first order this equals the textbook
// w += I^-1 (tau - w x Iw) h update, but zero-torque angular momentum is
// conserved exactly instead of drifting at O(h^2) per substep.
inline RigidState step_spatial(const RigidState& s, const BodyParams& p,
                               const Wrench& w, double h, int substeps) {
  RigidState out = s;
  const double inv_m = 1.0 / p.mass;
  Mat3 rot = out.orientation.to_matrix();
  Vec3 ang_mom = rot * (p.inertia * out.ang_vel);  // world frame
  for (int k = 0; k < substeps; ++k) {
    Vec3 f_world = rot * w.force;
    out.lin_vel += f_world * (inv_m * h);
    out.position += out.lin_vel * h;
    ang_mom += (rot * w.torque) * h;
    Vec3 omega = p.inertia_inv * (rot.transpose() * ang_mom);
    out.orientation = geom::integrate_orientation(out.orientation, omega, h);
    rot = out.orientation.to_matrix();
  }
  out.ang_vel = p.inertia_inv * (rot.transpose() * ang_mom);
  return out;
}

}  // namespace detail

// Semi-implicit Euler over `substeps` of h = control_dt / substeps, the
// action held constant. Gravity-free.
inline RigidState step(const RigidState& state, const BodyParams& params,
                       const ThrusterLayout& layout, ActionView action,
                       double control_dt, int substeps, DofMode mode) {
  if (!(control_dt > 0.0) || substeps < 1)
    throw ConfigInvalid("step: control_dt must be > 0 and substeps >= 1");
  Wrench w = net_wrench(layout, action);
  double h = control_dt / substeps;
  RigidState out = (mode == DofMode::planar)
                       ? detail::step_planar(state, params, w, h, substeps)
                       : detail::step_spatial(state, params, w, h, substeps);
  if (!out.is_finite())
    throw NonFiniteState("step: state left the finite domain");
  return out;
}

}  // namespace ff::dyn
