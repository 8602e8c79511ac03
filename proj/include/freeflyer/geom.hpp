#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <cmath>

#include "freeflyer/common.hpp"

namespace ff::geom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// First two columns of a rotation matrix, stored column-major (a1 then a2).
// Continuous over SO(3), which is why the observation encoder uses it.
using SixD = Eigen::Matrix<double, 6, 1>;

// Wrap to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a = kPi;
  return a;
}

// Signed heading difference theta_goal - theta, wrapped to (-pi, pi].
inline double heading_delta(double theta, double theta_goal) {
  return wrap_angle(theta_goal - theta);
}

// Unit quaternion, body-to-world. Normalized with w >= 0 after every
// operation that returns one, so the double cover never leaks out.
struct UnitQuaternion {
  double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

  static UnitQuaternion from_yaw(double theta) {
    return UnitQuaternion{std::cos(0.5 * theta), 0.0, 0.0,
                          std::sin(0.5 * theta)}
        .normalized();
  }

  static UnitQuaternion from_axis_angle(const Vec3& axis, double angle) {
    Vec3 u = axis.normalized();
    double s = std::sin(0.5 * angle);
    return UnitQuaternion{std::cos(0.5 * angle), s * u.x(), s * u.y(),
                          s * u.z()}
        .normalized();
  }

  double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }

  UnitQuaternion normalized() const {
    double n = norm();
    double s = (w < 0.0) ? -1.0 / n : 1.0 / n;
    return UnitQuaternion{w * s, x * s, y * s, z * s};
  }

  // Hamilton product this * rhs.
  UnitQuaternion operator*(const UnitQuaternion& r) const {
    return UnitQuaternion{w * r.w - x * r.x - y * r.y - z * r.z,
                          w * r.x + x * r.w + y * r.z - z * r.y,
                          w * r.y - x * r.z + y * r.w + z * r.x,
                          w * r.z + x * r.y - y * r.x + z * r.w};
  }

  Mat3 to_matrix() const {
    Mat3 m;
    m << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
        2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
        2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
    return m;
  }

  Vec3 rotate(const Vec3& v) const { return to_matrix() * v; }

  // Heading of a pure-z rotation; meaningful for planar states only.
  double yaw() const { return wrap_angle(2.0 * std::atan2(z, w)); }

  bool is_finite() const {
    return std::isfinite(w) && std::isfinite(x) && std::isfinite(y) &&
           std::isfinite(z);
  }
};

inline SixD rotmat_to_sixd(const Mat3& r) {
  SixD v;
  v << r(0, 0), r(1, 0), r(2, 0), r(0, 1), r(1, 1), r(2, 1);
  return v;
}

// Gram-Schmidt decode. Throws DegenerateSixD when the input cannot span a
// frame; that only happens on corrupt external input, never on encoder
// output.
inline Mat3 sixd_to_rotmat(const SixD& v) {
  Vec3 a1 = v.head<3>();
  Vec3 a2 = v.tail<3>();
  double n1 = a1.norm();
  if (n1 <= 1e-8) throw DegenerateSixD("sixd_to_rotmat: first triple ~ zero");
  Vec3 b1 = a1 / n1;
  Vec3 t = a2 - b1.dot(a2) * b1;
  double n2 = t.norm();
  if (n2 <= 1e-8)
    throw DegenerateSixD("sixd_to_rotmat: triples are (near-)parallel");
  Vec3 b2 = t / n2;
  Vec3 b3 = b1.cross(b2);
  Mat3 r;
  r.col(0) = b1;
  r.col(1) = b2;
  r.col(2) = b3;
  return r;
}

// Relative rotation Rs^T Rg between current and goal attitude.
inline Mat3 relative_rotation(const Mat3& rs, const Mat3& rg) {
  return rs.transpose() * rg;
}

// Geodesic angle of a rotation matrix, in [0, pi].
inline double rotation_angle(const Mat3& r) {
  double c = 0.5 * (r.trace() - 1.0);
  return std::acos(std::clamp(c, -1.0, 1.0));
}

// One exact exponential-map step for constant body-frame angular velocity.
inline UnitQuaternion integrate_orientation(const UnitQuaternion& q,
                                            const Vec3& omega_body,
                                            double dt) {
  Vec3 phi = omega_body * dt;
  double angle = phi.norm();
  double half = 0.5 * angle;
  // sin(half)/angle with a series fallback near zero
  double s = (angle > 1e-9) ? std::sin(half) / angle
                            : 0.5 - angle * angle / 48.0;
  UnitQuaternion dq{std::cos(half), s * phi.x(), s * phi.y(), s * phi.z()};
  return (q * dq).normalized();
}

}  // namespace ff::geom
