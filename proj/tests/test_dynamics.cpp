#include "freeflyer/dynamics.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace ff;
using dyn::Action;
using dyn::BodyParams;
using dyn::DofMode;
using dyn::RigidState;
using dyn::ThrusterLayout;
using geom::Vec3;

namespace {

ThrusterLayout random_layout(std::mt19937_64& eng, int n) {
  auto u = [&] { return (eng() >> 11) * 0x1.0p-53; };
  ThrusterLayout l;
  l.magnitude = 0.5 + u();
  for (int i = 0; i < n; ++i) {
    l.points.emplace_back(u() - 0.5, u() - 0.5, u() - 0.5);
    Vec3 d(u() - 0.5, u() - 0.5, u() - 0.5);
    while (d.norm() < 1e-3) d = Vec3(u() - 0.5, u() - 0.5, u() - 0.5);
    l.directions.push_back(d.normalized());
  }
  return l;
}

Action random_action(std::mt19937_64& eng, std::size_t n) {
  Action a(n);
  for (auto& b : a) b = eng() & 1u;
  return a;
}

}  // namespace

TEST(NetWrench, AllOffIsZero) {
  auto l = dyn::default_layout_3dof();
  Action a(l.size(), 0);
  auto w = dyn::net_wrench(l, a);
  EXPECT_EQ(w.force, Vec3::Zero());
  EXPECT_EQ(w.torque, Vec3::Zero());
}

TEST(NetWrench, SingleThrusterCrossProduct) {
  ThrusterLayout l;
  l.magnitude = 1.0;
  l.points = {Vec3(0.25, 0, 0)};
  l.directions = {Vec3(0, 1, 0)};
  Action a{1};
  auto w = dyn::net_wrench(l, a);
  EXPECT_NEAR((w.force - Vec3(0, 1, 0)).norm(), 0.0, 1e-15);
  EXPECT_NEAR((w.torque - Vec3(0, 0, 0.25)).norm(), 0.0, 1e-15);
}

TEST(NetWrench, MatchesLoopOracleOn100RandomLayouts) {
  std::mt19937_64 eng(31);
  for (int trial = 0; trial < 100; ++trial) {
    int n = 1 + static_cast<int>(eng() % 24);
    auto l = random_layout(eng, n);
    auto a = random_action(eng, l.size());
    auto w = dyn::net_wrench(l, a);
    Vec3 f = Vec3::Zero(), tau = Vec3::Zero();
    for (std::size_t i = 0; i < l.size(); ++i) {
      double bit = a[i] ? 1.0 : 0.0;
      f += bit * l.magnitude * l.directions[i];
      tau += bit * l.points[i].cross(l.magnitude * l.directions[i]);
    }
    EXPECT_LT((w.force - f).norm(), 1e-12);
    EXPECT_LT((w.torque - tau).norm(), 1e-12);
  }
}

// Exact on the default layouts (all terms are dyadic rationals, so no
// rounding occurs); within accumulation noise on arbitrary real layouts.
TEST(NetWrench, AdditiveOverDisjointSets) {
  std::mt19937_64 eng(37);
  for (int trial = 0; trial < 64; ++trial) {
    auto l = dyn::default_layout_6dof();
    Action a(l.size(), 0), b(l.size(), 0), both(l.size(), 0);
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (i % 2 == 0)
        a[i] = eng() & 1u;
      else
        b[i] = eng() & 1u;
      both[i] = a[i] | b[i];
    }
    auto wa = dyn::net_wrench(l, a);
    auto wb = dyn::net_wrench(l, b);
    auto w = dyn::net_wrench(l, both);
    EXPECT_EQ(w.force, wa.force + wb.force);
    EXPECT_EQ(w.torque, wa.torque + wb.torque);
  }
  for (int trial = 0; trial < 64; ++trial) {
    auto l = random_layout(eng, 16);
    Action a(l.size(), 0), b(l.size(), 0), both(l.size(), 0);
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (eng() & 1u)
        a[i] = 1;
      else
        b[i] = eng() & 1u;
      both[i] = a[i] | b[i];
    }
    auto wa = dyn::net_wrench(l, a);
    auto wb = dyn::net_wrench(l, b);
    auto w = dyn::net_wrench(l, both);
    EXPECT_LT((w.force - (wa.force + wb.force)).norm(), 1e-14);
    EXPECT_LT((w.torque - (wa.torque + wb.torque)).norm(), 1e-14);
  }
}

TEST(NetWrench, LayoutMismatchThrows) {
  auto l = dyn::default_layout_3dof();
  Action a(l.size() + 1, 0);
  EXPECT_THROW(dyn::net_wrench(l, a), LayoutMismatch);
}

TEST(WrenchMatrix, DefaultLayoutRanks) {
  EXPECT_EQ(dyn::wrench_rank(dyn::default_layout_3dof()), 3);
  EXPECT_EQ(dyn::wrench_rank(dyn::default_layout_6dof()), 6);
}

TEST(WrenchMatrix, SingleThrusterThroughComIsRankOne) {
  ThrusterLayout l;
  l.points = {Vec3::Zero()};
  l.directions = {Vec3(1, 0, 0)};
  EXPECT_EQ(dyn::wrench_rank(l), 1);
}

TEST(DefaultLayouts, ValidateAndPairGeometry) {
  auto l3 = dyn::default_layout_3dof();
  l3.validate(DofMode::planar);
  EXPECT_EQ(l3.size(), 8u);
  auto l6 = dyn::default_layout_6dof();
  l6.validate(DofMode::spatial);
  EXPECT_EQ(l6.size(), 16u);
  // mirror pair pushing +x produces zero torque; diagonal pair a pure couple
  Action push_x(8, 0);
  for (std::size_t i = 0; i < 8; ++i)
    if (l3.directions[i].x() > 0.5) push_x[i] = 1;
  auto w = dyn::net_wrench(l3, push_x);
  EXPECT_NEAR(w.force.x(), 2.0, 1e-15);
  EXPECT_NEAR(w.force.y(), 0.0, 1e-15);
  EXPECT_NEAR(w.torque.norm(), 0.0, 1e-15);
}

TEST(Step, FreeDriftIsExact) {
  RigidState s;
  s.lin_vel = Vec3(1, 0, 0);
  auto body = dyn::default_body_3dof();
  auto l = dyn::default_layout_3dof();
  Action none(l.size(), 0);
  RigidState out = dyn::step(s, body, l, none, 0.1, 10, DofMode::planar);
  EXPECT_DOUBLE_EQ(out.position.x(), 0.1);
  EXPECT_DOUBLE_EQ(out.position.y(), 0.0);
  EXPECT_DOUBLE_EQ(out.lin_vel.x(), 1.0);
}

// Semi-implicit Euler from rest: v_N = a h N, x_N = a h^2 N(N+1)/2.
TEST(Step, ConstantThrustMatchesDiscreteClosedForm) {
  auto body = dyn::default_body_3dof();
  auto l = dyn::default_layout_3dof();
  Action push_x(8, 0);
  for (std::size_t i = 0; i < 8; ++i)
    if (l.directions[i].x() > 0.5) push_x[i] = 1;

  RigidState s;
  const double control_dt = 0.1;
  const int substeps = 10;
  const int control_steps = 10;  // T = 1 s, N = 100 substeps
  for (int k = 0; k < control_steps; ++k)
    s = dyn::step(s, body, l, push_x, control_dt, substeps, DofMode::planar);

  const double a = 2.0 / body.mass;
  const double h = control_dt / substeps;
  const double n = control_steps * substeps;
  EXPECT_NEAR(s.lin_vel.x(), a * h * n, 1e-12);
  EXPECT_NEAR(s.position.x(), a * h * h * n * (n + 1) / 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(s.position.y(), 0.0);
  EXPECT_DOUBLE_EQ(s.orientation.yaw(), 0.0);
}

TEST(Step, PureCoupleSpinsWithoutTranslating) {
  auto body = dyn::default_body_3dof();
  auto l = dyn::default_layout_3dof();
  // the -x thrusters at (+,+) and +x at (-,-) form a couple
  Action couple(8, 0);
  for (std::size_t i = 0; i < 8; ++i) {
    if (l.directions[i].x() < -0.5 && l.points[i].x() > 0 && l.points[i].y() > 0)
      couple[i] = 1;
    if (l.directions[i].x() > 0.5 && l.points[i].x() < 0 && l.points[i].y() < 0)
      couple[i] = 1;
  }
  auto w = dyn::net_wrench(l, couple);
  ASSERT_NEAR(w.force.norm(), 0.0, 1e-15);
  ASSERT_GT(std::abs(w.torque.z()), 0.1);

  RigidState s;
  for (int k = 0; k < 50; ++k)
    s = dyn::step(s, body, l, couple, 0.1, 10, DofMode::planar);
  EXPECT_LT(s.position.norm(), 1e-12);
  EXPECT_GT(std::abs(s.orientation.yaw()), 0.1);
}

TEST(Step, ZeroActionConservesMomentumAndSpeed) {
  std::mt19937_64 eng(41);
  auto u = [&] { return (eng() >> 11) * 0x1.0p-53 - 0.5; };
  auto body = dyn::default_body_6dof();
  auto l = dyn::default_layout_6dof();
  Action none(l.size(), 0);
  for (int trial = 0; trial < 20; ++trial) {
    RigidState s;
    s.position = Vec3(u(), u(), u());
    s.orientation = geom::UnitQuaternion::from_axis_angle(
        Vec3(u() + 1e-3, u(), u()), u() * 3.0);
    s.lin_vel = Vec3(u(), u(), u());
    s.ang_vel = Vec3(u(), u(), u());
    Vec3 v0 = s.lin_vel;
    double speed0 = s.lin_vel.norm();
    // world-frame angular momentum R I w
    Vec3 L0 = s.orientation.to_matrix() * (body.inertia * s.ang_vel);
    Vec3 L_prev = L0;
    for (int k = 0; k < 100; ++k) {
      s = dyn::step(s, body, l, none, 0.1, 10, DofMode::spatial);
      EXPECT_LT((s.lin_vel - v0).norm(), 1e-12);
      EXPECT_NEAR(s.lin_vel.norm(), speed0, 1e-12);
      Vec3 L = s.orientation.to_matrix() * (body.inertia * s.ang_vel);
      EXPECT_LT((L - L_prev).norm(), 1e-12);  // per-step drift
      L_prev = L;
    }
    Vec3 L_final = s.orientation.to_matrix() * (body.inertia * s.ang_vel);
    EXPECT_LT((L_final - L0).norm(), 1e-11);  // accumulated
  }
}

TEST(Step, PlanarChannelsStayIdenticallyZero) {
  std::mt19937_64 eng(43);
  auto body = dyn::default_body_3dof();
  auto l = dyn::default_layout_3dof();
  RigidState s;
  s.orientation = geom::UnitQuaternion::from_yaw(1.3);
  for (int k = 0; k < 100000; ++k) {
    auto a = random_action(eng, l.size());
    s = dyn::step(s, body, l, a, 0.1, 2, DofMode::planar);
    ASSERT_EQ(s.position.z(), 0.0);
    ASSERT_EQ(s.lin_vel.z(), 0.0);
    ASSERT_EQ(s.ang_vel.x(), 0.0);
    ASSERT_EQ(s.ang_vel.y(), 0.0);
    ASSERT_EQ(s.orientation.x, 0.0);
    ASSERT_EQ(s.orientation.y, 0.0);
  }
  // it actually moved
  EXPECT_GT(s.position.head<2>().norm(), 0.0);
}

// Fixed action sequence; error vs a fine reference halves when h halves.
TEST(Step, SubstepFirstOrderConvergence) {
  std::mt19937_64 eng(47);
  auto body = dyn::default_body_6dof();
  auto l = dyn::default_layout_6dof();
  std::vector<Action> seq;
  for (int k = 0; k < 100; ++k) seq.push_back(random_action(eng, l.size()));

  auto run = [&](int substeps) {
    RigidState s;
    s.ang_vel = Vec3(0.1, -0.2, 0.3);
    for (auto& a : seq)
      s = dyn::step(s, body, l, a, 0.1, substeps, DofMode::spatial);
    return s;
  };
  RigidState ref = run(400);
  double e10 = (run(10).position - ref.position).norm() +
               (run(10).lin_vel - ref.lin_vel).norm();
  double e20 = (run(20).position - ref.position).norm() +
               (run(20).lin_vel - ref.lin_vel).norm();
  double e100 = (run(100).position - ref.position).norm() +
                (run(100).lin_vel - ref.lin_vel).norm();
  EXPECT_GT(e10, e20);
  EXPECT_GT(e20, e100);
  EXPECT_NEAR(e10 / e20, 2.0, 0.8);  // first order in h
}

TEST(Step, DeterministicBitwise) {
  std::mt19937_64 eng(53);
  auto body = dyn::default_body_6dof();
  auto l = dyn::default_layout_6dof();
  std::vector<Action> seq;
  for (int k = 0; k < 200; ++k) seq.push_back(random_action(eng, l.size()));
  auto run = [&] {
    RigidState s;
    s.ang_vel = Vec3(0.3, 0.1, -0.2);
    for (auto& a : seq) s = dyn::step(s, body, l, a, 0.1, 10, DofMode::spatial);
    return s;
  };
  RigidState a = run(), b = run();
  EXPECT_EQ(a.position, b.position);
  EXPECT_EQ(a.lin_vel, b.lin_vel);
  EXPECT_EQ(a.ang_vel, b.ang_vel);
  EXPECT_EQ(a.orientation.w, b.orientation.w);
  EXPECT_EQ(a.orientation.z, b.orientation.z);
}

TEST(Step, NonFiniteStateThrows) {
  auto body = dyn::default_body_3dof();
  auto l = dyn::default_layout_3dof();
  RigidState s;
  s.lin_vel = Vec3(std::numeric_limits<double>::infinity(), 0, 0);
  Action none(l.size(), 0);
  EXPECT_THROW(dyn::step(s, body, l, none, 0.1, 10, DofMode::planar),
               NonFiniteState);
}

TEST(BodyParams, ValidationRejectsBadInputs) {
  EXPECT_THROW(dyn::BodyParams::from_diagonal(-1.0, Vec3(1, 1, 1)).validate(),
               ConfigInvalid);
  EXPECT_THROW(dyn::BodyParams::from_diagonal(1.0, Vec3(1, -1, 1)).validate(),
               ConfigInvalid);
  EXPECT_NO_THROW(dyn::default_body_3dof().validate());
}

TEST(ThrusterLayout, ValidationRejectsBadInputs) {
  auto l = dyn::default_layout_3dof();
  l.directions[0] *= 1.1;
  EXPECT_THROW(l.validate(DofMode::planar), ConfigInvalid);
  auto l2 = dyn::default_layout_3dof();
  l2.points[0].z() = 0.01;
  EXPECT_THROW(l2.validate(DofMode::planar), ConfigInvalid);
  EXPECT_NO_THROW(l2.validate(DofMode::spatial));
}
