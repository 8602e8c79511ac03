#include "freeflyer/geom.hpp"

#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace ff;
using geom::Mat3;
using geom::SixD;
using geom::UnitQuaternion;
using geom::Vec3;

TEST(RotmatToSixd, Identity) {
  SixD v = geom::rotmat_to_sixd(Mat3::Identity());
  SixD want;
  want << 1, 0, 0, 0, 1, 0;
  EXPECT_NEAR((v - want).norm(), 0.0, 1e-15);
}

TEST(RotmatToSixd, PiAboutZ) {
  Mat3 r = Eigen::AngleAxisd(kPi, Vec3::UnitZ()).toRotationMatrix();
  SixD v = geom::rotmat_to_sixd(r);
  SixD want;
  want << -1, 0, 0, 0, -1, 0;
  EXPECT_NEAR((v - want).norm(), 0.0, 1e-12);
}

TEST(RotmatToSixd, RoundTrip1000) {
  std::mt19937_64 eng(7);
  for (int i = 0; i < 1000; ++i) {
    Mat3 r = test::random_rotation(eng);
    Mat3 back = geom::sixd_to_rotmat(geom::rotmat_to_sixd(r));
    EXPECT_LT(test::frobenius_diff(r, back), 1e-9);
  }
}

TEST(SixdToRotmat, IdentityAndGramSchmidt) {
  SixD id;
  id << 1, 0, 0, 0, 1, 0;
  EXPECT_LT(test::frobenius_diff(geom::sixd_to_rotmat(id), Mat3::Identity()),
            1e-15);
  SixD skew;  // normalization and orthogonalization remove the perturbation
  skew << 2, 0, 0, 1, 1, 0;
  EXPECT_LT(test::frobenius_diff(geom::sixd_to_rotmat(skew), Mat3::Identity()),
            1e-15);
}

TEST(SixdToRotmat, DegenerateInputThrows) {
  SixD v;
  v << 0, 0, 1e-12, 0, 0, 1e-12;
  EXPECT_THROW(geom::sixd_to_rotmat(v), DegenerateSixD);
  SixD parallel;
  parallel << 1, 0, 0, 1, 0, 0;
  EXPECT_THROW(geom::sixd_to_rotmat(parallel), DegenerateSixD);
}

TEST(SixdToRotmat, NoisyInputStillOrthonormal) {
  std::mt19937_64 eng(11);
  auto u = [&] { return (eng() >> 11) * 0x1.0p-53; };
  for (int i = 0; i < 500; ++i) {
    SixD v = geom::rotmat_to_sixd(test::random_rotation(eng));
    for (int k = 0; k < 6; ++k) v[k] += (2.0 * u() - 1.0) * 1e-3;
    Mat3 r = geom::sixd_to_rotmat(v);
    EXPECT_LT(test::frobenius_diff(r.transpose() * r, Mat3::Identity()), 1e-9);
    EXPECT_NEAR(r.determinant(), 1.0, 1e-9);
  }
}

// No representational jump along any single-axis sweep.
TEST(SixdToRotmat, ContinuityProbe) {
  std::mt19937_64 eng(13);
  auto u = [&] { return (eng() >> 11) * 0x1.0p-53; };
  const double eps = 1e-3;
  for (int trial = 0; trial < 8; ++trial) {
    double z = 2.0 * u() - 1.0;
    double phi = (2.0 * u() - 1.0) * kPi;
    double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    Vec3 axis(r * std::cos(phi), r * std::sin(phi), z);
    for (double a = -kPi; a <= kPi; a += 1e-2) {
      SixD lo = geom::rotmat_to_sixd(
          Eigen::AngleAxisd(a, axis).toRotationMatrix());
      SixD hi = geom::rotmat_to_sixd(
          Eigen::AngleAxisd(a + eps, axis).toRotationMatrix());
      EXPECT_LE((hi - lo).norm(), 2.0 * eps);
    }
  }
}

TEST(RelativeRotation, TrivialCases) {
  std::mt19937_64 eng(17);
  Mat3 r = test::random_rotation(eng);
  EXPECT_LT(test::frobenius_diff(geom::relative_rotation(r, r),
                                 Mat3::Identity()),
            1e-12);
  EXPECT_LT(
      test::frobenius_diff(geom::relative_rotation(Mat3::Identity(), r), r),
      1e-15);
}

TEST(RelativeRotation, CompositionOracle1000) {
  std::mt19937_64 eng(19);
  for (int i = 0; i < 1000; ++i) {
    Mat3 rs = test::random_rotation(eng);
    Mat3 rg = test::random_rotation(eng);
    Mat3 dr = geom::relative_rotation(rs, rg);
    EXPECT_LT(test::frobenius_diff(rs * dr, rg), 1e-9);
    EXPECT_LT(test::frobenius_diff(dr.transpose() * dr, Mat3::Identity()),
              1e-12);
  }
}

TEST(IntegrateOrientation, ZeroRateIsIdentity) {
  UnitQuaternion q = UnitQuaternion::from_axis_angle(Vec3(1, 2, 3), 0.7);
  UnitQuaternion q2 = geom::integrate_orientation(q, Vec3::Zero(), 0.1);
  EXPECT_NEAR(q.w, q2.w, 1e-15);
  EXPECT_NEAR(q.x, q2.x, 1e-15);
  EXPECT_NEAR(q.y, q2.y, 1e-15);
  EXPECT_NEAR(q.z, q2.z, 1e-15);
}

TEST(IntegrateOrientation, PiAboutZ) {
  UnitQuaternion q =
      geom::integrate_orientation(UnitQuaternion{}, Vec3(0, 0, kPi), 1.0);
  Mat3 want = Eigen::AngleAxisd(kPi, Vec3::UnitZ()).toRotationMatrix();
  EXPECT_LT(test::frobenius_diff(q.to_matrix(), want), 1e-12);
  EXPECT_NEAR(std::abs(q.z), 1.0, 1e-12);
  EXPECT_NEAR(q.w, 0.0, 1e-12);
}

TEST(IntegrateOrientation, FourQuarterTurnsCompose) {
  UnitQuaternion q;
  for (int i = 0; i < 4; ++i)
    q = geom::integrate_orientation(q, Vec3(0, 0, kPi / 2), 1.0);
  EXPECT_LT(test::frobenius_diff(q.to_matrix(), Mat3::Identity()), 1e-9);
}

TEST(IntegrateOrientation, NormPreservedOverMillionSteps) {
  UnitQuaternion q;
  Vec3 omega(0.3, -0.2, 0.1);
  for (int i = 0; i < 1000000; ++i) {
    q = geom::integrate_orientation(q, omega, 0.01);
    double n = q.norm();
    ASSERT_LE(std::abs(n - 1.0), 1e-12);
  }
}

namespace {
// independent oracle: minimize |tg - t + 2 pi k| over k in {-1, 0, 1}
double heading_delta_oracle(double t, double tg) {
  double best = 0.0, best_abs = 1e300;
  for (int k = -1; k <= 1; ++k) {
    double d = tg - t + 2.0 * kPi * k;
    if (std::abs(d) < best_abs) {
      best_abs = std::abs(d);
      best = d;
    }
  }
  return best;
}
}  // namespace

TEST(HeadingDelta, KnownValues) {
  EXPECT_DOUBLE_EQ(geom::heading_delta(0.0, 0.0), 0.0);
  EXPECT_NEAR(geom::heading_delta(kPi - 0.1, -kPi + 0.1), 0.2, 1e-12);
  EXPECT_NEAR(geom::heading_delta(1.0, 2.5), heading_delta_oracle(1.0, 2.5),
              1e-12);
  EXPECT_NEAR(geom::heading_delta(1.0, 2.5), 1.5, 1e-12);
}

TEST(HeadingDelta, RangeAndAntisymmetry) {
  std::mt19937_64 eng(23);
  auto u = [&] { return ((eng() >> 11) * 0x1.0p-53) * 8.0 - 4.0; };
  for (int i = 0; i < 5000; ++i) {
    double a = u(), b = u();
    double d = geom::heading_delta(a, b);
    EXPECT_GT(d, -kPi - 1e-15);
    EXPECT_LE(d, kPi);
    EXPECT_NEAR(d, heading_delta_oracle(a, b), 1e-9);
    if (std::abs(std::abs(d) - kPi) > 1e-9) {
      EXPECT_NEAR(geom::heading_delta(b, a), -d, 1e-12);
    }
  }
}

TEST(UnitQuaternion, CanonicalSignAndYaw) {
  UnitQuaternion q = UnitQuaternion::from_yaw(2.5);
  EXPECT_GE(q.w, 0.0);
  EXPECT_NEAR(q.yaw(), 2.5, 1e-12);
  UnitQuaternion flipped{-q.w, -q.x, -q.y, -q.z};
  UnitQuaternion canon = flipped.normalized();
  EXPECT_GE(canon.w, 0.0);
  EXPECT_NEAR(canon.yaw(), 2.5, 1e-12);
}
