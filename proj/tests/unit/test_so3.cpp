#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "geonmpc/errors.hpp"
#include "geonmpc/so3.hpp"
#include "test_support.hpp"

namespace geonmpc {
namespace {

using testing::axis_rotation;
using testing::random_rotation;
using testing::random_vec;

TEST(Skew, ZeroAndCanonicalBasis)
{
  EXPECT_EQ(skew(Vec3::Zero()), Mat3::Zero());
  Mat3 expected;
  expected << 0, -1, 0, 1, 0, 0, 0, 0, 0;
  EXPECT_EQ(skew(Vec3(0, 0, 1)), expected);
}

TEST(Skew, MatchesCrossProductAndIsExactlyAntisymmetric)
{
  std::mt19937_64 rng(1);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 v = random_vec(rng, 10.0);
    const Vec3 w = random_vec(rng, 10.0);
    EXPECT_LE((skew(v) * w - v.cross(w)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ(skew(v) + skew(v).transpose(), Mat3::Zero());
  }
}

TEST(Unskew, RoundTripAndErrors)
{
  EXPECT_EQ(unskew(Mat3::Zero()), Vec3::Zero());
  EXPECT_EQ(unskew(skew(Vec3(1, 2, 3))), Vec3(1, 2, 3));
  Mat3 sym = Mat3::Identity();
  sym(0, 1) = sym(1, 0) = 2.0;
  EXPECT_THROW(unskew(sym), NotSkewSymmetric);
}

TEST(Cayley, IdentityAndOrthogonality)
{
  EXPECT_LE((cayley(Vec3::Zero()).matrix() - Mat3::Identity()).norm(), 0.0);
  std::mt19937_64 rng(2);
  for (int i = 0; i < 1000; ++i) {
    const RotationMatrix r = cayley(random_vec(rng, 5.0));
    EXPECT_LE(r.orthogonality_error(), 1e-12);
    EXPECT_NEAR(r.matrix().determinant(), 1.0, 1e-12);
  }
}

TEST(Cayley, AgreesWithExponentialToSecondOrder)
{
  const double h = 1e-3;
  EXPECT_LE((cayley(Vec3(0, 0, h)).matrix() - expm_so3(Vec3(0, 0, h)).matrix()).norm(), 1e-9);

  // Leading term is S^3 / 12 with |S^3|_F = sqrt(2) s^3 for a unit axis.
  std::mt19937_64 rng(3);
  for (int i = 0; i < 20; ++i) {
    const Vec3 dir = random_vec(rng).normalized();
    double prev = 0.0;
    for (double s : {1e-1, 1e-2, 1e-3}) {
      const double err = (cayley(s * dir).matrix() - expm_so3(s * dir).matrix()).norm();
      EXPECT_NEAR(err / (s * s * s), std::sqrt(2.0) / 12.0, 1e-3);
      if (prev > 0.0) { EXPECT_NEAR(prev / err, 1000.0, 20.0); }
      prev = err;
    }
  }
}

TEST(ExpmSo3, CanonicalRotationAndTraceIdentity)
{
  EXPECT_LE((expm_so3(Vec3::Zero()).matrix() - Mat3::Identity()).norm(), 0.0);
  Mat3 rz;
  rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;
  EXPECT_LE((expm_so3(Vec3(0, 0, std::numbers::pi / 2)).matrix() - rz).norm(), 1e-15);

  std::mt19937_64 rng(4);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 v          = random_vec(rng, 3.0);
    const RotationMatrix r = expm_so3(v);
    EXPECT_NEAR(r.matrix().trace(), 1.0 + 2.0 * std::cos(v.norm()), 1e-12);
    EXPECT_LE(r.orthogonality_error(), 1e-12);
    EXPECT_NEAR(r.matrix().determinant(), 1.0, 1e-12);
  }
}

TEST(ExpmSo3, SmallAngleBranchIsContinuous)
{
  const Vec3 dir = Vec3(1, -2, 0.5).normalized();
  const Mat3 below = expm_so3(0.99e-6 * dir).matrix();
  const Mat3 above = expm_so3(1.01e-6 * dir).matrix();
  EXPECT_LE((below - above).norm(), 1e-7);
  EXPECT_LE((below - (Mat3::Identity() + skew(0.99e-6 * dir))).norm(), 1e-12);
}

TEST(CayleyInverse, RoundTripsAndSingularity)
{
  EXPECT_EQ(cayley_inverse(RotationMatrix{}), Vec3::Zero());
  const Vec3 v(0.1, -0.2, 0.3);
  EXPECT_LE((cayley_inverse(cayley(v)) - v).norm(), 1e-10);

  std::mt19937_64 rng(5);
  for (int i = 0; i < 1000; ++i) {
    const Vec3 w = random_vec(rng).normalized() * std::uniform_real_distribution<double>(0.0, 0.999)(rng);
    EXPECT_LE((cayley_inverse(cayley(w)) - w).norm(), 1e-10);
    const RotationMatrix r = random_rotation(rng);
    if (r.matrix().trace() > -0.9) {
      EXPECT_LE((cayley(cayley_inverse(r)).matrix() - r.matrix()).norm(), 1e-10);
    }
  }
  EXPECT_THROW(cayley_inverse(axis_rotation(Vec3::UnitX(), std::numbers::pi)), CayleySingular);
}

TEST(CayleyJacobians, MatchFiniteDifferences)
{
  std::mt19937_64 rng(6);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const Vec3 v = random_vec(rng, 2.0);
    Mat3 fd_right, fd_left;
    for (int k = 0; k < 3; ++k) {
      const Vec3 e = h * Vec3::Unit(k);
      const Mat3 plus  = cayley(v + e).matrix();
      const Mat3 minus = cayley(v - e).matrix();
      // cay(v) ^T cay(v +- e) = cay(+-J_r e), cay(v +- e) cay(v)^T = cay(+-J_l e)
      const Vec3 rp = cayley_inverse(RotationMatrix::unchecked(cayley(v).matrix().transpose() * plus));
      const Vec3 rm = cayley_inverse(RotationMatrix::unchecked(cayley(v).matrix().transpose() * minus));
      const Vec3 lp = cayley_inverse(RotationMatrix::unchecked(plus * cayley(v).matrix().transpose()));
      const Vec3 lm = cayley_inverse(RotationMatrix::unchecked(minus * cayley(v).matrix().transpose()));
      fd_right.col(k) = (rp - rm) / (2 * h);
      fd_left.col(k)  = (lp - lm) / (2 * h);
    }
    EXPECT_LE((fd_right - cayley_right_jacobian(v)).norm(), 1e-7);
    EXPECT_LE((cayley_right_jacobian(v) * cayley_right_jacobian_inverse(v) - Mat3::Identity()).norm(), 1e-12);
    EXPECT_LE((cayley_left_jacobian_inverse(v) * fd_left - Mat3::Identity()).norm(), 1e-7);
  }
}

TEST(AttitudeError, ExamplesFromDefinition)
{
  AttitudeErrorWeights unit;
  unit.k1 = 1.0;
  unit.k2 = 1.0;
  std::mt19937_64 rng(7);
  const RotationMatrix any = random_rotation(rng);
  EXPECT_NEAR(attitude_error(any, any, unit), 0.0, 1e-15);

  const RotationMatrix flip = axis_rotation(Vec3::UnitX(), std::numbers::pi);
  EXPECT_NEAR(attitude_error_component(flip, RotationMatrix{}, unit.e1), 0.0, 1e-15);
  EXPECT_NEAR(attitude_error_component(flip, RotationMatrix{}, unit.e2), 2.0, 1e-15);
  EXPECT_NEAR(attitude_error(flip, RotationMatrix{}, unit), 2.0, 1e-15);

  const AttitudeErrorWeights paper;  // k1 = 10, k2 = 1
  EXPECT_NEAR(attitude_error(axis_rotation(Vec3::UnitZ(), std::numbers::pi / 2), RotationMatrix{}, paper), 11.0,
              1e-14);
}

TEST(AttitudeError, NonNegativeAndZeroOnlyAtTarget)
{
  const AttitudeErrorWeights w;
  std::mt19937_64 rng(8);
  for (int i = 0; i < 100000; ++i) {
    const RotationMatrix r  = random_rotation(rng);
    const RotationMatrix rd = random_rotation(rng);
    const double psi        = attitude_error(r, rd, w);
    EXPECT_GE(psi, 0.0);
    if ((r.matrix() - rd.matrix()).norm() >= 1e-12) { ASSERT_GT(psi, 0.0); }
  }
}

TEST(AttitudeError, GradientMatchesRightPerturbation)
{
  const AttitudeErrorWeights w;
  std::mt19937_64 rng(9);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const RotationMatrix r  = random_rotation(rng);
    const RotationMatrix rd = random_rotation(rng);
    Vec3 fd;
    for (int k = 0; k < 3; ++k) {
      fd(k) = (attitude_error(r * cayley(h * Vec3::Unit(k)), rd, w) -
               attitude_error(r * cayley(-h * Vec3::Unit(k)), rd, w)) /
              (2 * h);
    }
    EXPECT_LE((fd - attitude_error_gradient(r, rd, w)).norm(), 1e-7);
  }
}

TEST(AttitudeErrorWeights, ValidationRejectsBadAxes)
{
  AttitudeErrorWeights w;
  EXPECT_NO_THROW(w.validate());
  w.e2 = Vec3(1, 1, 0).normalized();
  EXPECT_THROW(w.validate(), InvalidArgument);
  w    = {};
  w.k2 = 0.0;
  EXPECT_THROW(w.validate(), InvalidArgument);
}

TEST(RotationMatrix, ValidationAndProjection)
{
  Mat3 m = Mat3::Identity();
  m(0, 1) = 1e-3;
  EXPECT_THROW(RotationMatrix::from_matrix(m), InvalidRotation);
  double dist = 0.0;
  const RotationMatrix p = RotationMatrix::project(m, &dist);
  EXPECT_LE(p.orthogonality_error(), 1e-14);
  EXPECT_GT(dist, 0.0);
  EXPECT_LT(dist, 1e-3);
  EXPECT_THROW(RotationMatrix::from_matrix(-Mat3::Identity()), InvalidRotation);
  EXPECT_THROW(RotationMatrix::project(Mat3::Zero()), InvalidRotation);
}

}  // namespace
}  // namespace geonmpc
