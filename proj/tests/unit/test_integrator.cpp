#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "geonmpc/errors.hpp"
#include "geonmpc/integrator.hpp"
#include "test_support.hpp"

namespace geonmpc {
namespace {

using testing::random_input;
using testing::random_state;
using testing::random_vec;

RigidState hover_state() { return {RotationMatrix{}, Vec3(0, 0, 4), Vec3::Zero(), Vec3::Zero()}; }

StateTangent tangent_rate(const RigidState & x, const ControlInput & u, const RigidBodyParams & p)
{
  const StateDerivative d = continuous_dynamics(x, u, p);
  StateTangent t;
  t << d.dxi, d.dv, x.omega, d.domega;
  return t;
}

TEST(StepSpec, RejectsNonPositive)
{
  EXPECT_THROW(StepSpec(0.0), InvalidArgument);
  EXPECT_THROW(StepSpec(-0.01), InvalidArgument);
  EXPECT_DOUBLE_EQ(StepSpec(0.01).dt(), 0.01);
}

TEST(Retraction, LocalDifferenceInvertsRetract)
{
  std::mt19937_64 rng(21);
  for (int i = 0; i < 1000; ++i) {
    const RigidState x = random_state(rng);
    StateTangent d;
    d << random_vec(rng), random_vec(rng), random_vec(rng, 0.5), random_vec(rng);
    EXPECT_LE((local_difference(x, retract(x, d)) - d).norm(), 1e-12);
  }
}

TEST(StepPredictor, HoverIsExactFixedPoint)
{
  const RigidBodyParams p;
  const RigidState x = hover_state();
  const RigidState n = step_predictor(x, {p.hover_thrust(), Vec3::Zero()}, p, StepSpec(0.01));
  EXPECT_EQ(n, x);
}

TEST(StepPredictor, FreeFallEulerStep)
{
  const RigidBodyParams p;
  const RigidState n = step_predictor(RigidState{}, ControlInput{}, p, StepSpec(0.01));
  EXPECT_EQ(n.xi, Vec3::Zero());
  EXPECT_NEAR(n.v.z(), -0.0981, 1e-15);
  EXPECT_EQ(n.v.head<2>(), Eigen::Vector2d::Zero());
}

TEST(StepPredictor, NoOrthogonalityDriftWithoutReprojection)
{
  const RigidBodyParams p;
  const StepSpec s(0.01);
  std::mt19937_64 rng(22);
  RigidState x;
  x.omega      = Vec3(3.0, -2.0, 1.0);
  double worst = 0.0;
  for (int i = 0; i < 100000; ++i) {
    x = step_predictor(x, {p.hover_thrust(), random_vec(rng, 0.01)}, p, s);
    x.omega = x.omega.cwiseMax(-20.0).cwiseMin(20.0);
    worst   = std::max(worst, x.R.orthogonality_error());
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(StepPredictor, FirstOrderConsistencyWithContinuousDynamics)
{
  const RigidBodyParams p;
  std::mt19937_64 rng(23);
  for (int i = 0; i < 20; ++i) {
    const RigidState x   = random_state(rng);
    const ControlInput u = random_input(rng);
    const StateTangent f = tangent_rate(x, u, p);
    auto err             = [&](double h) {
      return (local_difference(x, step_predictor(x, u, p, StepSpec(h))) / h - f).norm();
    };
    const double ratio = err(1e-3) / err(5e-4);
    EXPECT_NEAR(ratio, 2.0, 0.05);
  }
}

TEST(StepPredictor, AnalyticJacobiansMatchCentralDifferences)
{
  const RigidBodyParams p;
  const StepSpec s(0.01);
  std::mt19937_64 rng(24);
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const RigidState x            = random_state(rng);
    const ControlInput u          = random_input(rng);
    const PredictorLinearization l = linearize_predictor(x, u, p, s);
    EXPECT_EQ(l.next, step_predictor(x, u, p, s));

    StateJacobian fdx;
    for (int k = 0; k < kStateDim; ++k) {
      StateTangent e = StateTangent::Zero();
      e(k)           = h;
      fdx.col(k) = (local_difference(l.next, step_predictor(retract(x, e), u, p, s)) -
                    local_difference(l.next, step_predictor(retract(x, -e), u, p, s))) /
                   (2 * h);
    }
    InputJacobian fdu;
    for (int k = 0; k < kInputDim; ++k) {
      const Vec4 e = h * Vec4::Unit(k);
      fdu.col(k) = (local_difference(l.next, step_predictor(x, ControlInput::from_vector(u.as_vector() + e), p, s)) -
                    local_difference(l.next, step_predictor(x, ControlInput::from_vector(u.as_vector() - e), p, s))) /
                   (2 * h);
    }
    EXPECT_LE((fdx - l.dx).norm(), 1e-5 * std::max(1.0, l.dx.norm()));
    EXPECT_LE((fdu - l.du).norm(), 1e-5 * std::max(1.0, l.du.norm()));
  }
}

TEST(StepPlant, HoverFixedPoint)
{
  const RigidBodyParams p;
  const RigidState x = hover_state();
  RigidState n       = x;
  for (int i = 0; i < 100; ++i) { n = step_plant(n, {p.hover_thrust(), Vec3::Zero()}, p, StepSpec(0.01), 10); }
  EXPECT_LE((local_difference(x, n)).norm(), 1e-10);
}

TEST(StepPlant, FourthOrderConvergence)
{
  const RigidBodyParams p;
  const StepSpec s(0.05);
  std::mt19937_64 rng(25);
  for (int i = 0; i < 10; ++i) {
    const RigidState x   = random_state(rng);
    const ControlInput u = random_input(rng);
    const RigidState ref = step_plant(x, u, p, s, 512);
    auto err             = [&](int n) {
      const RigidState y = step_plant(x, u, p, s, n);
      return std::max((y.xi - ref.xi).norm(), (y.v - ref.v).norm());
    };
    const double ratio = err(2) / err(4);
    EXPECT_GT(ratio, 12.0);
    EXPECT_LT(ratio, 20.0);
  }
}

TEST(StepPlant, StaysOnSo3)
{
  const RigidBodyParams p;
  std::mt19937_64 rng(26);
  RigidState x;
  x.omega      = Vec3(2.0, 1.0, -3.0);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    x     = step_plant(x, {p.hover_thrust(), random_vec(rng, 0.01)}, p, StepSpec(0.01), 10);
    worst = std::max(worst, x.R.orthogonality_error());
  }
  EXPECT_LE(worst, 1e-9);
}

TEST(StepPlant, RejectsZeroSubsteps)
{
  EXPECT_THROW(step_plant(RigidState{}, ControlInput{}, RigidBodyParams{}, StepSpec(0.01), 0), InvalidArgument);
}

}  // namespace
}  // namespace geonmpc
