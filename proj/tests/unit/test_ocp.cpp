#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "geonmpc/errors.hpp"
#include "geonmpc/ocp.hpp"
#include "geonmpc/simulation.hpp"
#include "test_support.hpp"

namespace geonmpc {
namespace {

using testing::random_input;
using testing::random_state;

TEST(Equilibrium, HoverIsPredictorFixedPoint)
{
  const RigidBodyParams p;
  const Equilibrium eq = Equilibrium::hover(Vec3(0, 0, 4), p);
  EXPECT_DOUBLE_EQ(eq.u_e.thrust, p.mass * p.gravity);
  EXPECT_NO_THROW(eq.validate(p, StepSpec(0.01)));

  Equilibrium bad = eq;
  bad.u_e.thrust *= 1.01;
  EXPECT_THROW(bad.validate(p, StepSpec(0.01)), InvalidArgument);
}

TEST(OcpSpec, Validation)
{
  OcpSpec s;
  EXPECT_NO_THROW(s.validate());
  s.horizon = 3;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s      = {};
  s.zeta = 0.99;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s              = {};
  s.weights.ktau = 0.0;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s                 = {};
  s.state_bounds.v = BoxBounds{Vec3::Constant(1.0), Vec3::Constant(-1.0)};
  EXPECT_THROW(s.validate(), InvalidArgument);
  EXPECT_DOUBLE_EQ(OcpSpec{}.with_zeta(1.0).zeta, 1.0);
}

TEST(ErrorVector, Examples)
{
  const OcpSpec spec;
  const ErrorVector zero = error_vector(spec.equilibrium.state(), spec);
  EXPECT_EQ(zero.as_vector(), (Eigen::Matrix<double, 10, 1>::Zero()));

  RigidState x = spec.equilibrium.state();
  x.xi         = Vec3(1, 2, 3);
  EXPECT_EQ(error_vector(x, spec).xi_err, Vec3(1, 2, -1));

  // Upside-down start: psi from the printed entries is 10 (1 - 0.866) + (1 + 0.866).
  const Mat3 & r04 = paper_initial_conditions()[3].R;
  x.R              = RotationMatrix::project(r04);
  EXPECT_NEAR(error_vector(x, spec).psi, 3.206, 1e-3);
  EXPECT_NEAR(10.0 * (1.0 - r04(0, 0)) + (1.0 - r04(1, 1)), 3.206, 1e-12);
}

TEST(StageCost, Examples)
{
  const RigidBodyParams p;
  OcpSpec spec;
  const RigidState xe = spec.equilibrium.state();
  for (int j : {0, 7, 40}) { EXPECT_EQ(stage_cost(xe, spec.equilibrium.u_e, j, spec, p), 0.0); }

  RigidState x = xe;
  x.xi += Vec3(1, 0, 0);
  EXPECT_DOUBLE_EQ(state_cost(x, spec), 150.0);
  EXPECT_DOUBLE_EQ(stage_cost(x, spec.equilibrium.u_e, 0, spec, p), 150.0);

  spec.zeta = 1.2;
  EXPECT_NEAR(stage_cost(x, spec.equilibrium.u_e, 2, spec, p) / stage_cost(x, spec.equilibrium.u_e, 0, spec, p), 1.44,
              1e-14);
  EXPECT_THROW(stage_cost(x, nullptr, 41, spec, p), InvalidArgument);
}

TEST(StageCost, NonNegativeAndMonotoneInZeta)
{
  const RigidBodyParams p;
  std::mt19937_64 rng(31);
  OcpSpec spec;
  for (int i = 0; i < 1000; ++i) {
    const RigidState x   = random_state(rng);
    const ControlInput u = random_input(rng);
    double prev          = -1.0;
    for (double z : {1.0, 1.1, 1.2, 1.5}) {
      spec.zeta        = z;
      const double c   = stage_cost(x, u, 3, spec, p);
      EXPECT_GE(c, 0.0);
      EXPECT_GT(c, prev);
      prev = c;
    }
  }
}

TEST(StageCost, UnitZetaIsBitwiseSchemeOne)
{
  const RigidBodyParams p;
  std::mt19937_64 rng(32);
  const OcpSpec one = OcpSpec{}.with_zeta(1.0);
  for (int i = 0; i < 1000; ++i) {
    const RigidState x   = random_state(rng);
    const ControlInput u = random_input(rng);
    const double plain   = state_cost(x, one) + input_cost(x, u, one, p);
    for (int j : {0, 5, 40}) { EXPECT_EQ(stage_cost(x, u, j, one, p), plain); }
  }
}

TEST(StageResidual, SquaredNormIsStageCostAndJacobiansMatch)
{
  const RigidBodyParams p;
  std::mt19937_64 rng(33);
  const OcpSpec spec;
  const double h = 1e-6;
  for (int i = 0; i < 100; ++i) {
    const RigidState x   = random_state(rng);
    const ControlInput u = random_input(rng);
    const int j          = i % (spec.horizon + 1);
    const StageResidual r = stage_residual(x, &u, j, spec, p);
    EXPECT_NEAR(r.r.squaredNorm(), stage_cost(x, u, j, spec, p), 1e-9 * std::max(1.0, r.r.squaredNorm()));

    Eigen::Matrix<double, kResidualDim, kStateDim> fdx;
    for (int k = 0; k < kStateDim; ++k) {
      StateTangent e = StateTangent::Zero();
      e(k)           = h;
      fdx.col(k) = (stage_residual(retract(x, e), &u, j, spec, p).r - stage_residual(retract(x, -e), &u, j, spec, p).r) /
                   (2 * h);
    }
    Eigen::Matrix<double, kResidualDim, kInputDim> fdu;
    for (int k = 0; k < kInputDim; ++k) {
      const ControlInput up = ControlInput::from_vector(u.as_vector() + h * Vec4::Unit(k));
      const ControlInput um = ControlInput::from_vector(u.as_vector() - h * Vec4::Unit(k));
      fdu.col(k) = (stage_residual(x, &up, j, spec, p).r - stage_residual(x, &um, j, spec, p).r) / (2 * h);
    }
    EXPECT_LE((fdx - r.jx).norm(), 1e-5 * std::max(1.0, r.jx.norm()));
    EXPECT_LE((fdu - r.ju).norm(), 1e-5 * std::max(1.0, r.ju.norm()));
  }

  const StageResidual terminal = stage_residual(random_state(rng), nullptr, spec.horizon, spec, p);
  EXPECT_EQ(terminal.r.tail<6>(), (Eigen::Matrix<double, 6, 1>::Zero()));
  EXPECT_EQ(terminal.ju, (Eigen::Matrix<double, kResidualDim, kInputDim>::Zero()));
}

TEST(HorizonCost, Examples)
{
  const RigidBodyParams p;
  OcpSpec spec;
  spec.horizon = 4;
  const RigidState xe = spec.equilibrium.state();
  std::vector<RigidState> xs(5, xe);
  std::vector<ControlInput> us(4, spec.equilibrium.u_e);
  EXPECT_EQ(horizon_cost(xs, us, spec, p), 0.0);

  xs[2].xi += Vec3(0, 0.5, 0);
  EXPECT_DOUBLE_EQ(horizon_cost(xs, us, spec, p), stage_cost(xs[2], us[2], 2, spec, p));

  std::mt19937_64 rng(34);
  for (auto & x : xs) { x = random_state(rng); }
  for (auto & u : us) { u = random_input(rng); }
  std::vector<double> terms;
  for (int j = 0; j < 4; ++j) { terms.push_back(state_cost(xs[j], spec) * std::pow(spec.zeta, j) + input_cost(xs[j], us[j], spec, p)); }
  terms.push_back(state_cost(xs[4], spec) * std::pow(spec.zeta, 4));
  const double oracle = std::accumulate(terms.begin(), terms.end(), 0.0);
  EXPECT_NEAR(horizon_cost(xs, us, spec, p), oracle, 1e-12 * oracle);

  xs.pop_back();
  EXPECT_THROW(horizon_cost(xs, us, spec, p), LengthMismatch);
}

}  // namespace
}  // namespace geonmpc
