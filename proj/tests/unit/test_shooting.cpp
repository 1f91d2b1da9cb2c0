#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "geonmpc/errors.hpp"
#include "geonmpc/shooting.hpp"
#include "test_support.hpp"

namespace geonmpc {
namespace {

using testing::random_rotation;
using testing::random_state;
using testing::random_vec;

OcpSpec short_spec(int horizon = 10)
{
  OcpSpec s;
  s.horizon = horizon;
  return s;
}

RigidState displaced(const OcpSpec & spec, const Vec3 & dxi)
{
  RigidState x = spec.equilibrium.state();
  x.xi += dxi;
  return x;
}

// Feasible rollout of the prediction model under the given controls.
std::vector<RigidState> rollout(const RigidState & x0, const std::vector<ControlInput> & us, const OcpSpec & spec,
                                const RigidBodyParams & p)
{
  std::vector<RigidState> xs{x0};
  for (const ControlInput & u : us) { xs.push_back(step_predictor(xs.back(), u, p, spec.dt)); }
  return xs;
}

TEST(Transcribe, Dimensions)
{
  const ShootingProblem prob = transcribe(RigidState{}, short_spec(4), QuadrotorParams{});
  EXPECT_EQ(prob.num_defects(), 48);
  EXPECT_EQ(prob.num_controls(), 16);
  EXPECT_EQ(prob.defects().size(), 48);
  EXPECT_EQ(prob.node_states.size(), 5u);
  EXPECT_EQ(prob.node_controls.size(), 4u);
}

TEST(Transcribe, EquilibriumGuessHasZeroDefectsAndObjective)
{
  const OcpSpec spec = short_spec();
  const ShootingProblem prob = transcribe(spec.equilibrium.state(), spec, QuadrotorParams{});
  EXPECT_EQ(prob.max_defect(), 0.0);
  EXPECT_EQ(prob.objective(), 0.0);
  EXPECT_TRUE(prob.equilibrium_admissible());
}

TEST(Transcribe, HoverGuessIsRolloutWithZeroDefects)
{
  const QuadrotorParams q;
  const OcpSpec spec = short_spec();
  std::mt19937_64 rng(51);
  for (int i = 0; i < 50; ++i) {
    const RigidState x0        = random_state(rng);
    const ShootingProblem prob = transcribe(x0, spec, q);
    EXPECT_EQ(prob.node_states.front(), x0);
    EXPECT_EQ(prob.node_controls.front().thrust, q.body.hover_thrust());
    EXPECT_LE(prob.max_defect(), 1e-12);
    for (const RigidState & x : prob.node_states) { EXPECT_LE(x.R.orthogonality_error(), 1e-12); }
  }
}

TEST(Transcribe, RejectsMismatchedGuessAndShortHorizon)
{
  const OcpSpec spec = short_spec();
  InitialGuess g     = hover_guess(spec.equilibrium.state(), spec, QuadrotorParams{});
  g.controls.pop_back();
  EXPECT_THROW(transcribe(spec.equilibrium.state(), spec, QuadrotorParams{}, &g), LengthMismatch);
  EXPECT_THROW(transcribe(RigidState{}, short_spec(3), QuadrotorParams{}), InvalidArgument);
}

TEST(LinearizeInterval, AnalyticMatchesCentralDifferencesOnRandomTranscriptions)
{
  const QuadrotorParams q;
  const OcpSpec spec = short_spec(4);
  std::mt19937_64 rng(52);
  std::uniform_real_distribution<double> thrust(0.0, 4.0 * q.rotor_max);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    ShootingProblem prob = transcribe(random_state(rng), spec, q);
    for (std::size_t j = 1; j < prob.node_states.size(); ++j) {
      StateTangent d;
      d << random_vec(rng, 0.1), random_vec(rng, 0.1), random_vec(rng, 0.1), random_vec(rng, 0.1);
      prob.node_states[j] = retract(prob.node_states[j], d);
    }
    for (ControlInput & u : prob.node_controls) { u = {thrust(rng), random_vec(rng, 0.3)}; }

    for (int i = 0; i < spec.horizon; ++i) {
      const auto k = static_cast<std::size_t>(i);
      const IntervalLinearization a = linearize_interval(prob.node_states[k], prob.node_controls[k],
                                                         prob.node_states[k + 1], q.body, spec.dt);
      const IntervalLinearization f =
        linearize_interval(prob.node_states[k], prob.node_controls[k], prob.node_states[k + 1], q.body, spec.dt,
                           DerivativeMode::FiniteDifference, 1e-6);
      EXPECT_EQ(a.defect, f.defect);
      const auto rel = [](const auto & x, const auto & y) { return (x - y).norm() / std::max(1.0, y.norm()); };
      worst = std::max({worst, rel(a.d_state, f.d_state), rel(a.d_input, f.d_input), rel(a.d_next, f.d_next)});
    }
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(LinearizeInterval, DefectIsPredictionMismatch)
{
  const QuadrotorParams q;
  const OcpSpec spec = short_spec();
  std::mt19937_64 rng(53);
  const RigidState x    = random_state(rng);
  const ControlInput u  = {q.body.hover_thrust(), Vec3::Zero()};
  const RigidState pred = step_predictor(x, u, q.body, spec.dt);
  EXPECT_LE(linearize_interval(x, u, pred, q.body, spec.dt).defect.norm(), 1e-14);

  StateTangent off = StateTangent::Zero();
  off(0)           = 0.25;
  const RigidState shifted = retract(pred, off);
  EXPECT_NEAR(linearize_interval(x, u, shifted, q.body, spec.dt).defect.norm(), 0.25, 1e-12);
}

TEST(Condense, ObjectiveGradientMatchesRolloutDifferences)
{
  const QuadrotorParams q;
  const OcpSpec spec = short_spec(6);
  std::mt19937_64 rng(54);
  ShootingSolver solver;
  const double h = 1e-6;
  for (int t = 0; t < 10; ++t) {
    const RigidState x0 = random_state(rng);
    ShootingProblem prob = transcribe(x0, spec, q);
    for (ControlInput & u : prob.node_controls) { u.torque = random_vec(rng, 0.05); }
    prob.node_states = rollout(x0, prob.node_controls, spec, q.body);

    const CondensedQp & c = solver.condense(prob);
    EXPECT_LE(c.s.cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::VectorXd grad = 2.0 * c.Gamma.transpose() * c.gamma;

    Eigen::VectorXd fd(prob.num_controls());
    for (int k = 0; k < prob.num_controls(); ++k) {
      std::vector<ControlInput> up = prob.node_controls, um = prob.node_controls;
      auto bump = [&](std::vector<ControlInput> & us, double s) {
        Vec4 v = us[static_cast<std::size_t>(k / kInputDim)].as_vector();
        v(k % kInputDim) += s;
        us[static_cast<std::size_t>(k / kInputDim)] = ControlInput::from_vector(v);
      };
      bump(up, h);
      bump(um, -h);
      fd(k) = (horizon_cost(rollout(x0, up, spec, q.body), up, spec, q.body) -
               horizon_cost(rollout(x0, um, spec, q.body), um, spec, q.body)) /
              (2 * h);
    }
    EXPECT_LE((fd - grad).norm(), 1e-5 * std::max(1.0, grad.norm()));
  }
}

TEST(Solve, EquilibriumConvergesImmediately)
{
  const QuadrotorParams q;
  const OcpSpec spec = OcpSpec{};
  ShootingProblem prob = transcribe(spec.equilibrium.state(), spec, q);
  const SolveResult r  = solve(prob);
  EXPECT_EQ(r.status, SolveStatus::Converged);
  EXPECT_LE(r.iterations, 2);
  EXPECT_EQ(r.objective, 0.0);
  for (const ControlInput & u : r.controls) { EXPECT_EQ(u, spec.equilibrium.u_e); }
}

TEST(Solve, BelowTargetClimbs)
{
  const QuadrotorParams q;
  const OcpSpec spec     = short_spec(20);
  const RigidState x0    = displaced(spec, Vec3(0, 0, -1));
  ShootingProblem prob   = transcribe(x0, spec, q);
  const SolveResult r    = solve(prob);
  ASSERT_EQ(r.status, SolveStatus::Converged);

  // Grid-search oracle over constant-thrust open-loop sequences.
  double best_t = 0.0, best_cost = std::numeric_limits<double>::infinity();
  for (double t = 0.5 * q.body.hover_thrust(); t <= 1.5 * q.body.hover_thrust(); t += 0.01 * q.body.hover_thrust()) {
    const std::vector<ControlInput> us(static_cast<std::size_t>(spec.horizon), ControlInput{t, Vec3::Zero()});
    const double cost = horizon_cost(rollout(x0, us, spec, q.body), us, spec, q.body);
    if (cost < best_cost) {
      best_cost = cost;
      best_t    = t;
    }
  }
  EXPECT_GT(best_t, q.body.hover_thrust());
  EXPECT_GT(r.controls.front().thrust, q.body.hover_thrust());
  EXPECT_LE(r.objective, best_cost);
}

TEST(Solve, ConvergedResultHonoursContract)
{
  const QuadrotorParams q;
  const OcpSpec spec = short_spec(20);
  std::mt19937_64 rng(55);
  SolverConfig cfg;
  for (int t = 0; t < 10; ++t) {
    RigidState x0 = displaced(spec, random_vec(rng, 1.0));
    x0.R          = random_rotation(rng);
    if (x0.R.matrix().trace() < 0.0) { continue; }
    ShootingProblem prob = transcribe(x0, spec, q);
    const SolveResult r  = solve(prob, cfg);
    ASSERT_NE(r.status, SolveStatus::Infeasible);
    if (r.status == SolveStatus::Converged) {
      EXPECT_LE(r.max_defect, cfg.feas_tol);
      EXPECT_LE(r.stationarity, cfg.opt_tol);
      EXPECT_LE(r.max_rotor_violation, cfg.feas_tol);
    }
    for (const RigidState & x : r.states) { EXPECT_LE(x.R.orthogonality_error(), 1e-9); }
    for (const MeritStep & m : r.merit_steps) { EXPECT_LE(m.after, m.before + 1e-9 * std::abs(m.before)); }
    EXPECT_FALSE(r.merit_steps.empty());
  }
}

TEST(Solve, RotorLimitBelowHoverIsInfeasible)
{
  QuadrotorParams q;
  q.rotor_max     = 0.9 * q.body.hover_thrust() / 4.0;
  OcpSpec spec    = short_spec();
  spec.rotor_max  = q.rotor_max;
  ShootingProblem prob = transcribe(displaced(spec, Vec3(0, 0, -0.5)), spec, q);
  const SolveResult r  = solve(prob);
  EXPECT_EQ(r.status, SolveStatus::Infeasible);
}

TEST(Solve, StateBoxesUseGeneralQpAndAreRespected)
{
  const QuadrotorParams q;
  OcpSpec spec          = short_spec(20);
  spec.state_bounds.v   = BoxBounds{Vec3::Constant(-0.3), Vec3::Constant(0.3)};
  ShootingProblem prob  = transcribe(displaced(spec, Vec3(0.5, 0, 0)), spec, q);
  const SolveResult r   = solve(prob);
  ASSERT_EQ(r.status, SolveStatus::Converged);
  for (const RigidState & x : r.states) { EXPECT_LE(x.v.cwiseAbs().maxCoeff(), 0.3 + 1e-6); }
}

TEST(Solve, DeterministicBits)
{
  const QuadrotorParams q;
  const OcpSpec spec = short_spec(20);
  RigidState x0      = displaced(spec, Vec3(1, -1, 0.5));
  x0.omega           = Vec3(0.5, 0, -0.2);
  ShootingProblem a = transcribe(x0, spec, q), b = transcribe(x0, spec, q);
  const SolveResult ra = solve(a), rb = solve(b);
  EXPECT_EQ(ra.iterations, rb.iterations);
  EXPECT_EQ(ra.objective, rb.objective);
  ASSERT_EQ(ra.controls.size(), rb.controls.size());
  for (std::size_t i = 0; i < ra.controls.size(); ++i) { EXPECT_EQ(ra.controls[i], rb.controls[i]); }
  for (std::size_t i = 0; i < ra.states.size(); ++i) { EXPECT_EQ(ra.states[i], rb.states[i]); }
}

TEST(Solve, FiniteDifferenceModeReachesSameSolution)
{
  const QuadrotorParams q;
  const OcpSpec spec = short_spec(10);
  SolverConfig fd;
  fd.derivatives       = DerivativeMode::FiniteDifference;
  const RigidState x0  = displaced(spec, Vec3(0.3, 0.2, -0.4));
  ShootingProblem a = transcribe(x0, spec, q), b = transcribe(x0, spec, q);
  const SolveResult ra = solve(a), rb = solve(b, fd);
  ASSERT_EQ(ra.status, SolveStatus::Converged);
  ASSERT_EQ(rb.status, SolveStatus::Converged);
  EXPECT_NEAR(ra.objective, rb.objective, 1e-6 * ra.objective);
}

TEST(ShiftWarmStart, EquilibriumShiftsToItself)
{
  const QuadrotorParams q;
  const OcpSpec spec = short_spec();
  ShootingProblem prob = transcribe(spec.equilibrium.state(), spec, q);
  const SolveResult r  = solve(prob);
  const InitialGuess g = shift_warm_start(r, spec, q.body);
  for (const RigidState & x : g.states) { EXPECT_EQ(x, spec.equilibrium.state()); }
  for (const ControlInput & u : g.controls) { EXPECT_EQ(u, spec.equilibrium.u_e); }
}

TEST(ShiftWarmStart, ShiftedConvergedSolutionIsFeasible)
{
  const QuadrotorParams q;
  const OcpSpec spec   = short_spec(20);
  SolverConfig cfg;
  ShootingProblem prob = transcribe(displaced(spec, Vec3(0.5, -0.5, 0.5)), spec, q);
  const SolveResult r  = solve(prob, cfg);
  ASSERT_EQ(r.status, SolveStatus::Converged);

  const InitialGuess g = shift_warm_start(r, spec, q.body);
  EXPECT_EQ(g.controls.back(), r.controls.back());
  const ShootingProblem next = transcribe(r.states[1], spec, q, &g);
  const Eigen::VectorXd d    = next.defects();
  for (int i = 0; i + 1 < spec.horizon; ++i) {
    EXPECT_LE(d.segment<kStateDim>(kStateDim * i).cwiseAbs().maxCoeff(), cfg.feas_tol);
  }
  EXPECT_LE(d.tail<kStateDim>().cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ShiftWarmStart, BeatsColdZeroControlGuessOnPerturbedState)
{
  const QuadrotorParams q;
  const OcpSpec spec   = short_spec(20);
  ShootingProblem prob = transcribe(displaced(spec, Vec3(0.5, 0.0, -0.5)), spec, q);
  const SolveResult r  = solve(prob);
  ASSERT_EQ(r.status, SolveStatus::Converged);

  // The plant drifts from the prediction by a small disturbance.
  RigidState measured = step_plant(prob.x0, r.controls.front(), q.body, spec.dt, 10);
  measured.v += Vec3(0.01, -0.01, 0.0);

  const InitialGuess shifted = shift_warm_start(r, spec, q.body);
  InitialGuess cold;
  cold.states.assign(static_cast<std::size_t>(spec.horizon) + 1, measured);
  cold.controls.assign(static_cast<std::size_t>(spec.horizon), ControlInput{});
  const double d_shift = transcribe(measured, spec, q, &shifted).defects().norm();
  const double d_cold  = transcribe(measured, spec, q, &cold).defects().norm();
  EXPECT_LE(d_shift, d_cold);
}

TEST(ShiftWarmStart, RejectsWrongHorizon)
{
  SolveResult r;
  r.controls.resize(3);
  r.states.resize(4);
  EXPECT_THROW(shift_warm_start(r, short_spec(10), RigidBodyParams{}), LengthMismatch);
}

TEST(SolverConfig, Validation)
{
  SolverConfig c;
  EXPECT_NO_THROW(c.validate());
  c.feas_tol = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c           = {};
  c.backtrack = 1.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

}  // namespace
}  // namespace geonmpc
