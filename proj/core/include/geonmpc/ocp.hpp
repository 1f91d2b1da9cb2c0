#pragma once

/**
 * @file
 * @brief Stage costs and optimal control problem data for the two regulation schemes.
 *
 * Both schemes minimize, over a horizon of N_p steps,
 *
 *   sum_{j=0}^{N_p} zeta^j ||xbar_j||^2_Q + ||ubar_j||^2_Q
 *
 * with ||xbar||^2_Q = kp|xi - xi_e|^2 + kv|v - v_e|^2 + komega|omega - omega_e|^2 + kR Psi^2
 * and ||ubar||^2_Q = kf|f^I|^2 + ktau|tau|^2. zeta = 1 is the plain regulating
 * scheme; zeta > 1 is the fast-motion (economic) scheme. The input term at
 * j = N_p is absent since only N_p controls are decision variables.
 */

#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "geonmpc/dynamics.hpp"
#include "geonmpc/integrator.hpp"

namespace geonmpc {

struct CostWeights
{
  double kp{150.0};
  double kv{30.0};
  double kR{10.0};
  double komega{0.85};
  double kf{5e-2};
  double ktau{0.3};
  AttitudeErrorWeights attitude{};

  void validate() const;
};

struct Equilibrium
{
  RotationMatrix R_d{};
  Vec3 xi_e{0.0, 0.0, 4.0};
  Vec3 v_e{Vec3::Zero()};
  Vec3 omega_e{Vec3::Zero()};
  ControlInput u_e{};

  /// Hover at xi_e with identity attitude and T = m a_g.
  static Equilibrium hover(const Vec3 & xi_e, const RigidBodyParams & p);

  RigidState state() const { return {R_d, xi_e, omega_e, v_e}; }

  /// Throws InvalidArgument unless step_predictor(x_e, u_e) = x_e within `tol`.
  void validate(const RigidBodyParams & p, const StepSpec & s, double tol = 1e-10) const;
};

struct BoxBounds
{
  Vec3 lower;
  Vec3 upper;
};

/// Optional per-component boxes on the vector-space parts of the state.
struct StateBounds
{
  std::optional<BoxBounds> xi;
  std::optional<BoxBounds> v;
  std::optional<BoxBounds> omega;

  bool empty() const { return !xi && !v && !omega; }
};

struct OcpSpec
{
  int horizon{40};
  StepSpec dt{0.01};
  CostWeights weights{};
  double zeta{1.2};
  Equilibrium equilibrium{Equilibrium::hover(Vec3(0.0, 0.0, 4.0), RigidBodyParams{})};
  double rotor_min{0.0};
  double rotor_max{12.3};
  StateBounds state_bounds{};

  /// Throws InvalidArgument on horizon < 4, zeta < 1, bad weights or rotor_min >= rotor_max.
  void validate() const;

  /// Same problem with the stage-weight base replaced (zeta = 1 gives the regulating scheme).
  OcpSpec with_zeta(double z) const;
};

/// The 10-vector xbar of stacked errors.
struct ErrorVector
{
  Vec3 xi_err{Vec3::Zero()};
  Vec3 v_err{Vec3::Zero()};
  double psi{0.0};
  Vec3 omega_err{Vec3::Zero()};

  Eigen::Matrix<double, 10, 1> as_vector() const;
};

ErrorVector error_vector(const RigidState & x, const OcpSpec & spec);

/// ||xbar||^2_Q without the zeta^j factor.
double state_cost(const RigidState & x, const OcpSpec & spec);

/// ||ubar||^2_Q = kf |f^I|^2 + ktau |tau|^2.
double input_cost(const RigidState & x, const ControlInput & u, const OcpSpec & spec, const RigidBodyParams & p);

/**
 * @brief Stage cost at stage j.
 *
 * When `u` is empty (terminal stage) only the state term contributes.
 * Throws InvalidArgument if j is outside [0, horizon].
 */
double stage_cost(const RigidState & x, const ControlInput * u, int j, const OcpSpec & spec,
                  const RigidBodyParams & p);

inline double stage_cost(const RigidState & x, const ControlInput & u, int j, const OcpSpec & spec,
                         const RigidBodyParams & p)
{
  return stage_cost(x, &u, j, spec, p);
}

/**
 * @brief Objective over a predicted trajectory.
 *
 * Requires |xs| = horizon + 1 and |us| >= horizon; controls beyond index
 * horizon - 1 are ignored. Throws LengthMismatch otherwise.
 */
double horizon_cost(std::span<const RigidState> xs, std::span<const ControlInput> us, const OcpSpec & spec,
                    const RigidBodyParams & p);

inline constexpr int kResidualDim = 16;

/**
 * @brief Least-squares form of a stage cost: stage_cost = |r|^2.
 *
 * Rows: sqrt(zeta^j kp) xi_err (3), sqrt(zeta^j kv) v_err (3),
 * sqrt(zeta^j kR) Psi (1), sqrt(zeta^j komega) omega_err (3),
 * sqrt(kf) f^I (3), sqrt(ktau) tau (3). Jacobians are taken with respect to
 * the state tangent and (T, tau).
 */
struct StageResidual
{
  Eigen::Matrix<double, kResidualDim, 1> r;
  Eigen::Matrix<double, kResidualDim, kStateDim> jx;
  Eigen::Matrix<double, kResidualDim, kInputDim> ju;
};

StageResidual stage_residual(const RigidState & x, const ControlInput * u, int j, const OcpSpec & spec,
                             const RigidBodyParams & p);

}  // namespace geonmpc
