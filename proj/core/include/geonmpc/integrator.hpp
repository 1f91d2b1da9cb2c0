#pragma once

/**
 * @file
 * @brief Discrete-time prediction model and the plant propagator.
 *
 * Tangent vectors of the state are ordered (dxi, dv, eta, domega), with the
 * rotation perturbed on the right through the Cayley map: R * cay(eta).
 */

#include <Eigen/Core>

#include "geonmpc/dynamics.hpp"

namespace geonmpc {

inline constexpr int kStateDim = 12;
inline constexpr int kInputDim = 4;

namespace tangent {
inline constexpr int kXi    = 0;
inline constexpr int kV     = 3;
inline constexpr int kEta   = 6;
inline constexpr int kOmega = 9;
}  // namespace tangent

using StateTangent = Eigen::Matrix<double, kStateDim, 1>;
using StateJacobian = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputJacobian = Eigen::Matrix<double, kStateDim, kInputDim>;

/// Sampling period of the zero-order-hold discretization.
class StepSpec
{
public:
  /// Throws InvalidArgument unless dt > 0.
  explicit StepSpec(double dt);
  double dt() const { return dt_; }

private:
  double dt_;
};

/// x (+) d: (R cay(eta), xi + dxi, omega + domega, v + dv)
RigidState retract(const RigidState & x, const StateTangent & d);

/// y (-) x, the inverse of retract(). Throws CayleySingular for half-turn relative attitude.
StateTangent local_difference(const RigidState & x, const RigidState & y);

/**
 * @brief One step of the prediction model g_d.
 *
 * Explicit Euler for (xi, v) using the attitude at step start; the attitude
 * and angular velocity follow the Cayley-based variational update with the
 * angular acceleration term evaluated once at step start.
 */
RigidState step_predictor(const RigidState & x, const ControlInput & u, const RigidBodyParams & p,
                          const StepSpec & s);

struct PredictorLinearization
{
  RigidState next;
  StateJacobian dx;  // d next / d x in tangent coordinates
  InputJacobian du;  // d next / d (T, tau)
};

/// step_predictor together with its exact Jacobians.
PredictorLinearization linearize_predictor(const RigidState & x, const ControlInput & u,
                                           const RigidBodyParams & p, const StepSpec & s);

/**
 * @brief Plant propagator used as the simulation truth model.
 *
 * Fourth-order Runge-Kutta-Munthe-Kaas over `substeps` equal substeps: the
 * attitude is advanced through expm_so3 of a Lie-algebra increment integrated
 * jointly with (xi, v, omega). Throws InvalidArgument if substeps < 1.
 */
RigidState step_plant(const RigidState & x, const ControlInput & u, const RigidBodyParams & p,
                      const StepSpec & s, int substeps, const ExternalWrench & ext = {});

}  // namespace geonmpc
