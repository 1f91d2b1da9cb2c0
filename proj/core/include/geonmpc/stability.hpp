#pragma once

/**
 * @file
 * @brief Executable stability certificates: linearization on TSE(3), N-step
 * controllability, the storage function and sampled dissipativity residuals.
 */

#include <cstdint>
#include <limits>
#include <random>
#include <utility>

#include <Eigen/Core>

#include "geonmpc/dynamics.hpp"
#include "geonmpc/integrator.hpp"
#include "geonmpc/ocp.hpp"

namespace geonmpc {

using SystemMatrix = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputMatrix  = Eigen::Matrix<double, kStateDim, kInputDim>;

/**
 * @brief Linear model about (x, u) in the tangent coordinates (dxi, dv, eta, domega).
 *
 * A and B are the continuous-time matrices; Ad and Bd are filled by
 * discretize_linear() and stay zero until then.
 */
struct LinearizedModel
{
  SystemMatrix A{SystemMatrix::Zero()};
  InputMatrix B{InputMatrix::Zero()};
  SystemMatrix Ad{SystemMatrix::Zero()};
  InputMatrix Bd{InputMatrix::Zero()};
  StepSpec dt{0.01};
  RigidState x{};
  ControlInput u{};
  bool discretized{false};
};

/**
 * @brief Continuous-time linearization.
 *
 * Nonzero blocks: A[xi, v] = I, A[v, eta] = -(T/m) R S(e), A[eta, eta] = -S(omega),
 * A[eta, omega] = I, A[omega, omega] = J^{-1}(S(J omega) - S(omega) J),
 * B[v, T] = R e / m, B[omega, tau] = J^{-1}.
 */
LinearizedModel linearize(const RigidState & x, const ControlInput & u, const RigidBodyParams & p,
                          const StepSpec & dt = StepSpec{0.01});

/// Zero-order-hold discretization: Ad = exp(A dt), Bd = int_0^dt exp(A s) ds B.
LinearizedModel discretize_linear(const LinearizedModel & m);

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
Eigen::MatrixXd expm(const Eigen::MatrixXd & a);

/// [Ad^{steps-1} Bd ... Ad Bd Bd]. Throws InvalidArgument if steps < 1 or the model is not discretized.
Eigen::MatrixXd controllability_matrix(const LinearizedModel & m, int steps);

/// Number of singular values above rank_tol * sigma_max.
int controllability_rank(const LinearizedModel & m, int steps, double rank_tol = 1e-8);

/// 1/2 omega^T J omega + 1/2 m |v|^2
double kinetic_energy(const RigidState & x, const RigidBodyParams & p);

/// Kinetic energy minus the potential m a_g xi_3.
double storage_function(const RigidState & x, const RigidBodyParams & p);

/// Translational and rotational residuals; the stability argument needs both <= 0.
struct DissipativityResiduals
{
  double translational{0.0};  // v^T f - zeta^j kv |v|^2 - kf |f|^2
  double rotational{0.0};     // omega^T tau - zeta^j komega |omega|^2 - ktau |tau|^2
};

/**
 * @brief Dissipativity residuals at stage j.
 *
 * With j = 0 these are the residuals of the plain scheme; j > 0 only
 * strengthens the negative terms, so j = 0 is the worst case for both schemes.
 */
DissipativityResiduals dissipativity_residuals(const RigidState & x, const ControlInput & u, const OcpSpec & spec,
                                               const RigidBodyParams & p, int stage = 0);

struct GainCheck
{
  double kv_kf{0.0};
  double komega_ktau{0.0};
  /// Products minus the 0.25 threshold.
  double translational_margin{0.0};
  double rotational_margin{0.0};
  bool translational_ok{false};
  bool rotational_ok{false};

  bool ok() const { return translational_ok && rotational_ok; }
};

/// kv kf >= 1/4 and komega ktau >= 1/4 (inclusive).
GainCheck check_gain_conditions(const CostWeights & w);

/// Ranges of the random admissible samples.
struct SamplingRanges
{
  double max_speed{20.0};         // |v|, m/s
  double max_angular_rate{20.0};  // |omega|, rad/s
  double position_box{10.0};      // |xi_i|, m
};

/// Uniform attitude, velocities uniform in balls, rotor forces uniform in [rotor_min, rotor_max].
std::pair<RigidState, ControlInput> sample_admissible(std::mt19937_64 & rng, const QuadrotorParams & q,
                                                      const SamplingRanges & ranges = {});

struct DissipativityReport
{
  double max_h1{-std::numeric_limits<double>::infinity()};
  double max_h2{-std::numeric_limits<double>::infinity()};
  double max_h3{-std::numeric_limits<double>::infinity()};
  double max_h4{-std::numeric_limits<double>::infinity()};
  GainCheck gains{};
  std::int64_t samples{0};
  double slack{1e-9};

  /// Largest residual over both schemes.
  double max_residual() const;
  /// True if some sample produced a residual above the slack.
  bool violation_found() const { return max_residual() > slack; }
  /// Gain conditions hold and no sampled residual exceeds the slack.
  bool pass() const { return gains.ok() && !violation_found(); }
};

/**
 * @brief Samples the residuals of both schemes over random admissible (x, u).
 *
 * h1, h2 use zeta = 1 and h3, h4 use spec.zeta, both at stage 0.
 * Deterministic for a given seed.
 */
DissipativityReport sample_dissipativity(const OcpSpec & spec, const QuadrotorParams & q, std::int64_t samples,
                                         std::uint64_t seed, double slack = 1e-9,
                                         const SamplingRanges & ranges = {});

}  // namespace geonmpc
