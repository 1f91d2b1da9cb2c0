#pragma once

/**
 * @file
 * @brief Rigid-body dynamics on TSE(3) and the quadrotor rotor mixing.
 *
 * The state is x = (R, xi, omega, v): attitude (body to inertial), inertial
 * position, body angular velocity and inertial linear velocity. The input is a
 * body-fixed thrust T along the unit axis e^B plus a body torque tau.
 */

#include <array>
#include <functional>

#include <Eigen/Core>

#include "geonmpc/so3.hpp"

namespace geonmpc {

using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

struct RigidState
{
  RotationMatrix R{};
  Vec3 xi{Vec3::Zero()};
  Vec3 omega{Vec3::Zero()};
  Vec3 v{Vec3::Zero()};

  bool all_finite() const
  {
    return R.matrix().allFinite() && xi.allFinite() && omega.allFinite() && v.allFinite();
  }
  bool operator==(const RigidState &) const = default;
};

struct ControlInput
{
  double thrust{0.0};
  Vec3 torque{Vec3::Zero()};

  Vec4 as_vector() const { return Vec4(thrust, torque.x(), torque.y(), torque.z()); }
  static ControlInput from_vector(const Vec4 & u) { return {u(0), u.tail<3>()}; }
  bool operator==(const ControlInput &) const = default;
};

/// Time derivative of a RigidState; dR is the matrix R S(omega).
struct StateDerivative
{
  Mat3 dR{Mat3::Zero()};
  Vec3 dxi{Vec3::Zero()};
  Vec3 domega{Vec3::Zero()};
  Vec3 dv{Vec3::Zero()};
};

struct RigidBodyParams
{
  double mass{1.03};                                                   // kg
  Mat3 inertia{Vec3(16.83e-3, 16.83e-3, 28.34e-3).asDiagonal()};  // kg m^2
  Vec3 thrust_axis{Vec3::UnitZ()};
  double gravity{9.81};  // m/s^2

  /// Throws InvalidArgument on mass <= 0, non-SPD inertia or a non-unit thrust axis.
  void validate() const;

  /// f_e = -m a_g e3
  Vec3 gravity_force() const { return Vec3(0.0, 0.0, -mass * gravity); }
  /// Thrust that balances gravity when the thrust axis points up.
  double hover_thrust() const { return mass * gravity; }
};

struct QuadrotorParams
{
  RigidBodyParams body{};
  double arm_length{0.275};   // m
  double torque_coeff{0.017}; // m
  double rotor_min{0.0};      // N
  double rotor_max{12.3};     // N

  void validate() const;
};

struct RotorForces
{
  std::array<double, 4> f{0.0, 0.0, 0.0, 0.0};

  Vec4 as_vector() const { return Vec4(f[0], f[1], f[2], f[3]); }
  static RotorForces from_vector(const Vec4 & v) { return {{v(0), v(1), v(2), v(3)}}; }
  bool within(double lo, double hi, double tol = 0.0) const;
  RotorForces clamped(double lo, double hi) const;
  bool operator==(const RotorForces &) const = default;
};

/**
 * @brief Optional external wrench hooks.
 *
 * An empty `force` means gravity only (f_e = -m a_g e3); an empty `torque` means
 * tau_e = 0. The prediction model always uses the defaults; the hooks exist for
 * plant-side disturbances.
 */
/// Optional external wrench. A set force replaces the default f_e (gravity); a set torque is added.
struct ExternalWrench
{
  std::function<Vec3(const Vec3 & xi, const Vec3 & v)> force{};
  std::function<Vec3(const RigidState & x)> torque{};
};

/// Inertial resultant force f^I = R e^B T + f_e (gravity only).
Vec3 total_force(const RigidState & x, const ControlInput & u, const RigidBodyParams & p);

/// Right-hand side of the equations of motion.
StateDerivative continuous_dynamics(const RigidState & x, const ControlInput & u,
                                    const RigidBodyParams & p, const ExternalWrench & ext = {});

/// Maps rotor thrusts to (T, tau_phi, tau_theta, tau_psi).
Mat4 mixing_matrix(const QuadrotorParams & q);

ControlInput mix_rotor_forces(const RotorForces & f, const QuadrotorParams & q);

/// Exact inverse of mix_rotor_forces.
RotorForces unmix_wrench(const ControlInput & u, const QuadrotorParams & q);

/// Closed-form inverse of mixing_matrix(q).
Mat4 unmixing_matrix(const QuadrotorParams & q);

}  // namespace geonmpc
