#include "geonmpc/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Cholesky>

#include "geonmpc/errors.hpp"

namespace geonmpc {

void RigidBodyParams::validate() const
{
  if (!(mass > 0.0) || !std::isfinite(mass)) { throw InvalidArgument("mass must be positive"); }
  if (!(gravity > 0.0) || !std::isfinite(gravity)) { throw InvalidArgument("gravity must be positive"); }
  if (!inertia.allFinite() || (inertia - inertia.transpose()).norm() > 1e-12) {
    throw InvalidArgument("inertia must be symmetric");
  }
  Eigen::LLT<Mat3> llt(inertia);
  if (llt.info() != Eigen::Success) { throw InvalidArgument("inertia must be positive definite"); }
  if (std::abs(thrust_axis.norm() - 1.0) > 1e-12) { throw InvalidArgument("thrust axis must be a unit vector"); }
}

void QuadrotorParams::validate() const
{
  body.validate();
  if (!(arm_length > 0.0)) { throw InvalidArgument("arm length must be positive"); }
  if (!(torque_coeff > 0.0)) { throw InvalidArgument("rotor torque coefficient must be positive"); }
  if (!(rotor_min < rotor_max)) { throw InvalidArgument("rotor_min must be below rotor_max"); }
}

bool RotorForces::within(double lo, double hi, double tol) const
{
  return std::all_of(f.begin(), f.end(), [&](double fi) { return fi >= lo - tol && fi <= hi + tol; });
}

RotorForces RotorForces::clamped(double lo, double hi) const
{
  RotorForces out;
  for (std::size_t i = 0; i < 4; ++i) { out.f[i] = std::clamp(f[i], lo, hi); }
  return out;
}

Vec3 total_force(const RigidState & x, const ControlInput & u, const RigidBodyParams & p)
{
  return x.R * (p.thrust_axis * u.thrust) + p.gravity_force();
}

StateDerivative continuous_dynamics(const RigidState & x, const ControlInput & u, const RigidBodyParams & p,
                                    const ExternalWrench & ext)
{
  const Vec3 fe    = ext.force ? ext.force(x.xi, x.v) : p.gravity_force();
  const Vec3 taue  = ext.torque ? ext.torque(x) : Vec3::Zero();
  const Vec3 force = x.R * (p.thrust_axis * u.thrust) + fe;

  StateDerivative d;
  d.dxi    = x.v;
  d.dv     = force / p.mass;
  d.dR     = x.R.matrix() * skew(x.omega);
  d.domega = p.inertia.llt().solve(-x.omega.cross(p.inertia * x.omega) + u.torque + taue);
  return d;
}

Mat4 mixing_matrix(const QuadrotorParams & q)
{
  const double l = q.arm_length;
  const double c = q.torque_coeff;
  Mat4 m;
  // clang-format off
  m << 1.0, 1.0, 1.0, 1.0,
       0.0,   l, 0.0,  -l,
        -l, 0.0,   l, 0.0,
         c,  -c,   c,  -c;
  // clang-format on
  return m;
}

Mat4 unmixing_matrix(const QuadrotorParams & q)
{
  const double a = 1.0 / (2.0 * q.arm_length);
  const double b = 1.0 / (4.0 * q.torque_coeff);
  Mat4 m;
  // clang-format off
  m << 0.25, 0.0,  -a,  b,
       0.25,   a, 0.0, -b,
       0.25, 0.0,   a,  b,
       0.25,  -a, 0.0, -b;
  // clang-format on
  return m;
}

ControlInput mix_rotor_forces(const RotorForces & f, const QuadrotorParams & q)
{
  const double l = q.arm_length;
  const double c = q.torque_coeff;
  const auto & r = f.f;
  return {r[0] + r[1] + r[2] + r[3], Vec3(l * (r[1] - r[3]), l * (r[2] - r[0]), c * (r[0] - r[1] + r[2] - r[3]))};
}

RotorForces unmix_wrench(const ControlInput & u, const QuadrotorParams & q)
{
  return RotorForces::from_vector(unmixing_matrix(q) * u.as_vector());
}

}  // namespace geonmpc
