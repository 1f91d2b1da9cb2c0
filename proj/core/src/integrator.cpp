#include "geonmpc/integrator.hpp"

#include <cmath>

#include "geonmpc/errors.hpp"

namespace geonmpc {

using namespace tangent;

StepSpec::StepSpec(double dt) : dt_(dt)
{
  if (!(dt > 0.0) || !std::isfinite(dt)) { throw InvalidArgument("sampling period must be positive"); }
}

RigidState retract(const RigidState & x, const StateTangent & d)
{
  return {x.R * cayley(d.segment<3>(kEta)), x.xi + d.segment<3>(kXi), x.omega + d.segment<3>(kOmega),
          x.v + d.segment<3>(kV)};
}

StateTangent local_difference(const RigidState & x, const RigidState & y)
{
  StateTangent d;
  d.segment<3>(kXi)    = y.xi - x.xi;
  d.segment<3>(kV)     = y.v - x.v;
  d.segment<3>(kEta)   = cayley_inverse(x.R.transpose() * y.R);
  d.segment<3>(kOmega) = y.omega - x.omega;
  return d;
}

namespace {

struct RotationalStep
{
  Mat3 inertia_inv;
  Vec3 alpha;
  Vec3 omega_mid;
};

RotationalStep rotational_terms(const RigidState & x, const ControlInput & u, const RigidBodyParams & p, double h)
{
  RotationalStep r;
  r.inertia_inv = p.inertia.inverse();
  r.alpha       = (p.inertia * x.omega).cross(x.omega) + u.torque;
  r.omega_mid   = x.omega + 0.5 * h * (r.inertia_inv * r.alpha);
  return r;
}

}  // namespace

RigidState step_predictor(const RigidState & x, const ControlInput & u, const RigidBodyParams & p,
                          const StepSpec & s)
{
  const double h         = s.dt();
  const RotationalStep r = rotational_terms(x, u, p, h);

  RigidState n;
  n.xi    = x.xi + h * x.v;
  n.v     = x.v + h * (total_force(x, u, p) / p.mass);
  n.R     = x.R * cayley(h * r.omega_mid);
  n.omega = r.omega_mid + 0.5 * h * (r.inertia_inv * r.alpha);
  return n;
}

PredictorLinearization linearize_predictor(const RigidState & x, const ControlInput & u,
                                           const RigidBodyParams & p, const StepSpec & s)
{
  const double h         = s.dt();
  const RotationalStep r = rotational_terms(x, u, p, h);
  const Vec3 incr        = h * r.omega_mid;
  const RotationMatrix c = cayley(incr);

  PredictorLinearization lin;
  lin.next.xi    = x.xi + h * x.v;
  lin.next.v     = x.v + h * (total_force(x, u, p) / p.mass);
  lin.next.R     = x.R * c;
  lin.next.omega = r.omega_mid + 0.5 * h * (r.inertia_inv * r.alpha);

  const Mat3 I3     = Mat3::Identity();
  const Mat3 dalpha = skew(p.inertia * x.omega) - skew(x.omega) * p.inertia;
  const Mat3 dmid   = I3 + 0.5 * h * r.inertia_inv * dalpha;
  const Mat3 jr     = cayley_right_jacobian(incr);
  const Vec3 axis   = x.R * p.thrust_axis;

  lin.dx.setZero();
  lin.dx.block<3, 3>(kXi, kXi)       = I3;
  lin.dx.block<3, 3>(kXi, kV)        = h * I3;
  lin.dx.block<3, 3>(kV, kV)         = I3;
  lin.dx.block<3, 3>(kV, kEta)       = -(h * u.thrust / p.mass) * x.R.matrix() * skew(p.thrust_axis);
  lin.dx.block<3, 3>(kEta, kEta)     = c.matrix().transpose();
  lin.dx.block<3, 3>(kEta, kOmega)   = h * jr * dmid;
  lin.dx.block<3, 3>(kOmega, kOmega) = I3 + h * r.inertia_inv * dalpha;

  lin.du.setZero();
  lin.du.block<3, 1>(kV, 0)        = (h / p.mass) * axis;
  lin.du.block<3, 3>(kEta, 1)      = 0.5 * h * h * jr * r.inertia_inv;
  lin.du.block<3, 3>(kOmega, 1)    = h * r.inertia_inv;
  return lin;
}

namespace {

// Right-trivialized inverse differential of exp, truncated after the second-order
// term; the truncation error is O(h^5) per substep, consistent with RK4.
Mat3 dexp_inv_truncated(const Vec3 & theta)
{
  const Mat3 s = skew(theta);
  return Mat3::Identity() + 0.5 * s + (1.0 / 12.0) * s * s;
}

struct PlantDerivative
{
  Vec3 dtheta, dxi, dv, domega;
};

}  // namespace

RigidState step_plant(const RigidState & x, const ControlInput & u, const RigidBodyParams & p,
                      const StepSpec & s, int substeps, const ExternalWrench & ext)
{
  if (substeps < 1) { throw InvalidArgument("plant substeps must be at least 1"); }
  const double h      = s.dt() / substeps;
  const Mat3 inv_j    = p.inertia.inverse();
  RigidState state    = x;

  for (int k = 0; k < substeps; ++k) {
    const RotationMatrix anchor = state.R;
    auto rhs = [&](const Vec3 & theta, const Vec3 & xi, const Vec3 & v, const Vec3 & omega) {
      RigidState local{anchor * expm_so3(theta), xi, omega, v};
      const Vec3 fe   = ext.force ? ext.force(xi, v) : p.gravity_force();
      const Vec3 taue = ext.torque ? ext.torque(local) : Vec3::Zero();
      PlantDerivative d;
      d.dtheta = dexp_inv_truncated(theta) * omega;
      d.dxi    = v;
      d.dv     = (local.R * (p.thrust_axis * u.thrust) + fe) / p.mass;
      d.domega = inv_j * (-omega.cross(p.inertia * omega) + u.torque + taue);
      return d;
    };

    const Vec3 t0 = Vec3::Zero();
    const PlantDerivative k1 = rhs(t0, state.xi, state.v, state.omega);
    const PlantDerivative k2 = rhs(t0 + 0.5 * h * k1.dtheta, state.xi + 0.5 * h * k1.dxi, state.v + 0.5 * h * k1.dv,
                                   state.omega + 0.5 * h * k1.domega);
    const PlantDerivative k3 = rhs(t0 + 0.5 * h * k2.dtheta, state.xi + 0.5 * h * k2.dxi, state.v + 0.5 * h * k2.dv,
                                   state.omega + 0.5 * h * k2.domega);
    const PlantDerivative k4 =
      rhs(t0 + h * k3.dtheta, state.xi + h * k3.dxi, state.v + h * k3.dv, state.omega + h * k3.domega);

    const double w = h / 6.0;
    const Vec3 theta = w * (k1.dtheta + 2.0 * k2.dtheta + 2.0 * k3.dtheta + k4.dtheta);
    state.xi += w * (k1.dxi + 2.0 * k2.dxi + 2.0 * k3.dxi + k4.dxi);
    state.v += w * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
    state.omega += w * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega);
    state.R = anchor * expm_so3(theta);
  }
  return state;
}

}  // namespace geonmpc
