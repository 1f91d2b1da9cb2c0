#include "geonmpc/ocp.hpp"

#include <cmath>
#include <sstream>

#include "geonmpc/errors.hpp"

namespace geonmpc {

using namespace tangent;

void CostWeights::validate() const
{
  for (double k : {kp, kv, kR, komega, kf, ktau}) {
    if (!(k > 0.0) || !std::isfinite(k)) { throw InvalidArgument("cost weights must be positive and finite"); }
  }
  attitude.validate();
}

Equilibrium Equilibrium::hover(const Vec3 & xi_e, const RigidBodyParams & p)
{
  Equilibrium e;
  e.xi_e = xi_e;
  e.u_e  = ControlInput{p.hover_thrust(), Vec3::Zero()};
  return e;
}

void Equilibrium::validate(const RigidBodyParams & p, const StepSpec & s, double tol) const
{
  const RigidState xe   = state();
  const RigidState next = step_predictor(xe, u_e, p, s);
  const double err = std::max({(next.R.matrix() - xe.R.matrix()).cwiseAbs().maxCoeff(),
                               (next.xi - xe.xi).cwiseAbs().maxCoeff(), (next.v - xe.v).cwiseAbs().maxCoeff(),
                               (next.omega - xe.omega).cwiseAbs().maxCoeff()});
  if (!(err <= tol)) {
    std::ostringstream os;
    os << "equilibrium is not a fixed point of the prediction model (residual " << err << ")";
    throw InvalidArgument(os.str());
  }
}

void OcpSpec::validate() const
{
  if (horizon < 4) { throw InvalidArgument("horizon must be at least 4"); }
  if (!(zeta >= 1.0) || !std::isfinite(zeta)) { throw InvalidArgument("zeta must be >= 1"); }
  if (!(rotor_min < rotor_max)) { throw InvalidArgument("rotor_min must be below rotor_max"); }
  weights.validate();
  auto check_box = [](const std::optional<BoxBounds> & b, const char * name) {
    if (b && !(b->lower.array() <= b->upper.array()).all()) {
      throw InvalidArgument(std::string("state bound lower > upper for ") + name);
    }
  };
  check_box(state_bounds.xi, "xi");
  check_box(state_bounds.v, "v");
  check_box(state_bounds.omega, "omega");
}

OcpSpec OcpSpec::with_zeta(double z) const
{
  OcpSpec out = *this;
  out.zeta    = z;
  return out;
}

Eigen::Matrix<double, 10, 1> ErrorVector::as_vector() const
{
  Eigen::Matrix<double, 10, 1> out;
  out << xi_err, v_err, psi, omega_err;
  return out;
}

ErrorVector error_vector(const RigidState & x, const OcpSpec & spec)
{
  const Equilibrium & eq = spec.equilibrium;
  return {x.xi - eq.xi_e, x.v - eq.v_e, attitude_error(x.R, eq.R_d, spec.weights.attitude), x.omega - eq.omega_e};
}

double state_cost(const RigidState & x, const OcpSpec & spec)
{
  const ErrorVector e  = error_vector(x, spec);
  const CostWeights & w = spec.weights;
  return w.kp * e.xi_err.squaredNorm() + w.kv * e.v_err.squaredNorm() + w.komega * e.omega_err.squaredNorm() +
         w.kR * e.psi * e.psi;
}

double input_cost(const RigidState & x, const ControlInput & u, const OcpSpec & spec, const RigidBodyParams & p)
{
  const CostWeights & w = spec.weights;
  return w.kf * total_force(x, u, p).squaredNorm() + w.ktau * u.torque.squaredNorm();
}

namespace {

void check_stage(int j, const OcpSpec & spec)
{
  if (j < 0 || j > spec.horizon) {
    std::ostringstream os;
    os << "stage index " << j << " outside [0, " << spec.horizon << "]";
    throw InvalidArgument(os.str());
  }
}

}  // namespace

double stage_cost(const RigidState & x, const ControlInput * u, int j, const OcpSpec & spec,
                  const RigidBodyParams & p)
{
  check_stage(j, spec);
  double cost = std::pow(spec.zeta, j) * state_cost(x, spec);
  if (u != nullptr) { cost += input_cost(x, *u, spec, p); }
  return cost;
}

double horizon_cost(std::span<const RigidState> xs, std::span<const ControlInput> us, const OcpSpec & spec,
                    const RigidBodyParams & p)
{
  const auto n = static_cast<std::size_t>(spec.horizon);
  if (xs.size() != n + 1 || us.size() < n) {
    std::ostringstream os;
    os << "horizon_cost expects " << n + 1 << " states and at least " << n << " controls, got " << xs.size()
       << " and " << us.size();
    throw LengthMismatch(os.str());
  }
  double total = 0.0;
  for (std::size_t j = 0; j <= n; ++j) {
    total += stage_cost(xs[j], j < n ? &us[j] : nullptr, static_cast<int>(j), spec, p);
  }
  return total;
}

StageResidual stage_residual(const RigidState & x, const ControlInput * u, int j, const OcpSpec & spec,
                             const RigidBodyParams & p)
{
  check_stage(j, spec);
  const CostWeights & w  = spec.weights;
  const Equilibrium & eq = spec.equilibrium;
  const double zj        = std::pow(spec.zeta, j);

  const double sp = std::sqrt(zj * w.kp);
  const double sv = std::sqrt(zj * w.kv);
  const double sr = std::sqrt(zj * w.kR);
  const double so = std::sqrt(zj * w.komega);
  const Mat3 I3   = Mat3::Identity();

  StageResidual res;
  res.r.setZero();
  res.jx.setZero();
  res.ju.setZero();

  res.r.segment<3>(0) = sp * (x.xi - eq.xi_e);
  res.r.segment<3>(3) = sv * (x.v - eq.v_e);
  res.r(6)            = sr * attitude_error(x.R, eq.R_d, w.attitude);
  res.r.segment<3>(7) = so * (x.omega - eq.omega_e);

  res.jx.block<3, 3>(0, kXi)                 = sp * I3;
  res.jx.block<3, 3>(3, kV)                  = sv * I3;
  res.jx.block<1, 3>(6, kEta)                = sr * attitude_error_gradient(x.R, eq.R_d, w.attitude).transpose();
  res.jx.block<3, 3>(7, kOmega)              = so * I3;

  if (u != nullptr) {
    const double sf = std::sqrt(w.kf);
    const double st = std::sqrt(w.ktau);
    res.r.segment<3>(10) = sf * total_force(x, *u, p);
    res.r.segment<3>(13) = st * u->torque;

    res.jx.block<3, 3>(10, kEta) = -(sf * u->thrust) * x.R.matrix() * skew(p.thrust_axis);
    res.ju.block<3, 1>(10, 0)    = sf * (x.R * p.thrust_axis);
    res.ju.block<3, 3>(13, 1)    = st * I3;
  }
  return res;
}

}  // namespace geonmpc
