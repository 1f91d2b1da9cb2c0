#include "geonmpc/stability.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "geonmpc/errors.hpp"

namespace geonmpc {

using namespace tangent;

LinearizedModel linearize(const RigidState & x, const ControlInput & u, const RigidBodyParams & p, const StepSpec & dt)
{
  LinearizedModel m;
  m.dt = dt;
  m.x  = x;
  m.u  = u;

  const Mat3 & J    = p.inertia;
  const Mat3 j_inv  = J.inverse();
  const Mat3 & R    = x.R.matrix();
  const Vec3 & e    = p.thrust_axis;

  m.A.block<3, 3>(kXi, kV)         = Mat3::Identity();
  m.A.block<3, 3>(kV, kEta)        = -(u.thrust / p.mass) * R * skew(e);
  m.A.block<3, 3>(kEta, kEta)      = -skew(x.omega);
  m.A.block<3, 3>(kEta, kOmega)    = Mat3::Identity();
  m.A.block<3, 3>(kOmega, kOmega)  = j_inv * (skew(J * x.omega) - skew(x.omega) * J);
  m.B.block<3, 1>(kV, 0)           = R * e / p.mass;
  m.B.block<3, 3>(kOmega, 1)       = j_inv;
  return m;
}

Eigen::MatrixXd expm(const Eigen::MatrixXd & a)
{
  if (a.rows() != a.cols()) { throw InvalidArgument("expm needs a square matrix"); }
  const auto n    = a.rows();
  const double nrm = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings    = 0;
  if (nrm > 0.5) { squarings = static_cast<int>(std::ceil(std::log2(nrm / 0.5))); }
  const Eigen::MatrixXd scaled = a / std::ldexp(1.0, squarings);

  Eigen::MatrixXd result = Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd term   = Eigen::MatrixXd::Identity(n, n);
  for (int k = 1; k <= 30; ++k) {
    term = (term * scaled) / static_cast<double>(k);
    result += term;
    if (term.cwiseAbs().maxCoeff() <= 1e-18 * result.cwiseAbs().maxCoeff()) { break; }
  }
  for (int i = 0; i < squarings; ++i) { result = (result * result).eval(); }
  return result;
}

LinearizedModel discretize_linear(const LinearizedModel & m)
{
  constexpr int n = kStateDim + kInputDim;
  Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n, n);
  aug.topLeftCorner<kStateDim, kStateDim>()  = m.A * m.dt.dt();
  aug.topRightCorner<kStateDim, kInputDim>() = m.B * m.dt.dt();
  const Eigen::MatrixXd e = expm(aug);

  LinearizedModel out = m;
  out.Ad              = e.topLeftCorner<kStateDim, kStateDim>();
  out.Bd              = e.topRightCorner<kStateDim, kInputDim>();
  out.discretized     = true;
  return out;
}

Eigen::MatrixXd controllability_matrix(const LinearizedModel & m, int steps)
{
  if (steps < 1) { throw InvalidArgument("controllability needs at least one step"); }
  if (!m.discretized) { throw InvalidArgument("model must be discretized first"); }
  Eigen::MatrixXd c(kStateDim, kInputDim * steps);
  InputMatrix block = m.Bd;
  for (int k = steps - 1; k >= 0; --k) {
    c.middleCols<kInputDim>(kInputDim * k) = block;
    block                                  = (m.Ad * block).eval();
  }
  return c;
}

int controllability_rank(const LinearizedModel & m, int steps, double rank_tol)
{
  const Eigen::MatrixXd c = controllability_matrix(m, steps);
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(c).singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) { return 0; }
  return static_cast<int>((sv.array() > rank_tol * sv(0)).count());
}

double kinetic_energy(const RigidState & x, const RigidBodyParams & p)
{
  return 0.5 * x.omega.dot(p.inertia * x.omega) + 0.5 * p.mass * x.v.squaredNorm();
}

double storage_function(const RigidState & x, const RigidBodyParams & p)
{
  return kinetic_energy(x, p) - p.mass * p.gravity * x.xi.z();
}

DissipativityResiduals dissipativity_residuals(const RigidState & x, const ControlInput & u, const OcpSpec & spec,
                                               const RigidBodyParams & p, int stage)
{
  if (stage < 0) { throw InvalidArgument("stage must be non-negative"); }
  const CostWeights & w = spec.weights;
  const double scale    = std::pow(spec.zeta, stage);
  const Vec3 f          = total_force(x, u, p);
  DissipativityResiduals h;
  h.translational = x.v.dot(f) - scale * w.kv * x.v.squaredNorm() - w.kf * f.squaredNorm();
  h.rotational    = x.omega.dot(u.torque) - scale * w.komega * x.omega.squaredNorm() - w.ktau * u.torque.squaredNorm();
  return h;
}

GainCheck check_gain_conditions(const CostWeights & w)
{
  GainCheck g;
  g.kv_kf                = w.kv * w.kf;
  g.komega_ktau          = w.komega * w.ktau;
  g.translational_margin = g.kv_kf - 0.25;
  g.rotational_margin    = g.komega_ktau - 0.25;
  g.translational_ok     = g.kv_kf >= 0.25;
  g.rotational_ok        = g.komega_ktau >= 0.25;
  return g;
}

namespace {

Vec3 uniform_in_ball(std::mt19937_64 & rng, double radius)
{
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Vec3 d(normal(rng), normal(rng), normal(rng));
  const double nrm = d.norm();
  if (nrm == 0.0) { return Vec3::Zero(); }
  return d / nrm * radius * std::cbrt(unit(rng));
}

}  // namespace

std::pair<RigidState, ControlInput> sample_admissible(std::mt19937_64 & rng, const QuadrotorParams & q,
                                                      const SamplingRanges & ranges)
{
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> box(-ranges.position_box, ranges.position_box);
  std::uniform_real_distribution<double> rotor(q.rotor_min, q.rotor_max);

  Eigen::Quaterniond quat(normal(rng), normal(rng), normal(rng), normal(rng));
  quat.normalize();

  RigidState x;
  x.R     = RotationMatrix::project(quat.toRotationMatrix());
  x.xi    = Vec3(box(rng), box(rng), box(rng));
  x.v     = uniform_in_ball(rng, ranges.max_speed);
  x.omega = uniform_in_ball(rng, ranges.max_angular_rate);

  RotorForces f;
  for (double & fi : f.f) { fi = rotor(rng); }
  return {x, mix_rotor_forces(f, q)};
}

double DissipativityReport::max_residual() const
{
  return std::max({max_h1, max_h2, max_h3, max_h4});
}

DissipativityReport sample_dissipativity(const OcpSpec & spec, const QuadrotorParams & q, std::int64_t samples,
                                         std::uint64_t seed, double slack, const SamplingRanges & ranges)
{
  if (samples < 1) { throw InvalidArgument("at least one sample is required"); }
  DissipativityReport rep;
  rep.gains   = check_gain_conditions(spec.weights);
  rep.samples = samples;
  rep.slack   = slack;

  const OcpSpec plain = spec.with_zeta(1.0);
  std::mt19937_64 rng(seed);
  for (std::int64_t i = 0; i < samples; ++i) {
    const auto [x, u]              = sample_admissible(rng, q, ranges);
    const DissipativityResiduals a = dissipativity_residuals(x, u, plain, q.body, 0);
    const DissipativityResiduals b = dissipativity_residuals(x, u, spec, q.body, 0);
    rep.max_h1                     = std::max(rep.max_h1, a.translational);
    rep.max_h2                     = std::max(rep.max_h2, a.rotational);
    rep.max_h3                     = std::max(rep.max_h3, b.translational);
    rep.max_h4                     = std::max(rep.max_h4, b.rotational);
  }
  return rep;
}

}  // namespace geonmpc
