#include "geonmpc/shooting.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "geonmpc/errors.hpp"

namespace geonmpc {

using namespace tangent;

const char * to_string(SolveStatus s)
{
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIter: return "max_iter";
    case SolveStatus::Infeasible: return "infeasible";
  }
  return "unknown";
}

void SolverConfig::validate() const
{
  if (max_iterations_cold < 1 || max_iterations_warm < 1) { throw InvalidArgument("iteration limits must be >= 1"); }
  if (!(feas_tol > 0.0) || !(opt_tol > 0.0)) { throw InvalidArgument("solver tolerances must be positive"); }
  if (!(armijo > 0.0 && armijo < 0.5)) { throw InvalidArgument("armijo constant must lie in (0, 0.5)"); }
  if (!(backtrack > 0.0 && backtrack < 1.0)) { throw InvalidArgument("backtracking factor must lie in (0, 1)"); }
  if (!(min_step > 0.0 && min_step < 1.0)) { throw InvalidArgument("minimum step must lie in (0, 1)"); }
  if (!(regularization >= 0.0)) { throw InvalidArgument("regularization must be non-negative"); }
  if (!(fd_step > 0.0)) { throw InvalidArgument("finite-difference step must be positive"); }
}

// ---------------------------------------------------------------------------------------------
// Problem

Eigen::VectorXd ShootingProblem::defects() const
{
  const StepSpec & s = spec.dt;
  Eigen::VectorXd d(num_defects());
  for (int i = 0; i < spec.horizon; ++i) {
    const auto k            = static_cast<std::size_t>(i);
    const RigidState pred   = step_predictor(node_states[k], node_controls[k], quad.body, s);
    d.segment<kStateDim>(kStateDim * i) = local_difference(pred, node_states[k + 1]);
  }
  return d;
}

double ShootingProblem::max_defect() const
{
  return spec.horizon > 0 ? defects().cwiseAbs().maxCoeff() : 0.0;
}

double ShootingProblem::objective() const
{
  return horizon_cost(node_states, node_controls, spec, quad.body);
}

bool ShootingProblem::equilibrium_admissible() const
{
  return unmix_wrench(spec.equilibrium.u_e, quad).within(spec.rotor_min, spec.rotor_max);
}

InitialGuess hover_guess(const RigidState & x0, const OcpSpec & spec, const QuadrotorParams & q)
{
  InitialGuess g;
  const ControlInput hover{q.body.hover_thrust(), Vec3::Zero()};
  g.controls.assign(static_cast<std::size_t>(spec.horizon), hover);
  g.states.reserve(static_cast<std::size_t>(spec.horizon) + 1);
  g.states.push_back(x0);
  for (int i = 0; i < spec.horizon; ++i) { g.states.push_back(step_predictor(g.states.back(), hover, q.body, spec.dt)); }
  return g;
}

ShootingProblem transcribe(const RigidState & x0, const OcpSpec & spec, const QuadrotorParams & q,
                           const InitialGuess * guess)
{
  spec.validate();
  q.validate();
  if (!x0.all_finite()) { throw InvalidArgument("initial state must be finite"); }
  if (x0.R.orthogonality_error() > kOrthogonalityTol) { throw InvalidArgument("initial attitude is not in SO(3)"); }

  ShootingProblem prob{spec, q, x0, {}, {}};
  InitialGuess cold;
  if (guess == nullptr) {
    cold  = hover_guess(x0, spec, q);
    guess = &cold;
  }
  const auto n = static_cast<std::size_t>(spec.horizon);
  if (guess->states.size() != n + 1 || guess->controls.size() != n) {
    std::ostringstream os;
    os << "initial guess must hold " << n + 1 << " states and " << n << " controls";
    throw LengthMismatch(os.str());
  }
  prob.node_states   = guess->states;
  prob.node_controls = guess->controls;
  prob.node_states.front() = x0;
  return prob;
}

// ---------------------------------------------------------------------------------------------
// Derivatives

PredictorLinearization linearize_predictor_fd(const RigidState & x, const ControlInput & u,
                                              const RigidBodyParams & p, const StepSpec & s, double step)
{
  PredictorLinearization lin;
  lin.next = step_predictor(x, u, p, s);
  for (int k = 0; k < kStateDim; ++k) {
    StateTangent e = StateTangent::Zero();
    e(k)           = step;
    const StateTangent plus  = local_difference(lin.next, step_predictor(retract(x, e), u, p, s));
    const StateTangent minus = local_difference(lin.next, step_predictor(retract(x, -e), u, p, s));
    lin.dx.col(k)            = (plus - minus) / (2.0 * step);
  }
  for (int k = 0; k < kInputDim; ++k) {
    Vec4 e = Vec4::Zero();
    e(k)   = step;
    const StateTangent plus =
      local_difference(lin.next, step_predictor(x, ControlInput::from_vector(u.as_vector() + e), p, s));
    const StateTangent minus =
      local_difference(lin.next, step_predictor(x, ControlInput::from_vector(u.as_vector() - e), p, s));
    lin.du.col(k) = (plus - minus) / (2.0 * step);
  }
  return lin;
}

IntervalLinearization linearize_interval(const RigidState & xi, const ControlInput & ui, const RigidState & xnext,
                                         const RigidBodyParams & p, const StepSpec & s, DerivativeMode mode,
                                         double fd_step)
{
  const PredictorLinearization pl =
    mode == DerivativeMode::Analytic ? linearize_predictor(xi, ui, p, s) : linearize_predictor_fd(xi, ui, p, s, fd_step);

  IntervalLinearization il;
  il.defect       = local_difference(pl.next, xnext);
  const Vec3 drot = il.defect.segment<3>(kEta);

  // d depends on the prediction through -(I, I, J_l^{-1}(d), I) and on the next node
  // through (I, I, J_r^{-1}(d), I).
  il.d_state                    = -pl.dx;
  il.d_input                    = -pl.du;
  const Mat3 jl_inv             = cayley_left_jacobian_inverse(drot);
  il.d_state.middleRows<3>(kEta) = jl_inv * il.d_state.middleRows<3>(kEta);
  il.d_input.middleRows<3>(kEta) = jl_inv * il.d_input.middleRows<3>(kEta);

  il.d_next                          = StateJacobian::Identity();
  il.d_next.block<3, 3>(kEta, kEta) = cayley_right_jacobian_inverse(drot);
  return il;
}

// ---------------------------------------------------------------------------------------------
// Solver

ShootingSolver::ShootingSolver(SolverConfig cfg) : cfg_(cfg) { cfg_.validate(); }

const CondensedQp & ShootingSolver::condense(const ShootingProblem & prob)
{
  const int n  = prob.horizon();
  const int nu = kInputDim * n;
  const RigidBodyParams & body = prob.quad.body;

  cqp_.G.setZero(kStateDim * (n + 1), nu);
  cqp_.s.setZero(kStateDim * (n + 1));
  cqp_.Gamma.setZero(kResidualDim * (n + 1), nu);
  cqp_.gamma.setZero(kResidualDim * (n + 1));
  cqp_.r.setZero(kResidualDim * (n + 1));
  cqp_.defects.setZero(kStateDim * n);
  intervals_.resize(static_cast<std::size_t>(n));

  StateJacobian abar;
  InputJacobian bbar;
  StateTangent cbar;
  for (int i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    intervals_[k] = linearize_interval(prob.node_states[k], prob.node_controls[k], prob.node_states[k + 1], body,
                                       prob.spec.dt, cfg_.derivatives, cfg_.fd_step);
    const IntervalLinearization & il = intervals_[k];
    cqp_.defects.segment<kStateDim>(kStateDim * i) = il.defect;

    // Solve d + Dx dx_i + Du du_i + Dnext dx_{i+1} = 0 for dx_{i+1}; Dnext is identity
    // except for its rotational block.
    const Mat3 jr = cayley_right_jacobian(il.defect.segment<3>(kEta));
    abar          = -il.d_state;
    bbar          = -il.d_input;
    cbar          = -il.defect;
    abar.middleRows<3>(kEta) = (jr * abar.middleRows<3>(kEta)).eval();
    bbar.middleRows<3>(kEta) = (jr * bbar.middleRows<3>(kEta)).eval();
    cbar.segment<3>(kEta)    = (jr * cbar.segment<3>(kEta)).eval();

    const int row = kStateDim * (i + 1);
    if (i > 0) {
      cqp_.G.block(row, 0, kStateDim, kInputDim * i).noalias() =
        abar * cqp_.G.block(kStateDim * i, 0, kStateDim, kInputDim * i);
    }
    cqp_.G.block<kStateDim, kInputDim>(row, kInputDim * i) = bbar;
    cqp_.s.segment<kStateDim>(row) = abar * cqp_.s.segment<kStateDim>(kStateDim * i) + cbar;
  }

  for (int j = 0; j <= n; ++j) {
    const auto k = static_cast<std::size_t>(j);
    const ControlInput * u = j < n ? &prob.node_controls[k] : nullptr;
    const StageResidual res = stage_residual(prob.node_states[k], u, j, prob.spec, body);
    const int row = kResidualDim * j;
    if (j > 0) {
      cqp_.Gamma.block(row, 0, kResidualDim, kInputDim * j).noalias() =
        res.jx * cqp_.G.block(kStateDim * j, 0, kStateDim, kInputDim * j);
    }
    if (j < n) { cqp_.Gamma.block<kResidualDim, kInputDim>(row, kInputDim * j) = res.ju; }
    cqp_.r.segment<kResidualDim>(row)     = res.r;
    cqp_.gamma.segment<kResidualDim>(row) = res.r + res.jx * cqp_.s.segment<kStateDim>(kStateDim * j);
  }
  return cqp_;
}

namespace {

double rotor_violation(const std::vector<ControlInput> & us, const OcpSpec & spec, const QuadrotorParams & q)
{
  double worst = 0.0;
  for (const ControlInput & u : us) {
    for (double f : unmix_wrench(u, q).f) {
      worst = std::max({worst, spec.rotor_min - f, f - spec.rotor_max});
    }
  }
  return worst;
}

}  // namespace

namespace {

int status_rank(SolveStatus s)
{
  switch (s) {
    case SolveStatus::Converged: return 0;
    case SolveStatus::MaxIter: return 1;
    case SolveStatus::Infeasible: return 2;
  }
  return 3;
}

// Converged beats MaxIter beats Infeasible; within a class the strictly lower objective wins.
bool better(const SolveResult & a, const SolveResult & b)
{
  if (status_rank(a.status) != status_rank(b.status)) { return status_rank(a.status) < status_rank(b.status); }
  return a.objective < b.objective * (1.0 - 1e-9);
}

}  // namespace

SolveResult ShootingSolver::solve(ShootingProblem & prob, const SolveResult * warm)
{
  const auto t_start = std::chrono::steady_clock::now();
  SolveResult out;
  if (warm != nullptr && cfg_.warm_start == WarmStartMode::Shift) {
    ShootingProblem cold;
    if (cfg_.cold_candidate) { cold = prob; }
    InitialGuess g     = shift_warm_start(*warm, prob.spec, prob.quad.body);
    prob.node_states   = std::move(g.states);
    prob.node_controls = std::move(g.controls);
    prob.node_states.front() = prob.x0;
    out = iterate(prob, cfg_.max_iterations_warm);
    if (cfg_.cold_candidate) {
      InitialGuess h     = hover_guess(cold.x0, cold.spec, cold.quad);
      cold.node_states   = std::move(h.states);
      cold.node_controls = std::move(h.controls);
      SolveResult alt    = iterate(cold, cfg_.max_iterations_warm);
      if (better(alt, out)) {
        out  = std::move(alt);
        prob = std::move(cold);
      }
    }
  } else {
    out = iterate(prob, cfg_.max_iterations_cold);
  }
  out.solve_time_ms =
    std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
  return out;
}

SolveResult ShootingSolver::iterate(ShootingProblem & prob, int limit)
{
  const int n  = prob.horizon();
  const int nu = kInputDim * n;
  const OcpSpec & spec = prob.spec;
  const Mat4 unmix     = unmixing_matrix(prob.quad);

  // Inequality rows: 4 rotor forces per stage, then optional state boxes.
  struct BoxRow
  {
    int stage;
    int component;  // tangent index
    double lo, hi;
  };
  std::vector<BoxRow> box_rows;
  auto add_box = [&](const std::optional<BoxBounds> & b, int offset) {
    if (!b) { return; }
    for (int j = 1; j <= n; ++j) {
      for (int c = 0; c < 3; ++c) { box_rows.push_back({j, offset + c, b->lower(c), b->upper(c)}); }
    }
  };
  add_box(spec.state_bounds.xi, kXi);
  add_box(spec.state_bounds.v, kV);
  add_box(spec.state_bounds.omega, kOmega);
  const int m = kInputDim * n + static_cast<int>(box_rows.size());

  const bool rotor_only = box_rows.empty();
  const Mat4 mix        = mixing_matrix(prob.quad);
  qp_.lower.resize(m);
  qp_.upper.resize(m);
  if (!rotor_only) {
    qp_.C.setZero(m, nu);
    for (int i = 0; i < n; ++i) { qp_.C.block<4, 4>(kInputDim * i, kInputDim * i) = unmix; }
  }
  std::vector<BoundState> working_set;

  SolveResult out;
  out.status  = SolveStatus::MaxIter;
  double mu   = 0.0;
  constexpr double kRho = 0.1;

  Eigen::VectorXd du, delta, model;
  std::vector<RigidState> trial_states(prob.node_states.size());
  std::vector<ControlInput> trial_controls(prob.node_controls.size());

  auto merit_terms = [&](const std::vector<RigidState> & xs, const std::vector<ControlInput> & us,
                         double & f, double & d1) {
    ShootingProblem view{spec, prob.quad, prob.x0, xs, us};
    try {
      d1 = view.defects().lpNorm<1>();
    } catch (const CayleySingular &) {
      return false;
    }
    f = horizon_cost(xs, us, spec, prob.quad.body);
    return std::isfinite(f) && std::isfinite(d1);
  };

  for (int iter = 1; iter <= limit; ++iter) {
    out.iterations = iter;
    const CondensedQp & c = condense(prob);

    // Gamma is block lower triangular (stage j only depends on controls 0..j), so
    // accumulate H = Gamma^T Gamma stage by stage on the leading block.
    qp_.H.setZero(nu, nu);
    for (int j = 1; j <= n; ++j) {
      const int cols = kInputDim * std::min(j + 1, n);
      qp_.H.topLeftCorner(cols, cols).selfadjointView<Eigen::Lower>().rankUpdate(
        c.Gamma.block(kResidualDim * j, 0, kResidualDim, cols).transpose());
    }
    qp_.H.topLeftCorner(kInputDim, kInputDim).selfadjointView<Eigen::Lower>().rankUpdate(
      c.Gamma.block(0, 0, kResidualDim, kInputDim).transpose());
    qp_.H.triangularView<Eigen::StrictlyUpper>() = qp_.H.transpose();
    qp_.H.diagonal().array() += cfg_.regularization;
    qp_.g.noalias() = c.Gamma.transpose() * c.gamma;

    for (int i = 0; i < n; ++i) {
      const Vec4 f = unmix * prob.node_controls[static_cast<std::size_t>(i)].as_vector();
      qp_.lower.segment<4>(kInputDim * i) = (spec.rotor_min - f.array()).matrix();
      qp_.upper.segment<4>(kInputDim * i) = (spec.rotor_max - f.array()).matrix();
    }
    for (std::size_t b = 0; b < box_rows.size(); ++b) {
      const BoxRow & br = box_rows[b];
      const int row     = kInputDim * n + static_cast<int>(b);
      const RigidState & x = prob.node_states[static_cast<std::size_t>(br.stage)];
      const double cur  = br.component < kV ? x.xi(br.component)
                          : br.component < kEta ? x.v(br.component - kV)
                                                : x.omega(br.component - kOmega);
      const int grow    = kStateDim * br.stage + br.component;
      qp_.C.row(row)    = c.G.row(grow);
      qp_.lower(row)    = br.lo - cur - c.s(grow);
      qp_.upper(row)    = br.hi - cur - c.s(grow);
    }

    QpResult qr;
    if (rotor_only) {
      // du = blockdiag(mix) df turns the rotor rows into bounds on df.
      box_qp_.H.resize(nu, nu);
      box_qp_.g.resize(nu);
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b <= a; ++b) {
          box_qp_.H.block<4, 4>(kInputDim * a, kInputDim * b).noalias() =
            mix.transpose() * qp_.H.block<4, 4>(kInputDim * a, kInputDim * b) * mix;
        }
        box_qp_.g.segment<4>(kInputDim * a).noalias() = mix.transpose() * qp_.g.segment<4>(kInputDim * a);
      }
      box_qp_.lower = qp_.lower;
      box_qp_.upper = qp_.upper;
      qr = box_solver_.solve(box_qp_, working_set.empty() ? nullptr : &working_set);
      working_set = box_solver_.working_set();
      du.resize(nu);
      for (int a = 0; a < n; ++a) { du.segment<4>(kInputDim * a).noalias() = mix * qr.x.segment<4>(kInputDim * a); }
    } else {
      qr = qp_solver_.solve(qp_);
      du = qr.x;
    }
    if (qr.status == QpStatus::Infeasible || qr.status == QpStatus::NotConvex) {
      out.status = SolveStatus::Infeasible;
      break;
    }

    const double max_defect = c.defects.size() > 0 ? c.defects.cwiseAbs().maxCoeff() : 0.0;
    out.stationarity = (qp_.H * du).cwiseAbs().maxCoeff() / (1.0 + qp_.g.cwiseAbs().maxCoeff());
    out.max_defect   = max_defect;
    if (max_defect <= cfg_.feas_tol && out.stationarity <= cfg_.opt_tol &&
        rotor_violation(prob.node_controls, spec, prob.quad) <= cfg_.feas_tol) {
      out.status = SolveStatus::Converged;
      break;
    }
    if (iter == limit) { break; }

    // l1 merit line search along (du, delta).
    delta.noalias() = c.G * du;
    delta += c.s;
    model.noalias() = c.Gamma * du;
    const double quad  = model.squaredNorm();
    model += c.gamma - c.r;
    const double df    = 2.0 * c.r.dot(model);
    const double d1_0  = c.defects.lpNorm<1>();
    const double f0    = prob.objective();
    if (d1_0 > 0.0) {
      const double mu_req = (df + quad) / ((1.0 - kRho) * d1_0);
      if (mu < mu_req) { mu = mu_req + 1.0; }
    }
    const double dphi = std::min(df - mu * d1_0, 0.0);
    const double phi0 = f0 + mu * d1_0;

    double alpha  = 1.0;
    double phi    = phi0;
    bool accepted = false;
    while (alpha >= cfg_.min_step) {
      for (int j = 0; j <= n; ++j) {
        const auto k = static_cast<std::size_t>(j);
        trial_states[k] = j == 0 ? prob.x0
                                 : retract(prob.node_states[k], alpha * delta.segment<kStateDim>(kStateDim * j));
        if (j < n) {
          trial_controls[k] =
            ControlInput::from_vector(prob.node_controls[k].as_vector() + alpha * du.segment<kInputDim>(kInputDim * j));
        }
      }
      double f = 0.0, d1 = 0.0;
      if (merit_terms(trial_states, trial_controls, f, d1) && f + mu * d1 <= phi0 + cfg_.armijo * alpha * dphi) {
        phi      = f + mu * d1;
        accepted = true;
        break;
      }
      alpha *= cfg_.backtrack;
    }
    if (!accepted) {
      out.line_search_ok = false;
      break;
    }
    out.merit_steps.push_back({mu, phi0, phi});
    prob.node_states.swap(trial_states);
    prob.node_controls.swap(trial_controls);
  }

  out.controls            = prob.node_controls;
  out.states              = prob.node_states;
  out.objective           = prob.objective();
  out.max_defect          = prob.max_defect();
  out.max_rotor_violation = std::max(0.0, rotor_violation(prob.node_controls, spec, prob.quad));
  if (!prob.equilibrium_admissible()) { out.status = SolveStatus::Infeasible; }
  return out;
}

SolveResult solve(ShootingProblem & prob, const SolverConfig & cfg, const SolveResult * warm)
{
  ShootingSolver solver(cfg);
  return solver.solve(prob, warm);
}

InitialGuess shift_warm_start(const SolveResult & prev, const OcpSpec & spec, const RigidBodyParams & p)
{
  const auto n = static_cast<std::size_t>(spec.horizon);
  if (prev.states.size() != n + 1 || prev.controls.size() != n) {
    throw LengthMismatch("previous solution does not match the horizon");
  }
  InitialGuess g;
  g.controls.assign(prev.controls.begin() + 1, prev.controls.end());
  g.controls.push_back(prev.controls.back());
  g.states.assign(prev.states.begin() + 1, prev.states.end());
  g.states.push_back(step_predictor(prev.states.back(), g.controls.back(), p, spec.dt));
  return g;
}

}  // namespace geonmpc
