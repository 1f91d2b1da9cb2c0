#pragma once

/**
 * @file
 * @brief Direct multiple shooting on TSE(3) and a Gauss-Newton SQP solver.
 *
 * Decision variables are the node states x_0..x_N and the piecewise-constant
 * controls u_0..u_{N-1}. Node rotations are parameterized locally as
 * R_i = Rhat_i cay(delta_i) about anchor rotations that are re-anchored after
 * every accepted step, so iterates never leave SO(3). The shooting defect of
 * interval i is x_{i+1} (-) g_d(x_i, u_i), with the rotational part taken in the
 * Lie algebra through the inverse Cayley map.
 *
 * Each SQP iteration linearizes the defects, condenses the node-state
 * increments out of the QP (x_0 is pinned), builds the Gauss-Newton Hessian of
 * the least-squares stage costs and solves the resulting dense QP. With
 * rotor-force bounds only, the QP is posed in rotor-force increments, where
 * the bounds are simple boxes, and solved by a primal active-set method
 * warm-started across SQP iterations. With state boxes the general
 * dual active-set solver is used. Globalization is an l1-merit backtracking
 * line search.
 */

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "geonmpc/dynamics.hpp"
#include "geonmpc/integrator.hpp"
#include "geonmpc/ocp.hpp"
#include "geonmpc/qp.hpp"

namespace geonmpc {

enum class SolveStatus { Converged, MaxIter, Infeasible };

const char * to_string(SolveStatus s);

enum class DerivativeMode { Analytic, FiniteDifference };
enum class WarmStartMode { Shift, None };

struct SolverConfig
{
  int max_iterations_cold{50};
  int max_iterations_warm{15};
  double feas_tol{1e-6};
  double opt_tol{1e-4};
  /// Sufficient-decrease constant of the merit line search.
  double armijo{1e-4};
  double backtrack{0.5};
  double min_step{1e-6};
  /// Levenberg floor added to the Gauss-Newton Hessian.
  double regularization{1e-8};
  DerivativeMode derivatives{DerivativeMode::Analytic};
  WarmStartMode warm_start{WarmStartMode::Shift};
  /// Perturbation used when derivatives == FiniteDifference.
  double fd_step{1e-6};
  /**
   * On warm-started solves, also iterate from the cold-start guess and keep
   * the better result (converged first, then strictly lower objective; ties
   * keep the warm result).
   */
  bool cold_candidate{true};

  void validate() const;
};

struct InitialGuess
{
  std::vector<RigidState> states;
  std::vector<ControlInput> controls;
};

struct ShootingProblem
{
  OcpSpec spec;
  QuadrotorParams quad;
  RigidState x0;
  std::vector<RigidState> node_states;      // N + 1, node_states[0] == x0
  std::vector<ControlInput> node_controls;  // N

  int horizon() const { return spec.horizon; }
  int num_defects() const { return kStateDim * spec.horizon; }
  int num_controls() const { return kInputDim * spec.horizon; }

  /// Stacked defects (12 N), interval-major, each ordered (xi, v, eta, omega).
  Eigen::VectorXd defects() const;
  double max_defect() const;
  double objective() const;
  /// True when u_e itself lies inside the rotor bounds.
  bool equilibrium_admissible() const;
};

/// Cold-start guess: hover controls (T = m a_g, tau = 0) and a prediction-model rollout from x0.
InitialGuess hover_guess(const RigidState & x0, const OcpSpec & spec, const QuadrotorParams & q);

/**
 * @brief Builds the multiple-shooting NLP.
 *
 * Without a guess the cold-start guess is used. With a guess, node 0 is still
 * pinned to x0. Throws InvalidArgument for an invalid spec or x0 and
 * LengthMismatch for a guess of the wrong size.
 */
ShootingProblem transcribe(const RigidState & x0, const OcpSpec & spec, const QuadrotorParams & q,
                           const InitialGuess * guess = nullptr);

/// Linearization of one shooting interval: d(dx_i, du_i, dx_{i+1}) ~ d + Dx dx_i + Du du_i + Dnext dx_{i+1}.
struct IntervalLinearization
{
  StateTangent defect;
  StateJacobian d_state;
  InputJacobian d_input;
  StateJacobian d_next;
};

IntervalLinearization linearize_interval(const RigidState & xi, const ControlInput & ui, const RigidState & xnext,
                                         const RigidBodyParams & p, const StepSpec & s,
                                         DerivativeMode mode = DerivativeMode::Analytic, double fd_step = 1e-6);

/// Central-difference variant of linearize_predictor().
PredictorLinearization linearize_predictor_fd(const RigidState & x, const ControlInput & u,
                                              const RigidBodyParams & p, const StepSpec & s, double step);

/// l1 merit f + mu |d|_1 before and after one accepted step, at that step's penalty mu.
struct MeritStep
{
  double mu{0.0};
  double before{0.0};
  double after{0.0};
};

struct SolveResult
{
  std::vector<ControlInput> controls;
  std::vector<RigidState> states;
  double objective{0.0};
  int iterations{0};
  SolveStatus status{SolveStatus::MaxIter};
  double solve_time_ms{0.0};
  double max_defect{0.0};
  double stationarity{0.0};
  /// Largest rotor-force bound violation over all nodes (0 when admissible).
  double max_rotor_violation{0.0};
  /// False when the line search stalled before convergence.
  bool line_search_ok{true};
  std::vector<MeritStep> merit_steps;
};

/**
 * @brief Condensed QP data of one SQP iteration.
 *
 * Node increments are delta = G du + s; the Gauss-Newton model of the
 * objective is |Gamma du + gamma|^2 with H = Gamma^T Gamma and g = Gamma^T gamma.
 */
struct CondensedQp
{
  Eigen::MatrixXd G;      // 12 (N+1) x 4N
  Eigen::VectorXd s;      // 12 (N+1)
  Eigen::MatrixXd Gamma;  // 16 (N+1) x 4N
  Eigen::VectorXd gamma;  // 16 (N+1)
  Eigen::VectorXd r;      // current residuals, 16 (N+1)
  Eigen::VectorXd defects;
};

class ShootingSolver
{
public:
  explicit ShootingSolver(SolverConfig cfg = {});

  /**
   * @brief Runs SQP iterations on `prob` (modified in place).
   *
   * With `warm` set and warm starting enabled, the guess is replaced by the
   * shifted previous solution and the warm iteration limit applies. On return
   * `prob` holds the iterate of the returned result.
   */
  SolveResult solve(ShootingProblem & prob, const SolveResult * warm = nullptr);

  const SolverConfig & config() const { return cfg_; }

  /// Linearizes and condenses the current iterate (exposed for testing).
  const CondensedQp & condense(const ShootingProblem & prob);

private:
  SolveResult iterate(ShootingProblem & prob, int limit);

  SolverConfig cfg_;
  DenseQpSolver qp_solver_;
  BoxQpSolver box_solver_;
  CondensedQp cqp_;
  QpProblem qp_;
  BoxQpProblem box_qp_;
  std::vector<IntervalLinearization> intervals_;
};

/// Convenience wrapper creating a one-shot solver.
SolveResult solve(ShootingProblem & prob, const SolverConfig & cfg = {}, const SolveResult * warm = nullptr);

/// Receding-horizon shift: drop the first stage, duplicate the last control, re-propagate the last state.
InitialGuess shift_warm_start(const SolveResult & prev, const OcpSpec & spec, const RigidBodyParams & p);

}  // namespace geonmpc
