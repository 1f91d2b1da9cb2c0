#pragma once

/**
 * @file
 * @brief Dense strictly convex QP solver (Goldfarb-Idnani dual active set).
 *
 * Solves
 *
 *   min_x 1/2 x^T H x + g^T x   s.t.   lower <= C x <= upper
 *
 * for positive definite H. Each two-sided row is split into the one-sided
 * constraints (row, lower) and (row, upper); infinite bounds are skipped. The
 * most violated constraint enters the active set, ties broken by lowest index.
 */

#include <vector>

#include <Eigen/Core>

namespace geonmpc {

enum class QpStatus { Optimal, Infeasible, NotConvex, MaxIter };

const char * to_string(QpStatus s);

struct QpProblem
{
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::MatrixXd C;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct QpResult
{
  QpStatus status{QpStatus::MaxIter};
  Eigen::VectorXd x;
  /// One multiplier per row of C: positive when the lower bound is active, negative for the upper.
  Eigen::VectorXd multipliers;
  double objective{0.0};
  int iterations{0};
  int active_constraints{0};
};

struct QpSettings
{
  /// Constraint violation accepted at termination.
  double tol{1e-10};
  /// Iteration cap as a multiple of (variables + one-sided constraints).
  int max_iter_factor{10};
};

class DenseQpSolver
{
public:
  explicit DenseQpSolver(QpSettings settings = {}) : settings_(settings) {}

  QpResult solve(const QpProblem & qp);

private:
  bool add_constraint(int iq);
  void delete_constraint(int position, int & iq);

  QpSettings settings_;
  // workspace reused between calls
  Eigen::MatrixXd J_;
  Eigen::MatrixXd R_;
  Eigen::VectorXd d_;
  Eigen::VectorXd z_;
  Eigen::VectorXd r_;
  Eigen::VectorXd u_;
  Eigen::VectorXd slack_;
  std::vector<int> active_;
  double r_norm_{1.0};
};

/// Bound-constrained QP: min 1/2 x^T H x + g^T x  s.t.  lower <= x <= upper.
struct BoxQpProblem
{
  Eigen::MatrixXd H;
  Eigen::VectorXd g;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

/// Per-variable working-set state of a box QP.
enum class BoundState : signed char { Lower = -1, Free = 0, Upper = 1 };

/**
 * @brief Primal active-set solver for strictly convex box-constrained QPs.
 *
 * The working set is seeded either from a caller-supplied set (e.g. the
 * previous SQP iteration) or by clamping the unconstrained minimizer. Each
 * iteration solves the reduced Newton system on the free variables, then
 * either adds the first blocking bound or releases the bound with the most
 * negative multiplier (lowest index on ties). Only the lower triangle of H is
 * referenced.
 */
class BoxQpSolver
{
public:
  explicit BoxQpSolver(QpSettings settings = {}) : settings_(settings) {}

  /// `multipliers` of the result are the bound multipliers (positive at lower, negative at upper).
  QpResult solve(const BoxQpProblem & qp, const std::vector<BoundState> * initial_set = nullptr);

  /// Working set at the last solution.
  const std::vector<BoundState> & working_set() const { return set_; }

private:
  QpSettings settings_;
  std::vector<BoundState> set_;
  std::vector<int> free_;
  Eigen::MatrixXd hff_;
  Eigen::VectorXd rhs_;
  Eigen::VectorXd grad_;
};

}  // namespace geonmpc
