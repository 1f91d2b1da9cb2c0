#include "geonmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Jacobi>

#include "geonmpc/errors.hpp"

namespace geonmpc {

const char * to_string(QpStatus s)
{
  switch (s) {
    case QpStatus::Optimal: return "optimal";
    case QpStatus::Infeasible: return "infeasible";
    case QpStatus::NotConvex: return "not_convex";
    case QpStatus::MaxIter: return "max_iter";
  }
  return "unknown";
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Rotation (c, s) that maps (a, b) to (h, 0).
struct Givens
{
  double c, s, h;
};

Givens make_givens(double a, double b)
{
  const double h = std::hypot(a, b);
  return {a / h, b / h, h};
}

}  // namespace

bool DenseQpSolver::add_constraint(int iq)
{
  const auto n = static_cast<int>(d_.size());
  for (int j = n - 1; j >= iq + 1; --j) {
    if (d_(j) == 0.0) { continue; }
    const Givens g = make_givens(d_(j - 1), d_(j));
    d_(j - 1)      = g.h;
    d_(j)          = 0.0;
    J_.applyOnTheRight(j - 1, j, Eigen::JacobiRotation<double>(g.c, -g.s));
  }
  R_.col(iq).head(iq + 1) = d_.head(iq + 1);
  if (std::abs(d_(iq)) <= kEps * r_norm_) { return false; }
  r_norm_ = std::max(r_norm_, std::abs(d_(iq)));
  return true;
}

void DenseQpSolver::delete_constraint(int position, int & iq)
{
  for (int i = position; i < iq - 1; ++i) {
    active_[static_cast<std::size_t>(i)] = active_[static_cast<std::size_t>(i) + 1];
    u_(i)                                = u_(i + 1);
    R_.col(i).head(iq)                   = R_.col(i + 1).head(iq);
  }
  R_.col(iq - 1).setZero();
  active_.pop_back();
  --iq;

  // R is now upper Hessenberg from column `position`; restore triangularity.
  for (int j = position; j < iq; ++j) {
    const double b = R_(j + 1, j);
    if (b == 0.0) { continue; }
    const Givens g = make_givens(R_(j, j), b);
    R_(j, j)       = g.h;
    R_(j + 1, j)   = 0.0;
    if (j + 1 < iq) {
      auto tail = R_.block(j, j + 1, 2, iq - j - 1);
      tail.applyOnTheLeft(0, 1, Eigen::JacobiRotation<double>(g.c, g.s));
    }
    J_.applyOnTheRight(j, j + 1, Eigen::JacobiRotation<double>(g.c, -g.s));
  }
}

QpResult DenseQpSolver::solve(const QpProblem & qp)
{
  const auto n = static_cast<int>(qp.H.rows());
  const auto m = static_cast<int>(qp.C.rows());
  if (qp.H.cols() != n || qp.g.size() != n || (m > 0 && qp.C.cols() != n) || qp.lower.size() != m ||
      qp.upper.size() != m) {
    throw LengthMismatch("inconsistent QP dimensions");
  }

  QpResult res;
  Eigen::LLT<Eigen::MatrixXd> llt(qp.H);
  if (llt.info() != Eigen::Success) {
    res.status = QpStatus::NotConvex;
    return res;
  }

  J_ = Eigen::MatrixXd::Identity(n, n);
  llt.matrixU().solveInPlace(J_);  // J = L^{-T}
  R_.setZero(n, n);
  d_.resize(n);
  z_.resize(n);
  u_.setZero(n);
  active_.clear();
  r_norm_ = 1.0;

  Eigen::VectorXd x = -llt.solve(qp.g);
  std::vector<char> is_active(static_cast<std::size_t>(2 * m), 0);
  int iq = 0;

  const int max_iter = settings_.max_iter_factor * (n + 2 * m) + 10;
  Eigen::VectorXd np(n);

  auto finish = [&](QpStatus status) {
    res.status = status;
    res.x      = x;
    res.multipliers.setZero(m);
    for (int i = 0; i < iq; ++i) {
      const int k = active_[static_cast<std::size_t>(i)];
      res.multipliers(k / 2) += (k % 2 == 0) ? u_(i) : -u_(i);
    }
    res.objective          = 0.5 * x.dot(qp.H * x) + qp.g.dot(x);
    res.active_constraints = iq;
    return res;
  };

  while (true) {
    if (++res.iterations > max_iter) { return finish(QpStatus::MaxIter); }

    // Step 1: most violated one-sided constraint.
    slack_ = m > 0 ? Eigen::VectorXd(qp.C * x) : Eigen::VectorXd();
    int p      = -1;
    double s_p = -settings_.tol;
    for (int k = 0; k < 2 * m; ++k) {
      if (is_active[static_cast<std::size_t>(k)]) { continue; }
      const int row  = k / 2;
      const double b = (k % 2 == 0) ? qp.lower(row) : qp.upper(row);
      if (!std::isfinite(b)) { continue; }
      const double s = (k % 2 == 0) ? slack_(row) - b : b - slack_(row);
      if (s < s_p) {
        s_p = s;
        p   = k;
      }
    }
    if (p < 0) { return finish(QpStatus::Optimal); }

    const double sign = (p % 2 == 0) ? 1.0 : -1.0;
    const double bp   = sign * ((p % 2 == 0) ? qp.lower(p / 2) : qp.upper(p / 2));
    np                = sign * qp.C.row(p / 2).transpose();
    double u_plus     = 0.0;

    // Step 2: move in primal and dual space until constraint p is satisfied.
    while (true) {
      d_.noalias() = J_.transpose() * np;
      z_.noalias() = J_.rightCols(n - iq) * d_.tail(n - iq);
      r_           = R_.topLeftCorner(iq, iq).triangularView<Eigen::Upper>().solve(d_.head(iq));

      double t1 = kInf;
      int l     = -1;
      for (int j = 0; j < iq; ++j) {
        if (r_(j) > 0.0) {
          const double ratio = u_(j) / r_(j);
          if (ratio < t1) {
            t1 = ratio;
            l  = j;
          }
        }
      }
      const double zn = z_.dot(np);
      const double t2 = (z_.squaredNorm() > kEps && zn > 0.0) ? -s_p / zn : kInf;

      if (t1 == kInf && t2 == kInf) { return finish(QpStatus::Infeasible); }

      if (t2 == kInf) {
        u_.head(iq) -= t1 * r_;
        u_plus += t1;
        is_active[static_cast<std::size_t>(active_[static_cast<std::size_t>(l)])] = 0;
        delete_constraint(l, iq);
        continue;
      }

      const double t = std::min(t1, t2);
      x += t * z_;
      u_.head(iq) -= t * r_;
      u_plus += t;

      if (t2 <= t1) {
        if (!add_constraint(iq)) { return finish(QpStatus::Infeasible); }
        u_(iq) = u_plus;
        active_.push_back(p);
        is_active[static_cast<std::size_t>(p)] = 1;
        ++iq;
        break;
      }

      is_active[static_cast<std::size_t>(active_[static_cast<std::size_t>(l)])] = 0;
      delete_constraint(l, iq);
      s_p = np.dot(x) - bp;
      if (++res.iterations > max_iter) { return finish(QpStatus::MaxIter); }
    }
  }
}

QpResult BoxQpSolver::solve(const BoxQpProblem & qp, const std::vector<BoundState> * initial_set)
{
  const auto n = static_cast<int>(qp.H.rows());
  if (qp.H.cols() != n || qp.g.size() != n || qp.lower.size() != n || qp.upper.size() != n) {
    throw LengthMismatch("inconsistent box QP dimensions");
  }
  if (initial_set != nullptr && static_cast<int>(initial_set->size()) != n) {
    throw LengthMismatch("initial working set does not match the QP size");
  }

  QpResult res;
  for (int i = 0; i < n; ++i) {
    if (!(qp.lower(i) <= qp.upper(i))) {
      res.status = QpStatus::Infeasible;
      res.x      = qp.lower.cwiseMax(qp.upper.cwiseMin(Eigen::VectorXd::Zero(n)));
      res.multipliers.setZero(n);
      return res;
    }
  }

  const auto un = static_cast<std::size_t>(n);
  Eigen::VectorXd x(n);
  if (initial_set != nullptr) {
    set_ = *initial_set;
  } else {
    Eigen::LLT<Eigen::MatrixXd> llt(qp.H);
    if (llt.info() != Eigen::Success) {
      res.status = QpStatus::NotConvex;
      return res;
    }
    x = -llt.solve(qp.g);
    set_.assign(un, BoundState::Free);
    for (int i = 0; i < n; ++i) {
      if (x(i) <= qp.lower(i)) {
        set_[static_cast<std::size_t>(i)] = BoundState::Lower;
      } else if (x(i) >= qp.upper(i)) {
        set_[static_cast<std::size_t>(i)] = BoundState::Upper;
      }
    }
  }

  // Feasible start: bounded variables on their bound, free ones at the projection of 0.
  for (int i = 0; i < n; ++i) {
    switch (set_[static_cast<std::size_t>(i)]) {
      case BoundState::Lower: x(i) = qp.lower(i); break;
      case BoundState::Upper: x(i) = qp.upper(i); break;
      case BoundState::Free: x(i) = std::clamp(0.0, qp.lower(i), qp.upper(i)); break;
    }
  }

  const int max_iter = settings_.max_iter_factor * (3 * n) + 10;
  Eigen::VectorXd target(n);
  while (true) {
    if (++res.iterations > max_iter) {
      res.status = QpStatus::MaxIter;
      break;
    }

    free_.clear();
    for (int i = 0; i < n; ++i) {
      if (set_[static_cast<std::size_t>(i)] == BoundState::Free) { free_.push_back(i); }
    }
    const auto nf = static_cast<int>(free_.size());

    // Minimizer over the free variables with the others held at their bounds.
    target = x;
    if (nf > 0) {
      hff_.resize(nf, nf);
      rhs_.resize(nf);
      for (int a = 0; a < nf; ++a) {
        const int ia = free_[static_cast<std::size_t>(a)];
        double r     = qp.g(ia);
        for (int i = 0; i < n; ++i) {
          if (set_[static_cast<std::size_t>(i)] != BoundState::Free) { r += (i > ia ? qp.H(i, ia) : qp.H(ia, i)) * x(i); }
        }
        rhs_(a) = -r;
        for (int b = 0; b <= a; ++b) { hff_(a, b) = qp.H(ia, free_[static_cast<std::size_t>(b)]); }
      }
      Eigen::LLT<Eigen::MatrixXd> llt(hff_);
      if (llt.info() != Eigen::Success) {
        res.status = QpStatus::NotConvex;
        break;
      }
      llt.solveInPlace(rhs_);
      for (int a = 0; a < nf; ++a) { target(free_[static_cast<std::size_t>(a)]) = rhs_(a); }
    }

    // Longest feasible step toward the target; the first blocking bound enters.
    double alpha = 1.0;
    int block    = -1;
    for (int a = 0; a < nf; ++a) {
      const int i     = free_[static_cast<std::size_t>(a)];
      const double dx = target(i) - x(i);
      double t        = kInf;
      if (target(i) < qp.lower(i)) {
        t = dx < 0.0 ? (qp.lower(i) - x(i)) / dx : 0.0;
      } else if (target(i) > qp.upper(i)) {
        t = dx > 0.0 ? (qp.upper(i) - x(i)) / dx : 0.0;
      }
      if (t < alpha) {
        alpha = std::max(t, 0.0);
        block = i;
      }
    }
    if (block >= 0) {
      for (int a = 0; a < nf; ++a) {
        const int i = free_[static_cast<std::size_t>(a)];
        x(i) += alpha * (target(i) - x(i));
      }
      const bool at_lower = target(block) < qp.lower(block);
      x(block)            = at_lower ? qp.lower(block) : qp.upper(block);
      set_[static_cast<std::size_t>(block)] = at_lower ? BoundState::Lower : BoundState::Upper;
      continue;
    }
    x = target;

    // Release the bound whose multiplier has the wrong sign by the largest margin.
    grad_ = qp.g;
    grad_.noalias() += qp.H.selfadjointView<Eigen::Lower>() * x;
    const double scale = settings_.tol * (1.0 + qp.g.cwiseAbs().maxCoeff());
    int release        = -1;
    double worst       = -scale;
    for (int i = 0; i < n; ++i) {
      const BoundState st = set_[static_cast<std::size_t>(i)];
      if (st == BoundState::Free) { continue; }
      const double lambda = st == BoundState::Lower ? grad_(i) : -grad_(i);
      if (lambda < worst) {
        worst   = lambda;
        release = i;
      }
    }
    if (release < 0) {
      res.status = QpStatus::Optimal;
      break;
    }
    set_[static_cast<std::size_t>(release)] = BoundState::Free;
  }

  res.x = x;
  grad_ = qp.g;
  grad_.noalias() += qp.H.selfadjointView<Eigen::Lower>() * x;
  res.multipliers.setZero(n);
  res.active_constraints = 0;
  for (int i = 0; i < n; ++i) {
    if (set_[static_cast<std::size_t>(i)] != BoundState::Free) {
      res.multipliers(i) = grad_(i);
      ++res.active_constraints;
    }
  }
  res.objective = 0.5 * x.dot(grad_ + qp.g);
  return res;
}

}  // namespace geonmpc
