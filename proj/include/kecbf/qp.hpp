#pragma once

#include <Eigen/Dense>

namespace kecbf {

/// minimize ||u - u_nom||^2  s.t.  a^T u >= b,  lower <= u <= upper.
/// Box bounds may be +-infinity; empty lower/upper means no box at all.
struct QpProblem {
  Eigen::VectorXd u_nom;
  Eigen::VectorXd a;
  double b = 0.0;
  Eigen::VectorXd lower; // size 0 => unbounded below
  Eigen::VectorXd upper; // size 0 => unbounded above

  void validate() const; // throws std::invalid_argument
};

enum class QpStatus { optimal, infeasible };

struct QpSolution {
  Eigen::VectorXd u;
  QpStatus status = QpStatus::optimal;
  double kkt_residual = 0.0;
  double lambda = 0.0; // multiplier of the halfspace constraint
};

/// Exact solve. The objective is strictly convex, so the minimizer is unique;
/// the dual of the halfspace constraint is found by walking the breakpoints of
/// the piecewise-linear map lambda -> a^T clip(u_nom + lambda a) - b.
/// status == infeasible when the box does not intersect the halfspace.
QpSolution solve_qp(const QpProblem& problem);

/// Closed-form projection of u_nom onto {u : a^T u >= b} (no box).
/// Throws std::domain_error when ||a|| <= eps_v (degenerate constraint).
Eigen::VectorXd halfspace_projection(const Eigen::VectorXd& u_nom,
                                     const Eigen::VectorXd& a, double b,
                                     double eps_v = 1e-6);

} // namespace kecbf
