#include "kecbf/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace kecbf {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double lower_of(const QpProblem& p, Eigen::Index i) {
  return p.lower.size() ? p.lower[i] : -kInf;
}
double upper_of(const QpProblem& p, Eigen::Index i) {
  return p.upper.size() ? p.upper[i] : kInf;
}

Eigen::VectorXd clip_to_box(const QpProblem& p, const Eigen::VectorXd& u) {
  Eigen::VectorXd out = u;
  for (Eigen::Index i = 0; i < u.size(); ++i)
    out[i] = std::clamp(u[i], lower_of(p, i), upper_of(p, i));
  return out;
}

// a^T clip(u_nom + lambda a) - b, the nondecreasing piecewise-linear dual map.
double dual_gap(const QpProblem& p, double lambda) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.a.size(); ++i)
    acc += p.a[i] * std::clamp(p.u_nom[i] + lambda * p.a[i], lower_of(p, i), upper_of(p, i));
  return acc - p.b;
}

double kkt_residual_of(const QpProblem& p, const Eigen::VectorXd& u, double lambda) {
  double r = std::max(0.0, p.b - p.a.dot(u));            // halfspace feasibility
  r = std::max(r, std::abs(lambda * (p.a.dot(u) - p.b))); // complementary slackness
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double lo = lower_of(p, i), hi = upper_of(p, i);
    r = std::max(r, std::max(lo - u[i], u[i] - hi)); // box feasibility
    // Stationarity: (u - u_nom) - lambda a + mu_hi - mu_lo = 0 with mu >= 0,
    // so grad must be >= 0 at an active lower bound and <= 0 at an upper one.
    const double grad = u[i] - p.u_nom[i] - lambda * p.a[i];
    if (u[i] <= lo) {
      r = std::max(r, std::max(0.0, -grad));
    } else if (u[i] >= hi) {
      r = std::max(r, std::max(0.0, grad));
    } else {
      r = std::max(r, std::abs(grad));
    }
  }
  return r;
}

} // namespace

void QpProblem::validate() const {
  const auto m = u_nom.size();
  if (a.size() != m) throw std::invalid_argument("QpProblem: a and u_nom sizes differ");
  if (!u_nom.allFinite() || !a.allFinite() || !std::isfinite(b))
    throw std::invalid_argument("QpProblem: u_nom, a, b must be finite");
  if (lower.size() && lower.size() != m)
    throw std::invalid_argument("QpProblem: lower bound size mismatch");
  if (upper.size() && upper.size() != m)
    throw std::invalid_argument("QpProblem: upper bound size mismatch");
  for (Eigen::Index i = 0; i < m; ++i) {
    const double lo = lower.size() ? lower[i] : -kInf;
    const double hi = upper.size() ? upper[i] : kInf;
    if (std::isnan(lo) || std::isnan(hi) || lo > hi)
      throw std::invalid_argument("QpProblem: requires lower <= upper");
  }
}

QpSolution solve_qp(const QpProblem& problem) {
  problem.validate();
  QpSolution sol;

  // Zero gradient: the constraint does not involve u at all.
  if (problem.a.squaredNorm() == 0.0) {
    if (problem.b > 0.0) {
      sol.status = QpStatus::infeasible;
      sol.u = clip_to_box(problem, problem.u_nom);
      return sol;
    }
    sol.u = clip_to_box(problem, problem.u_nom);
    sol.kkt_residual = kkt_residual_of(problem, sol.u, 0.0);
    return sol;
  }

  // lambda = 0: box projection alone. Feasible => optimal.
  const Eigen::VectorXd u0 = clip_to_box(problem, problem.u_nom);
  if (problem.a.dot(u0) >= problem.b) {
    sol.u = u0;
    sol.kkt_residual = kkt_residual_of(problem, sol.u, 0.0);
    return sol;
  }

  // Most-feasible point of the box along a. Below b even there => infeasible.
  {
    double best = 0.0;
    for (Eigen::Index i = 0; i < problem.a.size(); ++i) {
      if (problem.a[i] > 0.0)
        best += problem.a[i] * upper_of(problem, i);
      else if (problem.a[i] < 0.0)
        best += problem.a[i] * lower_of(problem, i);
      else
        best += problem.a[i] * u0[i];
    }
    if (!(best >= problem.b)) {
      sol.status = QpStatus::infeasible;
      sol.u = u0;
      return sol;
    }
  }

  // Breakpoints of lambda -> clip(u_nom + lambda a): each component enters
  // and/or leaves its box as lambda grows.
  std::vector<double> knots;
  for (Eigen::Index i = 0; i < problem.a.size(); ++i) {
    if (problem.a[i] == 0.0) continue;
    const double lo = lower_of(problem, i), hi = upper_of(problem, i);
    const double t_lo = (lo - problem.u_nom[i]) / problem.a[i];
    const double t_hi = (hi - problem.u_nom[i]) / problem.a[i];
    if (std::isfinite(t_lo) && t_lo > 0.0) knots.push_back(t_lo);
    if (std::isfinite(t_hi) && t_hi > 0.0) knots.push_back(t_hi);
  }
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  double lambda_prev = 0.0;
  double gap_prev = problem.a.dot(u0) - problem.b; // < 0 here
  double lambda = -1.0;
  for (const double knot : knots) {
    const double gap = dual_gap(problem, knot);
    if (gap >= 0.0) {
      // Root inside (lambda_prev, knot]; the map is linear on this segment.
      lambda = (gap == gap_prev) ? knot
                                 : lambda_prev + (knot - lambda_prev) * (-gap_prev) / (gap - gap_prev);
      break;
    }
    lambda_prev = knot;
    gap_prev = gap;
  }
  if (lambda < 0.0) {
    // Past the last breakpoint the slope is sum of a_i^2 over components that
    // never saturate; feasibility was established above, so slope > 0.
    double slope = 0.0;
    for (Eigen::Index i = 0; i < problem.a.size(); ++i) {
      if (problem.a[i] == 0.0) continue;
      const double bound = problem.a[i] > 0.0 ? upper_of(problem, i) : lower_of(problem, i);
      if (!std::isfinite(bound)) slope += problem.a[i] * problem.a[i];
    }
    lambda = lambda_prev + (-gap_prev) / slope;
  }

  sol.lambda = lambda;
  sol.u = clip_to_box(problem, problem.u_nom + lambda * problem.a);
  sol.kkt_residual = kkt_residual_of(problem, sol.u, lambda);
  return sol;
}

Eigen::VectorXd halfspace_projection(const Eigen::VectorXd& u_nom,
                                     const Eigen::VectorXd& a, double b,
                                     double eps_v) {
  const double norm2 = a.squaredNorm();
  if (!(std::sqrt(norm2) > eps_v))
    throw std::domain_error("halfspace_projection: degenerate constraint, ||a|| <= eps_v");
  const double gap = b - a.dot(u_nom);
  if (gap <= 0.0) return u_nom;
  return u_nom + (gap / norm2) * a;
}

} // namespace kecbf
