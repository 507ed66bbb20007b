#include "kecbf/dynamics.hpp"

#include <cmath>
#include <stdexcept>

namespace kecbf {

namespace {

// Cosines/sines of the cumulative link angles theta_k = q_0 + ... + q_k.
struct LinkAngles {
  Eigen::VectorXd c, s;
};

LinkAngles link_angles(const Eigen::VectorXd& q) {
  const auto n = q.size();
  LinkAngles a{Eigen::VectorXd(n), Eigen::VectorXd(n)};
  double theta = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    theta += q[k];
    a.c[k] = std::cos(theta);
    a.s[k] = std::sin(theta);
  }
  return a;
}

// Lever arm of cumulative angle k in the COM position of link i:
// full link lengths up the chain, COM offset on the link itself.
inline double lever(const RobotModel& m, Eigen::Index i, Eigen::Index k) {
  return k < i ? m.length[k] : m.com_offset[i];
}

// 2 x n Jacobian of link i's COM position. Column j (j <= i) is
// sum_{k=j..i} lever(i,k) * (-s_k, c_k).
Eigen::MatrixXd com_jacobian(const RobotModel& m, const LinkAngles& a, Eigen::Index i) {
  const auto n = m.mass.size();
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2, n);
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  for (Eigen::Index k = i; k >= 0; --k) {
    acc += lever(m, i, k) * Eigen::Vector2d(-a.s[k], a.c[k]);
    J.col(k) = acc;
  }
  return J;
}

// d(com_jacobian(i))/dq_d. Differentiating rotates each (-s_k, c_k) term by
// -90 degrees for every k >= d it appears under.
Eigen::MatrixXd com_jacobian_partial(const RobotModel& m, const LinkAngles& a,
                                     Eigen::Index i, Eigen::Index d) {
  const auto n = m.mass.size();
  Eigen::MatrixXd dJ = Eigen::MatrixXd::Zero(2, n);
  if (d > i) return dJ;
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  for (Eigen::Index k = i; k >= 0; --k) {
    if (k >= d) acc += lever(m, i, k) * Eigen::Vector2d(-a.c[k], -a.s[k]);
    dJ.col(k) = acc;
    if (k == d) {
      // Columns j < d keep the same accumulated value: the max(j, d) cutoff
      // stops growing once j drops below d.
      for (Eigen::Index j = 0; j < d; ++j) dJ.col(j) = acc;
      break;
    }
  }
  return dJ;
}

} // namespace

void check_state(const RobotModel& model, const State& state) {
  const auto n = model.mass.size();
  if (state.q.size() != n || state.qdot.size() != n)
    throw std::invalid_argument("state dimension does not match model n_links");
  if (!state.q.allFinite() || !state.qdot.allFinite())
    throw std::invalid_argument("state contains non-finite entries");
}

Eigen::MatrixXd mass_matrix(const RobotModel& model, const Eigen::VectorXd& q) {
  const auto n = q.size();
  const LinkAngles a = link_angles(q);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::MatrixXd Jv = com_jacobian(model, a, i);
    D.noalias() += model.mass[i] * Jv.transpose() * Jv;
    // Angular Jacobian of link i is (1,...,1,0,...): a block of ones.
    D.topLeftCorner(i + 1, i + 1).array() += model.inertia_com[i];
  }
  return 0.5 * (D + D.transpose());
}

std::vector<Eigen::MatrixXd> mass_matrix_partials(const RobotModel& model,
                                                  const Eigen::VectorXd& q) {
  const auto n = q.size();
  const LinkAngles a = link_angles(q);
  std::vector<Eigen::MatrixXd> dD(n, Eigen::MatrixXd::Zero(n, n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::MatrixXd Jv = com_jacobian(model, a, i);
    for (Eigen::Index d = 0; d <= i; ++d) {
      const Eigen::MatrixXd dJv = com_jacobian_partial(model, a, i, d);
      const Eigen::MatrixXd term = model.mass[i] * dJv.transpose() * Jv;
      dD[d] += term + term.transpose();
    }
  }
  return dD;
}

Eigen::MatrixXd coriolis_matrix(const RobotModel& model, const Eigen::VectorXd& q,
                                const Eigen::VectorXd& qdot) {
  const auto n = q.size();
  const std::vector<Eigen::MatrixXd> dD = mass_matrix_partials(model, q);
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(n, n);
  // Christoffel symbols of the first kind:
  // C_ab = 0.5 * sum_c (dD_ab/dq_c + dD_ac/dq_b - dD_bc/dq_a) qdot_c
  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index b = 0; b < n; ++b) {
      double acc = 0.0;
      for (Eigen::Index c = 0; c < n; ++c)
        acc += (dD[c](a, b) + dD[b](a, c) - dD[a](b, c)) * qdot[c];
      C(a, b) = 0.5 * acc;
    }
  return C;
}

Eigen::VectorXd gravity_torque(const RobotModel& model, const Eigen::VectorXd& q) {
  const auto n = q.size();
  const LinkAngles a = link_angles(q);
  // g = dV/dq with V = g_a * sum_i m_i y_com_i; the y-row of each COM
  // Jacobian is exactly dy_com_i/dq.
  Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i)
    g += model.gravity_accel * model.mass[i] * com_jacobian(model, a, i).row(1).transpose();
  return g;
}

double potential_energy(const RobotModel& model, const Eigen::VectorXd& q) {
  const LinkAngles a = link_angles(q);
  double v = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    double y = 0.0;
    for (Eigen::Index k = 0; k <= i; ++k) y += lever(model, i, k) * a.s[k];
    v += model.gravity_accel * model.mass[i] * y;
  }
  return v;
}

Eigen::Vector2d ee_position(const RobotModel& model, const Eigen::VectorXd& q) {
  const LinkAngles a = link_angles(q);
  Eigen::Vector2d p = Eigen::Vector2d::Zero();
  for (Eigen::Index k = 0; k < q.size(); ++k)
    p += model.length[k] * Eigen::Vector2d(a.c[k], a.s[k]);
  return p;
}

Eigen::MatrixXd ee_jacobian(const RobotModel& model, const Eigen::VectorXd& q) {
  const auto n = q.size();
  const LinkAngles a = link_angles(q);
  Eigen::MatrixXd J(2, n);
  Eigen::Vector2d acc = Eigen::Vector2d::Zero();
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    acc += model.length[k] * Eigen::Vector2d(-a.s[k], a.c[k]);
    J.col(k) = acc;
  }
  return J;
}

DynamicsTerms compute_terms(const RobotModel& model, const State& state) {
  check_state(model, state);
  DynamicsTerms t;
  t.D = mass_matrix(model, state.q);
  t.C = coriolis_matrix(model, state.q, state.qdot);
  t.g = gravity_torque(model, state.q);
  t.J = ee_jacobian(model, state.q);
  return t;
}

double kinetic_energy(const RobotModel& model, const State& state) {
  check_state(model, state);
  return 0.5 * state.qdot.dot(mass_matrix(model, state.q) * state.qdot);
}

Eigen::VectorXd forward_dynamics(const RobotModel& model, const State& state,
                                 const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& tau_ext) {
  check_state(model, state);
  if (u.size() != state.q.size() || tau_ext.size() != state.q.size())
    throw std::invalid_argument("input dimension does not match model n_links");
  if (!u.allFinite() || !tau_ext.allFinite())
    throw std::invalid_argument("non-finite control or external torque");

  const Eigen::MatrixXd D = mass_matrix(model, state.q);
  const Eigen::MatrixXd C = coriolis_matrix(model, state.q, state.qdot);
  const Eigen::VectorXd g = gravity_torque(model, state.q);
  const Eigen::VectorXd rhs = model.actuation * u + tau_ext - C * state.qdot - g;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(D);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
      ldlt.vectorD().minCoeff() <= 1e-12 * std::max(1.0, ldlt.vectorD().maxCoeff()))
    throw std::runtime_error("inertia matrix is numerically singular; check model parameters");
  return ldlt.solve(rhs);
}

double energy_rate(const RobotModel& model, const State& state,
                   const Eigen::VectorXd& u, const Eigen::VectorXd& tau_ext) {
  check_state(model, state);
  const Eigen::VectorXd g = gravity_torque(model, state.q);
  return -state.qdot.dot(g) + state.qdot.dot(model.actuation * u) +
         state.qdot.dot(tau_ext);
}

} // namespace kecbf
