#include "kecbf/safety_filter.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace kecbf {

void FilterConfig::validate() const {
  if (!(k_max >= 0.0) || !std::isfinite(k_max))
    throw std::invalid_argument("FilterConfig: k_max must be >= 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("FilterConfig: gamma must be > 0");
  if (!(eps_v > 0.0)) throw std::invalid_argument("FilterConfig: eps_v must be > 0");
  if (box && (box->lower.size() != box->upper.size() ||
              (box->lower.array() > box->upper.array()).any()))
    throw std::invalid_argument("FilterConfig: box requires lower <= upper");
}

std::optional<BoxBounds> box_from_limits(const RobotModel& model) {
  if (!model.torque_limit) return std::nullopt;
  return BoxBounds{-*model.torque_limit, *model.torque_limit};
}

double barrier(const RobotModel& model, const State& state, const FilterConfig& config) {
  return config.k_max - kinetic_energy(model, state);
}

double barrier_rate(const RobotModel& model, const State& state, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& tau_ext_est, const FilterConfig& config) {
  check_state(model, state);
  double rate = state.qdot.dot(gravity_torque(model, state.q)) -
                state.qdot.dot(model.actuation * u);
  if (config.mode == InteractionMode::aware) rate -= state.qdot.dot(tau_ext_est);
  return rate;
}

double psi(const RobotModel& model, const State& state, const Eigen::VectorXd& u,
           const Eigen::VectorXd& tau_ext_est, const FilterConfig& config) {
  return barrier_rate(model, state, u, tau_ext_est, config) +
         config.gamma * barrier(model, state, config);
}

FilterResult filter(const RobotModel& model, const State& state,
                    const Eigen::VectorXd& u_nom, const Eigen::VectorXd& tau_ext_est,
                    const FilterConfig& config) {
  config.validate();
  check_state(model, state);
  const auto n = state.q.size();
  if (u_nom.size() != n) throw std::invalid_argument("filter: u_nom dimension mismatch");

  FilterResult res;
  res.h = config.k_max - 0.5 * state.qdot.dot(mass_matrix(model, state.q) * state.qdot);

  const Eigen::VectorXd g = gravity_torque(model, state.q);
  const double gravity_power = state.qdot.dot(g);
  const double est_power =
      config.mode == InteractionMode::aware ? state.qdot.dot(tau_ext_est) : 0.0;
  const Eigen::VectorXd bt_qdot = model.actuation.transpose() * state.qdot;

  auto rate_at = [&](const Eigen::VectorXd& u) {
    return gravity_power - bt_qdot.dot(u) - est_power;
  };

  res.psi = rate_at(u_nom) + config.gamma * res.h;

  if (res.psi >= 0.0) {
    res.u = u_nom;
    res.u_safe = Eigen::VectorXd::Zero(n);
    res.hdot = res.psi - config.gamma * res.h;
    return res;
  }

  res.intervened = true;

  // No usable constraint direction: near-zero velocity makes qdot^T B u
  // insensitive to u, so the nominal input stands.
  if (bt_qdot.norm() <= config.eps_v) {
    res.u = u_nom;
    res.u_safe = Eigen::VectorXd::Zero(n);
    res.hdot = rate_at(u_nom);
    return res;
  }

  QpProblem qp;
  qp.u_nom = u_nom;
  qp.a = -bt_qdot;
  qp.b = -gravity_power + est_power - config.gamma * res.h;
  if (config.box) {
    qp.lower = config.box->lower;
    qp.upper = config.box->upper;
  }
  const QpSolution qs = solve_qp(qp);

  if (qs.status == QpStatus::infeasible) {
    // Least-unsafe admissible input: maximize a^T u = -qdot^T B u over the box,
    // i.e. extract as much power as the torque limits allow.
    res.status = FilterStatus::infeasible_clipped;
    res.u.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (qp.a[i] > 0.0)
        res.u[i] = config.box->upper[i];
      else if (qp.a[i] < 0.0)
        res.u[i] = config.box->lower[i];
      else
        res.u[i] = std::clamp(u_nom[i], config.box->lower[i], config.box->upper[i]);
    }
  } else {
    res.u = qs.u;
  }

  res.u_safe = res.u - u_nom;
  res.p_safe = bt_qdot.dot(res.u_safe);
  res.hdot = rate_at(res.u);
  return res;
}

} // namespace kecbf
