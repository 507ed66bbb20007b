#include "kecbf/controllers.hpp"

#include <stdexcept>

namespace kecbf {

ImpedanceConfig ImpedanceConfig::isotropic(double stiffness, double damping,
                                           const Eigen::Vector2d& setpoint,
                                           bool gravity_comp) {
  ImpedanceConfig c;
  c.stiffness = stiffness * Eigen::Matrix2d::Identity();
  c.damping = damping * Eigen::Matrix2d::Identity();
  c.setpoint = setpoint;
  c.gravity_comp = gravity_comp;
  return c;
}

void ImpedanceConfig::validate() const {
  auto psd = [](const Eigen::Matrix2d& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(0.5 * (m + m.transpose()));
    return es.eigenvalues().minCoeff() >= -1e-12;
  };
  if (!psd(stiffness)) throw std::invalid_argument("ImpedanceConfig: stiffness must be PSD");
  if (!psd(damping)) throw std::invalid_argument("ImpedanceConfig: damping must be PSD");
}

Eigen::VectorXd impedance_torque(const RobotModel& model, const State& state,
                                 const ImpedanceConfig& config) {
  check_state(model, state);
  const Eigen::MatrixXd J = ee_jacobian(model, state.q);
  const Eigen::Vector2d x_ee = ee_position(model, state.q);
  const Eigen::Vector2d xdot_ee = J * state.qdot;
  const Eigen::Vector2d force =
      config.stiffness * (config.setpoint - x_ee) - config.damping * xdot_ee;
  Eigen::VectorXd u = J.transpose() * force;
  if (config.gravity_comp) u += gravity_compensation(model, state);
  return u;
}

double spring_energy(const ImpedanceConfig& config, const Eigen::Vector2d& x_ee) {
  const Eigen::Vector2d e = config.setpoint - x_ee;
  return 0.5 * e.dot(config.stiffness * e);
}

Eigen::VectorXd zero_controller(const RobotModel& model) {
  return Eigen::VectorXd::Zero(model.n_links());
}

Eigen::VectorXd gravity_compensation(const RobotModel& model, const State& state) {
  check_state(model, state);
  return model.actuation.partialPivLu().solve(gravity_torque(model, state.q));
}

} // namespace kecbf
