#pragma once

#include "kecbf/dynamics.hpp"

namespace kecbf {

/// Planar Cartesian impedance: virtual spring-damper between the end-effector
/// and a setpoint. Gains are 2x2 PSD matrices; use isotropic() for scalars.
struct ImpedanceConfig {
  Eigen::Matrix2d stiffness = Eigen::Matrix2d::Zero(); // [N/m]
  Eigen::Matrix2d damping = Eigen::Matrix2d::Zero();   // [N s/m]
  Eigen::Vector2d setpoint = Eigen::Vector2d::Zero();  // [m]
  bool gravity_comp = false; // add feedforward cancelling g(q)

  static ImpedanceConfig isotropic(double stiffness, double damping,
                                   const Eigen::Vector2d& setpoint,
                                   bool gravity_comp = false);
  void validate() const; // throws std::invalid_argument on non-PSD gains
};

/// u_nom = J^T (K (x_d - x_ee) - D_d xdot_ee), plus B^{-1} g(q) when
/// gravity_comp is set. A singular Jacobian is fine; J^T is always defined.
Eigen::VectorXd impedance_torque(const RobotModel& model, const State& state,
                                 const ImpedanceConfig& config);

/// Energy stored in the virtual spring at end-effector position x_ee [J].
double spring_energy(const ImpedanceConfig& config, const Eigen::Vector2d& x_ee);

Eigen::VectorXd zero_controller(const RobotModel& model);

/// Feedforward cancelling gravity through the actuation: B^{-1} g(q).
Eigen::VectorXd gravity_compensation(const RobotModel& model, const State& state);

} // namespace kecbf
