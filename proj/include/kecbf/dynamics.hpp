#pragma once

#include <vector>

#include "kecbf/robot_model.hpp"

namespace kecbf {

/// Generalized positions and velocities of the chain.
struct State {
  Eigen::VectorXd q;    // [rad]
  Eigen::VectorXd qdot; // [rad/s]
};

/// Everything the control stack needs at one state.
struct DynamicsTerms {
  Eigen::MatrixXd D; // inertia matrix [kg m^2], symmetric positive definite
  Eigen::MatrixXd C; // Coriolis matrix from Christoffel symbols of the first kind
  Eigen::VectorXd g; // gravity torque, gradient of the potential [N m]
  Eigen::MatrixXd J; // 2 x n end-effector Jacobian (x, y rows)
};

/// Throws std::invalid_argument on dimension mismatch or non-finite entries.
void check_state(const RobotModel& model, const State& state);

Eigen::MatrixXd mass_matrix(const RobotModel& model, const Eigen::VectorXd& q);

/// Exact partial derivatives dD/dq_k, k = 0..n-1. The Coriolis matrix built
/// from these satisfies v^T (Ddot - 2C) v = 0 up to floating-point roundoff.
std::vector<Eigen::MatrixXd> mass_matrix_partials(const RobotModel& model,
                                                  const Eigen::VectorXd& q);

Eigen::MatrixXd coriolis_matrix(const RobotModel& model, const Eigen::VectorXd& q,
                                const Eigen::VectorXd& qdot);

Eigen::VectorXd gravity_torque(const RobotModel& model, const Eigen::VectorXd& q);

double potential_energy(const RobotModel& model, const Eigen::VectorXd& q);

Eigen::Vector2d ee_position(const RobotModel& model, const Eigen::VectorXd& q);

Eigen::MatrixXd ee_jacobian(const RobotModel& model, const Eigen::VectorXd& q);

DynamicsTerms compute_terms(const RobotModel& model, const State& state);

/// 0.5 * qdot^T D(q) qdot, non-negative, zero iff qdot = 0.
double kinetic_energy(const RobotModel& model, const State& state);

/// Joint accelerations solving D qddot = B u + tau_ext - C qdot - g.
/// Throws std::runtime_error if D is numerically singular.
Eigen::VectorXd forward_dynamics(const RobotModel& model, const State& state,
                                 const Eigen::VectorXd& u,
                                 const Eigen::VectorXd& tau_ext);

/// Rate of change of kinetic energy: -qdot^T g + qdot^T B u + qdot^T tau_ext [W].
double energy_rate(const RobotModel& model, const State& state,
                   const Eigen::VectorXd& u, const Eigen::VectorXd& tau_ext);

} // namespace kecbf
