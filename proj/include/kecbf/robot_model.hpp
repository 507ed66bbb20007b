#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

namespace kecbf {

/// Planar n-link revolute chain.
///
/// Conventions (fixed, see README):
///  - the chain lives in the x-y plane, joints rotate about +z,
///  - q = 0 puts every link along +x,
///  - joint angles are relative to the previous link,
///  - gravity pulls along -y with magnitude `gravity_accel`.
struct RobotModel {
  Eigen::VectorXd mass;        // per-link mass [kg]
  Eigen::VectorXd length;      // per-link length [m]
  Eigen::VectorXd com_offset;  // COM distance from the inboard joint [m]
  Eigen::VectorXd inertia_com; // rotational inertia about the COM [kg m^2]
  double gravity_accel = 9.81; // magnitude along -y [m/s^2]
  Eigen::MatrixXd actuation;   // B, n x n, full rank
  std::optional<Eigen::VectorXd> torque_limit; // symmetric |u_i| <= limit_i [N m]

  int n_links() const { return static_cast<int>(mass.size()); }

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  /// Copy with a different gravity magnitude. `with_gravity(0)` emulates an
  /// interface that compensates gravity below the torque command.
  RobotModel with_gravity(double g) const;
};

/// Builds a model with identity actuation and no torque limits.
RobotModel make_model(const Eigen::VectorXd& mass, const Eigen::VectorXd& length,
                      const Eigen::VectorXd& com_offset,
                      const Eigen::VectorXd& inertia_com, double gravity_accel = 9.81);

/// Uniform-rod links: COM at mid-length, inertia m*l^2/12 about the COM.
RobotModel make_rod_model(const Eigen::VectorXd& mass, const Eigen::VectorXd& length,
                          double gravity_accel = 9.81);

/// The desk-scale 3-link arm used by the bundled scenarios (reach 1.0 m).
RobotModel default_model();

/// Loads a model from a JSON config file. Schema documented in the README.
/// Throws std::runtime_error with the path and field on parse/validation errors.
RobotModel load_robot_model(const std::string& path);

} // namespace kecbf
