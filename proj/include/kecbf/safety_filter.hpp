#pragma once

#include <optional>

#include "kecbf/dynamics.hpp"
#include "kecbf/qp.hpp"

namespace kecbf {

/// Whether the constraint uses an estimate of external torques.
enum class InteractionMode { agnostic, aware };

struct BoxBounds {
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
};

struct FilterConfig {
  double k_max = 1.0;  // kinetic energy limit [J], >= 0
  double gamma = 10.0; // class-K gain of alpha(h) = gamma * h [1/s], > 0
  InteractionMode mode = InteractionMode::agnostic;
  std::optional<BoxBounds> box; // input set U; nullopt => all of R^m
  double eps_v = 1e-6;          // degeneracy threshold on ||B^T qdot||

  void validate() const; // throws std::invalid_argument
};

enum class FilterStatus { ok, infeasible_clipped };

struct FilterResult {
  Eigen::VectorXd u;      // commanded torque [N m]
  Eigen::VectorXd u_safe; // u - u_nom; exactly zero when not intervened
  double h = 0.0;         // barrier value [J]
  double hdot = 0.0;      // barrier rate at the commanded u [W]
  double psi = 0.0;       // constraint margin at the *nominal* input [W]
  double p_safe = 0.0;    // qdot^T B u_safe [W], never positive
  bool intervened = false; // psi(u_nom) < 0
  FilterStatus status = FilterStatus::ok;
};

/// Symmetric box from the model's torque limits; nullopt when unlimited.
std::optional<BoxBounds> box_from_limits(const RobotModel& model);

/// h = K_max - K_e(q, qdot).
double barrier(const RobotModel& model, const State& state, const FilterConfig& config);

/// agnostic: hdot = qdot^T g - qdot^T B u
/// aware:    hdot = qdot^T (-B u - tau_ext_est + g)
double barrier_rate(const RobotModel& model, const State& state, const Eigen::VectorXd& u,
                    const Eigen::VectorXd& tau_ext_est, const FilterConfig& config);

/// psi = hdot + gamma * h; the filter intervenes exactly when this is negative
/// at the nominal input.
double psi(const RobotModel& model, const State& state, const Eigen::VectorXd& u,
           const Eigen::VectorXd& tau_ext_est, const FilterConfig& config);

/// Minimally invasive filter: passes u_nom through when psi(u_nom) >= 0,
/// otherwise returns the nearest input satisfying the barrier constraint
/// (and the box, when configured). With an infeasible box the result is the
/// admissible input extracting the most power, flagged infeasible_clipped.
FilterResult filter(const RobotModel& model, const State& state,
                    const Eigen::VectorXd& u_nom, const Eigen::VectorXd& tau_ext_est,
                    const FilterConfig& config);

} // namespace kecbf
