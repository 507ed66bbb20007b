#pragma once

#include <cstdint>
#include <functional>

#include "kecbf/safety_filter.hpp"
#include "kecbf/trace.hpp"

namespace kecbf {

struct SimConfig {
  double dt_control = 1e-3;      // control period [s], torque held between ticks
  int physics_substeps = 10;     // RK4 steps per control period
  double duration = 1.0;         // [s]
  double velocity_noise_std = 0; // per-joint Gaussian noise on measured qdot [rad/s]
  Eigen::VectorXd qddot_max;     // rate-limiter bound [rad/s^2]; empty => no limiting
  std::uint64_t seed = 0;
  bool gravity_compensated = false; // emulate interface-level gravity compensation

  void validate() const; // throws std::invalid_argument
};

/// Discrete acceleration rate limiter: bounds the increment of the measured
/// velocity without delaying a signal that stays within the bound.
Eigen::VectorXd rate_limit_velocity(const Eigen::VectorXd& prev,
                                    const Eigen::VectorXd& raw, double dt,
                                    const Eigen::VectorXd& qddot_max);

/// Nominal controller: (t, measured state) -> u_nom. Null means zero input.
using NominalFn = std::function<Eigen::VectorXd(double, const State&)>;

/// Ground-truth external generalized torque on the plant, evaluated
/// continuously inside the integrator: (t, plant state) -> tau_ext.
using ExternalTorqueFn = std::function<Eigen::VectorXd(double, const State&)>;

/// How the estimate handed to the filter is derived from the true external
/// torque sampled at each tick.
struct EstimatorSpec {
  enum class Kind { zero, exact, scaled, delayed };
  Kind kind = Kind::zero;
  double scale = 1.0;  // for Kind::scaled
  int delay_ticks = 0; // for Kind::delayed
};

struct ControlSetup {
  State initial;
  NominalFn u_nom;          // null => zero controller
  ExternalTorqueFn tau_ext; // null => no external torque
  EstimatorSpec estimator;
  bool filter_enabled = true;
};

struct RunResult {
  Trace trace; // one record per control tick
  State final_state;
  double energy_audit_residual = 0.0; // |dK_e - integral of net power|, RK4 quadrature
  double max_kinetic_energy = 0.0;
  bool blew_up = false;
  long failed_tick = -1; // index of the tick whose integration went non-finite
};

/// Fixed-step closed-loop run. The filter is invoked exactly once per control
/// tick on the measured state; the commanded torque is held over the
/// physics substeps. Deterministic for a given seed.
RunResult run(const RobotModel& model, const SimConfig& sim, const FilterConfig& filter_cfg,
              const ControlSetup& setup);

} // namespace kecbf
