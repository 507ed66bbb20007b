#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kecbf/controllers.hpp"
#include "kecbf/simulator.hpp"

namespace kecbf {

/// Ordinary least-squares line fit.
struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  Eigen::VectorXd residuals;
};

FitResult fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

struct SteadyState {
  double t_ss = 0.0;   // end of the earliest qualifying window [s]
  double k_e_ss = 0.0; // window-mean kinetic energy [J]
};

/// Earliest window where both the mean dK_e/dt and the mean net power
/// p_ext + p_safe stay below tol. Returns nullopt when no window qualifies;
/// throws std::invalid_argument when the trace is shorter than the window.
std::optional<SteadyState> detect_steady_state(const Trace& trace, double window_s,
                                               double tol_w);

/// One simulated case of an experiment.
struct ScenarioRun {
  std::string label;
  double gamma = 0.0; // 0 when the filter is off
  bool filter_on = true;
  InteractionMode mode = InteractionMode::agnostic;
  double p_ext_target = 0.0; // constant-power level, experiment 4 only
  RunResult result;
};

// ---------------------------------------------------------------------------
// Experiment 1: Cartesian step response under the impedance controller.
struct StepResponseParams {
  std::vector<double> gammas{1, 2, 10, 50};
  bool include_unfiltered = true;
  double k_max = 1.0;      // [J]
  double stiffness = 200;  // [N/m]
  double damping = 6;      // [N s/m]
  double step_offset = 0.40; // setpoint step along +y [m]
  double t_step = 0.25;    // square wave rises here...
  double t_return = 3.25;  // ...and falls here [s]
  double duration = 6.0;
  std::uint64_t seed = 1;
};

std::vector<ScenarioRun> step_response(const RobotModel& model,
                                       const StepResponseParams& params);

// ---------------------------------------------------------------------------
// Experiment 2: sudden loss of contact. A tension-only string anchored below
// the end-effector holds a preloaded virtual spring; releasing it dumps the
// stored energy into motion.
struct ContactLossParams {
  std::vector<double> gammas{1, 2, 10, 50};
  bool include_unfiltered = true;
  double k_max = 1.0;
  double stiffness = 200;
  double damping = 6;
  double lift = 0.25;            // setpoint lift [m]; preload tension = stiffness*lift
  double string_stiffness = 1e4; // [N/m], stiff against the virtual spring
  double anchor_drop = 0.30;     // anchor this far below the initial EE [m]
  double t_release = 1.0;        // multiple of dt_control
  double duration = 5.0;
  std::uint64_t seed = 2;

  double stored_energy() const { return 0.5 * stiffness * lift * lift; } // [J]
};

std::vector<ScenarioRun> contact_loss(const RobotModel& model,
                                      const ContactLossParams& params);

// ---------------------------------------------------------------------------
// Experiment 3: hand-push emulation with the nominal controller disabled.
// The same raised-cosine force bump is replayed against three filter cases.
struct ExternalInteractionParams {
  double k_max = 0.3; // [J]
  double gamma = 50;
  double push_peak = 30;     // [N]
  double push_duration = 0.6; // [s]
  double push_start = 0.5;
  Eigen::Vector2d push_dir{0.0, 1.0};
  double duration = 3.0;
  std::uint64_t seed = 3;
};

/// Returns runs labelled "off", "agnostic", "aware" (exact estimate).
std::vector<ScenarioRun> external_interaction(const RobotModel& model,
                                              const ExternalInteractionParams& params);

// ---------------------------------------------------------------------------
// Experiment 4: constant-power injection downstream of the filter. A virtual
// y-force regulated against the end-effector velocity injects P_ext whenever
// |xdot_y| >= v_min; the steady-state kinetic energy is fitted against P_ext
// per gamma.
struct ConstantPowerParams {
  std::vector<double> gammas{5, 10, 20, 30, 40, 50};
  std::vector<double> p_ext_grid{2, 4, 6, 8, 10, 12}; // [W]
  double k_max = 0.0;
  double v_min = 0.05;    // regulator guard on |xdot_y| [m/s]
  double kick_speed = 0.4; // initial EE speed along +y [m/s]
  double window = 0.5;    // steady-state window [s]
  double tol_frac = 0.02; // steady-state tolerance as a fraction of P_ext
  double duration = 6.0;
  std::uint64_t seed = 4;
};

struct PowerSweepPoint {
  double gamma = 0.0;
  double p_ext = 0.0;
  std::optional<SteadyState> steady; // nullopt => flagged, excluded from the fit
  RunResult result;
};

struct PowerSweepResult {
  std::vector<PowerSweepPoint> points;                  // gamma-major order
  std::vector<std::pair<double, FitResult>> fits;       // (gamma, fit of K_ss - K_max vs P)
};

PowerSweepResult constant_power_injection(const RobotModel& model,
                                          const ConstantPowerParams& params);

// ---------------------------------------------------------------------------
// Shared scenario plumbing, exposed for tests and the CLI.

/// Default posture used by the bundled experiments (EE near (0.56, 0.0) on
/// the default model, well inside the workspace).
Eigen::VectorXd scenario_home_posture();

/// Simulation settings shared by the experiments: 1 kHz control, 10 substeps,
/// no velocity noise, rate limiter at the documented desk-scale bound.
SimConfig scenario_sim_config(const RobotModel& model, double duration,
                              std::uint64_t seed, bool gravity_compensated);

/// Raised-cosine force bump of the given peak and duration starting at t0.
Eigen::Vector2d push_force(double t, double t0, double duration, double peak,
                           const Eigen::Vector2d& dir);

/// Least-norm joint velocity realizing the end-effector velocity xdot.
Eigen::VectorXd joint_velocity_for(const RobotModel& model, const Eigen::VectorXd& q,
                                   const Eigen::Vector2d& xdot);

double max_kinetic_energy(const Trace& trace);
double max_external_power(const Trace& trace);

} // namespace kecbf
