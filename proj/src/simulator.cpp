#include "kecbf/simulator.hpp"

#include <cmath>
#include <deque>
#include <random>
#include <stdexcept>

namespace kecbf {

void SimConfig::validate() const {
  if (!(dt_control > 0.0)) throw std::invalid_argument("SimConfig: dt_control must be > 0");
  if (physics_substeps < 1) throw std::invalid_argument("SimConfig: physics_substeps must be >= 1");
  if (!(duration > 0.0)) throw std::invalid_argument("SimConfig: duration must be > 0");
  if (velocity_noise_std < 0.0)
    throw std::invalid_argument("SimConfig: velocity_noise_std must be >= 0");
  if (qddot_max.size() && (qddot_max.array() <= 0.0).any())
    throw std::invalid_argument("SimConfig: qddot_max entries must be > 0");
}

Eigen::VectorXd rate_limit_velocity(const Eigen::VectorXd& prev,
                                    const Eigen::VectorXd& raw, double dt,
                                    const Eigen::VectorXd& qddot_max) {
  if (!(dt > 0.0)) throw std::invalid_argument("rate_limit_velocity: dt must be > 0");
  if (prev.size() != raw.size() || qddot_max.size() != raw.size())
    throw std::invalid_argument("rate_limit_velocity: size mismatch");
  Eigen::VectorXd out(raw.size());
  for (Eigen::Index i = 0; i < raw.size(); ++i) {
    const double bound = dt * qddot_max[i];
    const double delta = raw[i] - prev[i];
    // Pass the sample through untouched when the increment is admissible, so
    // a clean signal is reproduced bit for bit.
    if (delta > bound)
      out[i] = prev[i] + bound;
    else if (delta < -bound)
      out[i] = prev[i] - bound;
    else
      out[i] = raw[i];
  }
  return out;
}

namespace {

struct PlantDeriv {
  Eigen::VectorXd qdot;
  Eigen::VectorXd qddot;
  double power; // qdot^T (B u + tau_ext - g), the net power into the plant
};

PlantDeriv plant_rhs(const RobotModel& model, double t, const Eigen::VectorXd& q,
                     const Eigen::VectorXd& qdot, const Eigen::VectorXd& bu,
                     const ExternalTorqueFn& tau_ext_fn) {
  const Eigen::MatrixXd D = mass_matrix(model, q);
  const Eigen::MatrixXd C = coriolis_matrix(model, q, qdot);
  const Eigen::VectorXd g = gravity_torque(model, q);
  Eigen::VectorXd tau = bu - g;
  if (tau_ext_fn) tau += tau_ext_fn(t, State{q, qdot});

  PlantDeriv d;
  d.qdot = qdot;
  d.qddot = Eigen::LDLT<Eigen::MatrixXd>(D).solve(tau - C * qdot);
  d.power = qdot.dot(tau);
  return d;
}

// One RK4 step of the augmented state (q, qdot, W) with W the running
// integral of the net power, used for the energy audit.
void rk4_step(const RobotModel& model, double t, double h, Eigen::VectorXd& q,
              Eigen::VectorXd& qdot, double& work, const Eigen::VectorXd& bu,
              const ExternalTorqueFn& tau_ext_fn) {
  const PlantDeriv k1 = plant_rhs(model, t, q, qdot, bu, tau_ext_fn);
  const PlantDeriv k2 = plant_rhs(model, t + 0.5 * h, q + 0.5 * h * k1.qdot,
                                  qdot + 0.5 * h * k1.qddot, bu, tau_ext_fn);
  const PlantDeriv k3 = plant_rhs(model, t + 0.5 * h, q + 0.5 * h * k2.qdot,
                                  qdot + 0.5 * h * k2.qddot, bu, tau_ext_fn);
  const PlantDeriv k4 =
      plant_rhs(model, t + h, q + h * k3.qdot, qdot + h * k3.qddot, bu, tau_ext_fn);

  q += (h / 6.0) * (k1.qdot + 2.0 * k2.qdot + 2.0 * k3.qdot + k4.qdot);
  qdot += (h / 6.0) * (k1.qddot + 2.0 * k2.qddot + 2.0 * k3.qddot + k4.qddot);
  work += (h / 6.0) * (k1.power + 2.0 * k2.power + 2.0 * k3.power + k4.power);
}

} // namespace

RunResult run(const RobotModel& model, const SimConfig& sim, const FilterConfig& filter_cfg,
              const ControlSetup& setup) {
  model.validate();
  sim.validate();
  filter_cfg.validate();
  const RobotModel plant = sim.gravity_compensated ? model.with_gravity(0.0) : model;
  check_state(plant, setup.initial);

  const auto n = plant.mass.size();
  const long ticks = std::lround(sim.duration / sim.dt_control);
  const double dt_sub = sim.dt_control / sim.physics_substeps;

  std::mt19937_64 rng(sim.seed);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::deque<Eigen::VectorXd> est_history; // for delayed estimates

  RunResult result;
  result.trace.reserve(ticks);

  State plant_state = setup.initial;
  Eigen::VectorXd qdot_meas_prev;
  double work = 0.0;
  const double k_e0 = kinetic_energy(plant, plant_state);
  result.max_kinetic_energy = k_e0;

  for (long k = 0; k < ticks; ++k) {
    const double t = k * sim.dt_control;

    // Measure: position is clean, velocity gets noise and the rate limiter.
    Eigen::VectorXd qdot_raw = plant_state.qdot;
    if (sim.velocity_noise_std > 0.0)
      for (Eigen::Index i = 0; i < n; ++i)
        qdot_raw[i] += sim.velocity_noise_std * noise(rng);
    Eigen::VectorXd qdot_meas = qdot_raw;
    if (sim.qddot_max.size() && k > 0)
      qdot_meas = rate_limit_velocity(qdot_meas_prev, qdot_raw, sim.dt_control, sim.qddot_max);
    qdot_meas_prev = qdot_meas;
    const State measured{plant_state.q, qdot_meas};

    const Eigen::VectorXd u_nom =
        setup.u_nom ? setup.u_nom(t, measured) : Eigen::VectorXd::Zero(n);

    // Ground-truth external torque at the tick and its estimate for the filter.
    const Eigen::VectorXd tau_tick =
        setup.tau_ext ? setup.tau_ext(t, plant_state) : Eigen::VectorXd::Zero(n);
    Eigen::VectorXd tau_est = Eigen::VectorXd::Zero(n);
    switch (setup.estimator.kind) {
      case EstimatorSpec::Kind::zero:
        break;
      case EstimatorSpec::Kind::exact:
        tau_est = tau_tick;
        break;
      case EstimatorSpec::Kind::scaled:
        tau_est = setup.estimator.scale * tau_tick;
        break;
      case EstimatorSpec::Kind::delayed: {
        est_history.push_back(tau_tick);
        if (static_cast<long>(est_history.size()) > setup.estimator.delay_ticks) {
          tau_est = est_history.front();
          est_history.pop_front();
        }
        break;
      }
    }

    TraceRecord rec;
    rec.t = t;
    rec.q = plant_state.q;
    rec.qdot = plant_state.qdot;
    rec.k_e = kinetic_energy(plant, plant_state);
    rec.u_nom = u_nom;
    rec.p_ext = plant_state.qdot.dot(tau_tick);
    rec.p_nom = plant_state.qdot.dot(plant.actuation * u_nom);

    if (setup.filter_enabled) {
      const FilterResult fr = filter(plant, measured, u_nom, tau_est, filter_cfg);
      rec.h = fr.h;
      rec.u = fr.u;
      rec.u_safe = fr.u_safe;
      rec.p_safe = fr.p_safe;
      rec.intervened = fr.intervened;
    } else {
      rec.h = filter_cfg.k_max - kinetic_energy(plant, measured);
      rec.u = u_nom;
      rec.u_safe = Eigen::VectorXd::Zero(n);
      rec.p_safe = 0.0;
      rec.intervened = false;
    }

    result.max_kinetic_energy = std::max(result.max_kinetic_energy, rec.k_e);
    const Eigen::VectorXd bu = plant.actuation * rec.u; // held over the substeps
    result.trace.push_back(std::move(rec));

    for (int s = 0; s < sim.physics_substeps; ++s)
      rk4_step(plant, t + s * dt_sub, dt_sub, plant_state.q, plant_state.qdot, work, bu,
               setup.tau_ext);

    if (!plant_state.q.allFinite() || !plant_state.qdot.allFinite()) {
      result.blew_up = true;
      result.failed_tick = k;
      result.final_state = plant_state;
      return result;
    }
  }

  result.final_state = plant_state;
  const double k_e_end = kinetic_energy(plant, plant_state);
  result.max_kinetic_energy = std::max(result.max_kinetic_energy, k_e_end);
  result.energy_audit_residual = std::abs((k_e_end - k_e0) - work);
  return result;
}

} // namespace kecbf
