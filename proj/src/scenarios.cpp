#include "kecbf/scenarios.hpp"

#include <atomic>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace kecbf {

namespace {

// Rate-limiter bound used by the bundled experiments: roughly 10x the largest
// joint acceleration seen in nominal desk-scale runs, so a clean signal always
// passes through.
constexpr double kDeskQddotMax = 4000.0; // [rad/s^2]

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const unsigned workers =
      std::min<unsigned>(std::max(1u, std::thread::hardware_concurrency()),
                         static_cast<unsigned>(count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i);
    });
  for (auto& t : pool) t.join();
}

std::string gamma_label(double gamma) {
  std::string s = "gamma=" + std::to_string(gamma);
  s.erase(s.find_last_not_of('0') + 1);
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

} // namespace

FitResult fit_line(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("fit_line: need at least two matching points");
  const double xm = x.mean(), ym = y.mean();
  const Eigen::VectorXd xc = x.array() - xm;
  const Eigen::VectorXd yc = y.array() - ym;
  const double sxx = xc.squaredNorm();
  if (sxx == 0.0) throw std::invalid_argument("fit_line: x values are all equal");

  FitResult fit;
  fit.slope = xc.dot(yc) / sxx;
  fit.intercept = ym - fit.slope * xm;
  fit.residuals = y - (fit.slope * x.array() + fit.intercept).matrix();
  const double ss_res = fit.residuals.squaredNorm();
  const double ss_tot = yc.squaredNorm();
  fit.r_squared = ss_tot > 0.0 ? std::max(0.0, 1.0 - ss_res / ss_tot) : 1.0;
  return fit;
}

std::optional<SteadyState> detect_steady_state(const Trace& trace, double window_s,
                                               double tol_w) {
  if (trace.size() < 2) throw std::invalid_argument("detect_steady_state: empty trace");
  const double dt = trace[1].t - trace[0].t;
  const auto win = static_cast<std::size_t>(std::lround(window_s / dt));
  if (win < 1 || win >= trace.size())
    throw std::invalid_argument("detect_steady_state: trace shorter than window");

  for (std::size_t start = 0; start + win < trace.size(); ++start) {
    const std::size_t end = start + win;
    const double mean_dk =
        (trace[end].k_e - trace[start].k_e) / (trace[end].t - trace[start].t);
    if (std::abs(mean_dk) >= tol_w) continue;
    double balance = 0.0, k_mean = 0.0;
    for (std::size_t i = start; i <= end; ++i) {
      balance += trace[i].p_ext + trace[i].p_safe;
      k_mean += trace[i].k_e;
    }
    balance /= static_cast<double>(win + 1);
    k_mean /= static_cast<double>(win + 1);
    if (std::abs(balance) < tol_w) return SteadyState{trace[end].t, k_mean};
  }
  return std::nullopt;
}

Eigen::VectorXd scenario_home_posture() {
  Eigen::VectorXd q(3);
  q << -1.2, 1.6, 0.8;
  return q;
}

SimConfig scenario_sim_config(const RobotModel& model, double duration,
                              std::uint64_t seed, bool gravity_compensated) {
  SimConfig sim;
  sim.dt_control = 1e-3;
  sim.physics_substeps = 10;
  sim.duration = duration;
  sim.velocity_noise_std = 0.0;
  sim.qddot_max = Eigen::VectorXd::Constant(model.n_links(), kDeskQddotMax);
  sim.seed = seed;
  sim.gravity_compensated = gravity_compensated;
  return sim;
}

Eigen::Vector2d push_force(double t, double t0, double duration, double peak,
                           const Eigen::Vector2d& dir) {
  if (t < t0 || t >= t0 + duration) return Eigen::Vector2d::Zero();
  const double phase = 2.0 * std::numbers::pi * (t - t0) / duration;
  return dir * (0.5 * peak * (1.0 - std::cos(phase)));
}

Eigen::VectorXd joint_velocity_for(const RobotModel& model, const Eigen::VectorXd& q,
                                   const Eigen::Vector2d& xdot) {
  const Eigen::MatrixXd J = ee_jacobian(model, q);
  const Eigen::Matrix2d JJt = J * J.transpose();
  return J.transpose() * JJt.ldlt().solve(xdot);
}

double max_kinetic_energy(const Trace& trace) {
  double m = 0.0;
  for (const TraceRecord& r : trace) m = std::max(m, r.k_e);
  return m;
}

double max_external_power(const Trace& trace) {
  double m = 0.0;
  for (const TraceRecord& r : trace) m = std::max(m, r.p_ext);
  return m;
}

// ---------------------------------------------------------------------------

std::vector<ScenarioRun> step_response(const RobotModel& model,
                                       const StepResponseParams& params) {
  const Eigen::VectorXd q0 = scenario_home_posture();
  if (q0.size() != model.n_links())
    throw std::invalid_argument("step_response: bundled posture expects the 3-link model");
  const Eigen::Vector2d x0 = ee_position(model, q0);

  // Gravity stays in the plant; the impedance controller carries its own
  // feedforward, as the interface would.
  auto nominal = [&model, &params, x0](double t, const State& measured) {
    Eigen::Vector2d target = x0;
    if (t >= params.t_step && t < params.t_return) target.y() += params.step_offset;
    const ImpedanceConfig cfg =
        ImpedanceConfig::isotropic(params.stiffness, params.damping, target, true);
    return impedance_torque(model, measured, cfg);
  };

  std::vector<ScenarioRun> runs;
  if (params.include_unfiltered) {
    ScenarioRun r;
    r.label = "off";
    r.filter_on = false;
    runs.push_back(std::move(r));
  }
  for (double g : params.gammas) {
    ScenarioRun r;
    r.label = gamma_label(g);
    r.gamma = g;
    runs.push_back(std::move(r));
  }

  parallel_for(runs.size(), [&](std::size_t i) {
    ScenarioRun& r = runs[i];
    FilterConfig fcfg;
    fcfg.k_max = params.k_max;
    fcfg.gamma = r.filter_on ? r.gamma : 1.0;
    fcfg.mode = InteractionMode::agnostic;
    fcfg.box = box_from_limits(model);

    ControlSetup setup;
    setup.initial = State{q0, Eigen::VectorXd::Zero(model.n_links())};
    setup.u_nom = nominal;
    setup.filter_enabled = r.filter_on;
    r.result = run(model, scenario_sim_config(model, params.duration, params.seed, false),
                   fcfg, setup);
  });
  return runs;
}

std::vector<ScenarioRun> contact_loss(const RobotModel& model,
                                      const ContactLossParams& params) {
  const Eigen::VectorXd q0 = scenario_home_posture();
  if (q0.size() != model.n_links())
    throw std::invalid_argument("contact_loss: bundled posture expects the 3-link model");
  const Eigen::Vector2d x0 = ee_position(model, q0);
  const Eigen::Vector2d setpoint = x0 + Eigen::Vector2d(0.0, params.lift);
  const Eigen::Vector2d anchor = x0 - Eigen::Vector2d(0.0, params.anchor_drop);

  {
    // The lifted setpoint must stay reachable.
    const double reach = model.length.sum();
    if (setpoint.norm() > 0.95 * reach)
      throw std::invalid_argument("contact_loss: setpoint outside workspace");
  }

  // Natural length puts the string under exactly the preload tension at t=0,
  // so the arm starts at static equilibrium and the spring stores
  // 0.5*k*lift^2 when released.
  const double tension = params.stiffness * params.lift;
  const double natural_length = params.anchor_drop - tension / params.string_stiffness;

  auto nominal = [&model, &params, setpoint](double, const State& measured) {
    const ImpedanceConfig cfg =
        ImpedanceConfig::isotropic(params.stiffness, params.damping, setpoint, true);
    return impedance_torque(model, measured, cfg);
  };

  auto string_torque = [&model, &params, anchor, natural_length](double t,
                                                                 const State& s) {
    if (t >= params.t_release) return Eigen::VectorXd::Zero(model.n_links()).eval();
    const Eigen::Vector2d x = ee_position(model, s.q);
    const Eigen::Vector2d to_anchor = anchor - x;
    const double dist = to_anchor.norm();
    const double stretch = dist - natural_length;
    if (stretch <= 0.0 || dist <= 1e-12)
      return Eigen::VectorXd::Zero(model.n_links()).eval();
    const Eigen::Vector2d force = params.string_stiffness * stretch * to_anchor / dist;
    return (ee_jacobian(model, s.q).transpose() * force).eval();
  };

  std::vector<ScenarioRun> runs;
  if (params.include_unfiltered) {
    ScenarioRun r;
    r.label = "off";
    r.filter_on = false;
    runs.push_back(std::move(r));
  }
  for (double g : params.gammas) {
    ScenarioRun r;
    r.label = gamma_label(g);
    r.gamma = g;
    runs.push_back(std::move(r));
  }

  parallel_for(runs.size(), [&](std::size_t i) {
    ScenarioRun& r = runs[i];
    FilterConfig fcfg;
    fcfg.k_max = params.k_max;
    fcfg.gamma = r.filter_on ? r.gamma : 1.0;
    fcfg.mode = InteractionMode::agnostic;
    fcfg.box = box_from_limits(model);

    ControlSetup setup;
    setup.initial = State{q0, Eigen::VectorXd::Zero(model.n_links())};
    setup.u_nom = nominal;
    setup.tau_ext = string_torque;
    setup.filter_enabled = r.filter_on;
    r.result = run(model, scenario_sim_config(model, params.duration, params.seed, false),
                   fcfg, setup);
  });
  return runs;
}

std::vector<ScenarioRun> external_interaction(const RobotModel& model,
                                              const ExternalInteractionParams& params) {
  const Eigen::VectorXd q0 = scenario_home_posture();
  if (q0.size() != model.n_links())
    throw std::invalid_argument("external_interaction: bundled posture expects the 3-link model");

  auto push_torque = [&model, &params](double t, const State& s) {
    const Eigen::Vector2d f =
        push_force(t, params.push_start, params.push_duration, params.push_peak,
                   params.push_dir.normalized());
    return (ee_jacobian(model, s.q).transpose() * f).eval();
  };

  std::vector<ScenarioRun> runs(3);
  runs[0].label = "off";
  runs[0].filter_on = false;
  runs[1].label = "agnostic";
  runs[1].mode = InteractionMode::agnostic;
  runs[2].label = "aware";
  runs[2].mode = InteractionMode::aware;
  for (auto& r : runs) r.gamma = r.filter_on ? params.gamma : 0.0;

  parallel_for(runs.size(), [&](std::size_t i) {
    ScenarioRun& r = runs[i];
    FilterConfig fcfg;
    fcfg.k_max = params.k_max;
    fcfg.gamma = params.gamma;
    fcfg.mode = r.mode;
    fcfg.box = box_from_limits(model);

    ControlSetup setup;
    setup.initial = State{q0, Eigen::VectorXd::Zero(model.n_links())};
    setup.tau_ext = push_torque;
    setup.estimator.kind = r.mode == InteractionMode::aware ? EstimatorSpec::Kind::exact
                                                            : EstimatorSpec::Kind::zero;
    setup.filter_enabled = r.filter_on;
    r.result = run(model, scenario_sim_config(model, params.duration, params.seed, true),
                   fcfg, setup);
  });
  return runs;
}

PowerSweepResult constant_power_injection(const RobotModel& model,
                                          const ConstantPowerParams& params) {
  if (params.gammas.empty() || params.p_ext_grid.empty())
    throw std::invalid_argument("constant_power_injection: empty sweep lists");
  const Eigen::VectorXd q0 = scenario_home_posture();
  if (q0.size() != model.n_links())
    throw std::invalid_argument("constant_power_injection: bundled posture expects the 3-link model");
  const Eigen::VectorXd qdot0 =
      joint_velocity_for(model, q0, Eigen::Vector2d(0.0, params.kick_speed));

  PowerSweepResult sweep;
  sweep.points.resize(params.gammas.size() * params.p_ext_grid.size());

  parallel_for(sweep.points.size(), [&](std::size_t i) {
    const double gamma = params.gammas[i / params.p_ext_grid.size()];
    const double p_ext = params.p_ext_grid[i % params.p_ext_grid.size()];

    // The injector acts downstream of the filter: the filter never sees it.
    auto injector = [&model, &params, p_ext](double, const State& s) {
      const Eigen::MatrixXd J = ee_jacobian(model, s.q);
      const double vy = (J * s.qdot)(1);
      if (std::abs(vy) < params.v_min)
        return Eigen::VectorXd::Zero(model.n_links()).eval();
      const Eigen::Vector2d f(0.0, p_ext / vy);
      return (model.actuation * (J.transpose() * f)).eval();
    };

    FilterConfig fcfg;
    fcfg.k_max = params.k_max;
    fcfg.gamma = gamma;
    fcfg.mode = InteractionMode::agnostic;
    fcfg.box = box_from_limits(model);

    ControlSetup setup;
    setup.initial = State{q0, qdot0};
    setup.tau_ext = injector;

    PowerSweepPoint& pt = sweep.points[i];
    pt.gamma = gamma;
    pt.p_ext = p_ext;
    pt.result = run(model, scenario_sim_config(model, params.duration, params.seed, true),
                    fcfg, setup);
    if (!pt.result.blew_up)
      pt.steady = detect_steady_state(pt.result.trace, params.window,
                                      params.tol_frac * p_ext);
  });

  for (std::size_t gi = 0; gi < params.gammas.size(); ++gi) {
    std::vector<double> xs, ys;
    for (std::size_t pi = 0; pi < params.p_ext_grid.size(); ++pi) {
      const PowerSweepPoint& pt = sweep.points[gi * params.p_ext_grid.size() + pi];
      if (!pt.steady) continue;
      xs.push_back(pt.p_ext);
      ys.push_back(pt.steady->k_e_ss - params.k_max);
    }
    if (xs.size() < 2) continue; // not enough settled runs to fit
    sweep.fits.emplace_back(
        params.gammas[gi],
        fit_line(Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())),
                 Eigen::Map<Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()))));
  }
  return sweep;
}

} // namespace kecbf
