#include "kecbf/verify.hpp"

#include <cmath>
#include <random>

#include "kecbf/scenarios.hpp"

namespace kecbf {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::VectorXd uniform_vec(Rng& rng, Eigen::Index n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = uniform(rng, lo, hi);
  return v;
}

RobotModel random_model(Rng& rng) {
  const int n = std::uniform_int_distribution<int>(1, 5)(rng);
  const Eigen::VectorXd mass = uniform_vec(rng, n, 0.5, 5.0);
  const Eigen::VectorXd length = uniform_vec(rng, n, 0.2, 0.8);
  Eigen::VectorXd com(n), inertia(n);
  for (int i = 0; i < n; ++i) {
    com[i] = uniform(rng, 0.3, 0.9) * length[i];
    inertia[i] = uniform(rng, 1e-3, 0.1);
  }
  const double g = uniform(rng, 0.0, 1.0) < 0.5 ? 0.0 : 9.81;
  RobotModel m = make_model(mass, length, com, inertia, g);
  if (uniform(rng, 0.0, 1.0) < 0.3) {
    // Non-identity but well-conditioned actuation.
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) b(r, c) += uniform(rng, -0.3, 0.3);
    m.actuation = b;
    m.validate();
  }
  return m;
}

State random_state(Rng& rng, const RobotModel& m) {
  return State{uniform_vec(rng, m.n_links(), -3.0, 3.0),
               uniform_vec(rng, m.n_links(), -3.0, 3.0)};
}

CheckResult check(const std::string& name, double worst, double tol) {
  return CheckResult{name, worst, tol, worst <= tol};
}

} // namespace

std::vector<CheckResult> verify_dynamics() {
  Rng rng(101);
  double worst_skew = 0.0, worst_sym = 0.0, worst_grad = 0.0;
  for (int it = 0; it < 200; ++it) {
    const RobotModel m = random_model(rng);
    const State s = random_state(rng, m);
    const Eigen::VectorXd v = uniform_vec(rng, m.n_links(), -1.0, 1.0);

    const Eigen::MatrixXd D = mass_matrix(m, s.q);
    worst_sym = std::max(worst_sym, (D - D.transpose()).cwiseAbs().maxCoeff());

    const auto dD = mass_matrix_partials(m, s.q);
    Eigen::MatrixXd Ddot = Eigen::MatrixXd::Zero(m.n_links(), m.n_links());
    for (int k = 0; k < m.n_links(); ++k) Ddot += dD[k] * s.qdot[k];
    const Eigen::MatrixXd C = coriolis_matrix(m, s.q, s.qdot);
    worst_skew = std::max(worst_skew, std::abs(v.dot((Ddot - 2.0 * C) * v)));

    const Eigen::VectorXd g = gravity_torque(m, s.q);
    const double eps = 1e-6;
    for (int j = 0; j < m.n_links(); ++j) {
      Eigen::VectorXd qp = s.q, qm = s.q;
      qp[j] += eps;
      qm[j] -= eps;
      const double fd = (potential_energy(m, qp) - potential_energy(m, qm)) / (2 * eps);
      worst_grad = std::max(worst_grad, std::abs(g[j] - fd));
    }
  }

  double min_eig = std::numeric_limits<double>::infinity();
  const RobotModel dm = default_model();
  for (int it = 0; it < 1000; ++it) {
    const Eigen::VectorXd q = uniform_vec(rng, dm.n_links(), -3.2, 3.2);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(mass_matrix(dm, q));
    min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
  }

  std::vector<CheckResult> out;
  out.push_back(check("dynamics.skew_symmetry", worst_skew, 1e-10));
  out.push_back(check("dynamics.inertia_symmetry", worst_sym, 1e-12));
  out.push_back(check("dynamics.gravity_gradient", worst_grad, 1e-6));
  out.push_back(CheckResult{"dynamics.inertia_min_eigenvalue", min_eig, 0.0, min_eig > 0.0});
  return out;
}

std::vector<CheckResult> verify_qp() {
  Rng rng(202);
  double worst_kkt = 0.0, worst_agree = 0.0;
  for (int it = 0; it < 1000; ++it) {
    const int m = std::uniform_int_distribution<int>(1, 7)(rng);
    QpProblem p;
    p.u_nom = uniform_vec(rng, m, -5.0, 5.0);
    p.a = uniform_vec(rng, m, -2.0, 2.0);
    if (p.a.norm() < 0.1) p.a[0] += 1.0;
    p.b = uniform(rng, -5.0, 5.0);
    if (it % 2 == 0) {
      p.lower = uniform_vec(rng, m, -6.0, -0.5);
      p.upper = uniform_vec(rng, m, 0.5, 6.0);
    }
    const QpSolution sol = solve_qp(p);
    if (sol.status == QpStatus::optimal)
      worst_kkt = std::max(worst_kkt, sol.kkt_residual);
    if (!p.lower.size()) {
      const Eigen::VectorXd proj = halfspace_projection(p.u_nom, p.a, p.b);
      worst_agree = std::max(worst_agree, (sol.u - proj).lpNorm<Eigen::Infinity>());
    }
  }
  std::vector<CheckResult> out;
  out.push_back(check("qp.kkt_residual", worst_kkt, 1e-9));
  out.push_back(check("qp.halfspace_agreement", worst_agree, 1e-10));
  return out;
}

std::vector<CheckResult> verify_filter() {
  Rng rng(303);
  double worst_closed_form = 0.0, worst_p_safe = 0.0, worst_tightness = 0.0;
  int interventions = 0;
  for (int it = 0; it < 10000; ++it) {
    const RobotModel m = random_model(rng);
    const State s = random_state(rng, m);
    FilterConfig cfg;
    cfg.k_max = uniform(rng, 0.0, 2.0);
    cfg.gamma = uniform(rng, 0.5, 60.0);
    cfg.mode = uniform(rng, 0.0, 1.0) < 0.5 ? InteractionMode::agnostic
                                            : InteractionMode::aware;
    Eigen::VectorXd u_nom = uniform_vec(rng, m.n_links(), -20.0, 20.0);
    const Eigen::VectorXd tau_est = uniform_vec(rng, m.n_links(), -5.0, 5.0);
    if (uniform(rng, 0.0, 1.0) < 0.4) {
      const Eigen::VectorXd lim = uniform_vec(rng, m.n_links(), 1.0, 25.0);
      cfg.box = BoxBounds{-lim, lim};
      u_nom = u_nom.cwiseMin(lim).cwiseMax(-lim);
    }

    const FilterResult fr = filter(m, s, u_nom, tau_est, cfg);
    worst_p_safe = std::max(worst_p_safe, fr.p_safe);

    if (fr.intervened && !cfg.box) {
      ++interventions;
      const Eigen::VectorXd bt_qdot = m.actuation.transpose() * s.qdot;
      const Eigen::VectorXd closed =
          u_nom + bt_qdot * (fr.psi / bt_qdot.squaredNorm());
      worst_closed_form =
          std::max(worst_closed_form, (fr.u - closed).lpNorm<Eigen::Infinity>());
      worst_tightness =
          std::max(worst_tightness, std::abs(psi(m, s, fr.u, tau_est, cfg)));
    }
  }
  std::vector<CheckResult> out;
  out.push_back(check("filter.p_safe_nonpositive", worst_p_safe, 1e-9));
  out.push_back(check("filter.closed_form_agreement", worst_closed_form, 1e-9));
  out.push_back(check("filter.active_constraint_tightness", worst_tightness, 1e-9));
  out.push_back(CheckResult{"filter.intervention_coverage", double(interventions), 100.0,
                            interventions >= 100});
  return out;
}

std::vector<CheckResult> verify_simulator() {
  const RobotModel model = default_model();

  // Conservative swing: no input, no external torque, gravity on.
  auto conservative = [&](int substeps) {
    SimConfig sim;
    sim.duration = 2.0;
    sim.physics_substeps = substeps;
    FilterConfig fcfg;
    ControlSetup setup;
    setup.initial = State{scenario_home_posture(), Eigen::VectorXd::Zero(3)};
    setup.filter_enabled = false;
    return run(model, sim, fcfg, setup);
  };

  const RunResult coarse = conservative(5);
  const RunResult fine = conservative(10);
  const double ratio = coarse.energy_audit_residual /
                       std::max(fine.energy_audit_residual, 1e-300);

  // A driven, filtered run must also balance its energy books.
  StepResponseParams p;
  p.gammas = {10};
  p.include_unfiltered = false;
  p.duration = 2.0;
  const auto runs = step_response(model, p);
  const RunResult& driven = runs.front().result;
  const double driven_rel =
      driven.energy_audit_residual / std::max(driven.max_kinetic_energy, 1e-12);

  std::vector<CheckResult> out;
  out.push_back(check("simulator.audit_conservative",
                      fine.energy_audit_residual,
                      1e-3 * std::max(fine.max_kinetic_energy, 1e-12)));
  out.push_back(check("simulator.audit_driven_relative", driven_rel, 1e-3));
  out.push_back(CheckResult{"simulator.rk4_order_ratio", ratio, 16.0,
                            ratio > 10.0 && ratio < 26.0});
  return out;
}

std::vector<CheckResult> verify_all() {
  std::vector<CheckResult> out;
  for (auto* suite : {&verify_dynamics, &verify_qp, &verify_filter, &verify_simulator}) {
    auto part = (*suite)();
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

} // namespace kecbf
