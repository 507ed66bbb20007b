// Acceptance suite: end-to-end checks of the energy-limiting filter, the QP
// solver, the dynamics identities and the four bundled experiments, each
// reported as a single pass/fail line with its observed worst case.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <random>

#include "kecbf/scenarios.hpp"
#include "qp_oracle.hpp"

using namespace kecbf;

namespace {

void report(int number, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s criterion %d (%s): %s\n", pass ? "[PASS]" : "[FAIL]", number,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
  CHECK_MESSAGE(pass, "criterion ", number, ": ", name, " -- ", detail);
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

struct ScenarioBundle {
  std::vector<ScenarioRun> exp1;
  std::vector<ScenarioRun> exp2;
  std::vector<ScenarioRun> exp3;
  ExternalInteractionParams exp3_params;
  PowerSweepResult exp4;
  ConstantPowerParams exp4_params;
};

const ScenarioBundle& bundle() {
  static const ScenarioBundle b = [] {
    ScenarioBundle s;
    const RobotModel model = default_model();
    s.exp1 = step_response(model, StepResponseParams{});
    s.exp2 = contact_loss(model, ContactLossParams{});
    s.exp3 = external_interaction(model, s.exp3_params);
    s.exp4 = constant_power_injection(model, s.exp4_params);
    return s;
  }();
  return b;
}

// Every per-tick record of every bundled run, with the model's actuation.
void for_each_record(const std::function<void(const TraceRecord&)>& fn) {
  const ScenarioBundle& b = bundle();
  for (const auto* family : {&b.exp1, &b.exp2, &b.exp3})
    for (const auto& r : *family)
      for (const auto& rec : r.result.trace) fn(rec);
  for (const auto& pt : b.exp4.points)
    for (const auto& rec : pt.result.trace) fn(rec);
}

std::mt19937_64 rng(2024);

double uni(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Eigen::VectorXd rand_vec(int n, double lo, double hi) {
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = uni(lo, hi);
  return v;
}

RobotModel random_model() {
  const int n = std::uniform_int_distribution<int>(1, 5)(rng);
  const Eigen::VectorXd mass = rand_vec(n, 0.5, 5.0);
  const Eigen::VectorXd length = rand_vec(n, 0.2, 0.8);
  Eigen::VectorXd com(n), inertia(n);
  for (int i = 0; i < n; ++i) {
    com[i] = uni(0.3, 0.9) * length[i];
    inertia[i] = uni(1e-3, 0.1);
  }
  RobotModel m = make_model(mass, length, com, inertia, uni(0, 1) < 0.5 ? 0.0 : 9.81);
  if (uni(0, 1) < 0.3) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Identity(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) b(r, c) += uni(-0.3, 0.3);
    m.actuation = b;
    m.validate();
  }
  return m;
}

State random_state(const RobotModel& m) {
  return State{rand_vec(m.n_links(), -3, 3), rand_vec(m.n_links(), -3, 3)};
}

double max_filtered_k_e(const std::vector<ScenarioRun>& runs, double gamma) {
  for (const auto& r : runs)
    if (r.filter_on && r.gamma == gamma) return max_kinetic_energy(r.result.trace);
  REQUIRE(false);
  return 0.0;
}

} // namespace

TEST_CASE("1: filter power is never positive") {
  const RobotModel plant = default_model();
  double worst = -1e300;

  for (int it = 0; it < 10000; ++it) {
    const RobotModel m = random_model();
    const State s = random_state(m);
    FilterConfig cfg;
    cfg.k_max = uni(0, 2);
    cfg.gamma = uni(0.5, 60);
    cfg.mode = it % 2 ? InteractionMode::aware : InteractionMode::agnostic;
    Eigen::VectorXd u_nom = rand_vec(m.n_links(), -20, 20);
    if (it % 5 == 0) {
      const Eigen::VectorXd lim = rand_vec(m.n_links(), 1, 25);
      cfg.box = BoxBounds{-lim, lim};
      u_nom = u_nom.cwiseMin(lim).cwiseMax(-lim);
    }
    const FilterResult fr =
        filter(m, s, u_nom, rand_vec(m.n_links(), -5, 5), cfg);
    worst = std::max(worst, fr.p_safe);
  }

  // Every tick of every bundled scenario trace, recomputed from the records.
  for_each_record([&](const TraceRecord& rec) {
    worst = std::max(worst, rec.qdot.dot(plant.actuation * rec.u_safe));
  });

  report(1, "filter power nonpositive", worst <= 1e-9,
         "max qdot^T B u_safe = " + num(worst) + " W over 10^4 random calls and all traces");
}

TEST_CASE("2: the filter is minimally invasive") {
  long checked = 0, violations = 0;
  for_each_record([&](const TraceRecord& rec) {
    if (rec.intervened) return;
    ++checked;
    if ((rec.u.array() != rec.u_nom.array()).any()) ++violations;
  });
  report(2, "minimal invasiveness", violations == 0 && checked > 10000,
         "u == u_nom bitwise on " + std::to_string(checked) + " non-intervened ticks, " +
             std::to_string(violations) + " violations");
}

TEST_CASE("3: interventions match the analytic projection") {
  double worst = 0.0;
  int cases = 0;
  for (int it = 0; cases < 1000 && it < 100000; ++it) {
    const RobotModel m = random_model();
    const State s = random_state(m);
    FilterConfig cfg;
    cfg.k_max = uni(0, 1);
    cfg.gamma = uni(0.5, 60);
    const Eigen::VectorXd u_nom = rand_vec(m.n_links(), -20, 20);
    const Eigen::VectorXd dir = m.actuation.transpose() * s.qdot;
    if (dir.norm() <= cfg.eps_v) continue;
    const FilterResult fr = filter(m, s, u_nom, Eigen::VectorXd::Zero(m.n_links()), cfg);
    if (!fr.intervened) continue;
    ++cases;
    const Eigen::VectorXd analytic = u_nom + dir * (fr.psi / dir.squaredNorm());
    worst = std::max(worst, (fr.u - analytic).lpNorm<Eigen::Infinity>());
  }
  report(3, "closed-form equivalence", cases == 1000 && worst <= 1e-9,
         "worst |u - analytic| = " + num(worst) + " over " + std::to_string(cases) +
             " box-free interventions");
}

TEST_CASE("4: the QP solver agrees with the projected-gradient oracle") {
  double worst_u = 0.0, worst_obj = 0.0;
  int cases = 0;
  for (int it = 0; cases < 1000 && it < 20000; ++it) {
    const int m = std::uniform_int_distribution<int>(1, 7)(rng);
    QpProblem p;
    p.u_nom = rand_vec(m, -5, 5);
    p.a = rand_vec(m, -2, 2);
    if (p.a.norm() < 0.1) p.a[0] += 1.0;
    p.lower = rand_vec(m, -6, -0.5);
    p.upper = rand_vec(m, 0.5, 6);
    double best = 0.0;
    for (int i = 0; i < m; ++i)
      best += p.a[i] > 0 ? p.a[i] * p.upper[i] : p.a[i] * p.lower[i];
    p.b = best - uni(0.05, 8.0);

    const QpSolution sol = solve_qp(p);
    REQUIRE(sol.status == QpStatus::optimal);
    const qp_oracle::OracleResult oracle =
        qp_oracle::project(p.u_nom, p.a, p.b, p.lower, p.upper);
    REQUIRE(oracle.converged);
    ++cases;
    worst_u = std::max(worst_u, (sol.u - oracle.u).lpNorm<Eigen::Infinity>());
    worst_obj = std::max(worst_obj, std::abs((sol.u - p.u_nom).squaredNorm() -
                                             (oracle.u - p.u_nom).squaredNorm()));
  }
  report(4, "QP oracle equivalence", cases == 1000 && worst_u <= 1e-6 && worst_obj <= 1e-6,
         "worst |u - oracle| = " + num(worst_u) + ", worst objective gap = " +
             num(worst_obj) + " over 1000 boxed problems");
}

TEST_CASE("5: forward invariance at 1 kHz in the step response") {
  const auto& runs = bundle().exp1;
  const double k_max = StepResponseParams{}.k_max;

  double worst_filtered = 0.0;
  for (double gamma : {1.0, 2.0, 10.0})
    worst_filtered = std::max(worst_filtered, max_filtered_k_e(runs, gamma));

  double unfiltered = 0.0;
  for (const auto& r : runs)
    if (!r.filter_on) unfiltered = max_kinetic_energy(r.result.trace);

  const bool pass = worst_filtered <= 1.02 * k_max && unfiltered > 1.5 * k_max;
  report(5, "forward invariance at 1 kHz", pass,
         "max K_e (gamma in {1,2,10}) = " + num(worst_filtered) + " J <= " +
             num(1.02 * k_max) + " J; unfiltered " + num(unfiltered) + " J > " +
             num(1.5 * k_max) + " J");
}

TEST_CASE("6: lower gamma is more conservative") {
  bool pass = true;
  std::string detail;
  for (const auto* family : {&bundle().exp1, &bundle().exp2}) {
    double prev = -1.0;
    for (double gamma : {1.0, 2.0, 10.0, 50.0}) {
      const double mk = max_filtered_k_e(*family, gamma);
      pass = pass && mk >= prev;
      detail += num(mk) + " ";
      prev = mk;
    }
    detail += (family == &bundle().exp1 ? "(step) " : "(contact loss)");
  }
  report(6, "conservatism ordering", pass, "max K_e over gamma {1,2,10,50}: " + detail);
}

TEST_CASE("7: steady-state energy error follows P_ext/gamma") {
  const auto& sweep = bundle().exp4;
  const auto& params = bundle().exp4_params;

  bool pass = true;
  double worst_rel = 0.0;
  int settled = 0;
  for (const auto& pt : sweep.points) {
    if (!pt.steady) {
      pass = false;
      continue;
    }
    ++settled;
    const double expected = pt.p_ext / pt.gamma;
    worst_rel = std::max(worst_rel,
                         std::abs((pt.steady->k_e_ss - params.k_max) - expected) / expected);
  }
  pass = pass && worst_rel <= 0.05;

  double worst_slope = 0.0;
  pass = pass && sweep.fits.size() == params.gammas.size();
  for (const auto& [gamma, fit] : sweep.fits)
    worst_slope = std::max(worst_slope, std::abs(fit.slope * gamma - 1.0));
  pass = pass && worst_slope <= 0.1;

  report(7, "steady-state error law", pass,
         std::to_string(settled) + "/" +
             std::to_string(params.gammas.size() * params.p_ext_grid.size()) +
             " runs settled; worst pointwise error " + num(100 * worst_rel) +
             "%; worst |slope*gamma - 1| = " + num(worst_slope));
}

TEST_CASE("8: an exact external-torque estimate shrinks the energy error") {
  const auto& runs = bundle().exp3;
  const auto& p = bundle().exp3_params;

  double err_agnostic = -1, err_aware = -1, p_max = 0;
  for (const auto& r : runs) {
    if (!r.filter_on) continue;
    const double err = std::max(0.0, max_kinetic_energy(r.result.trace) - p.k_max);
    if (r.mode == InteractionMode::agnostic) {
      err_agnostic = err;
      p_max = max_external_power(r.result.trace);
    } else {
      err_aware = err;
    }
  }
  const double bound = p_max / p.gamma + 0.02 * p.k_max;
  const bool pass =
      err_aware >= 0 && err_agnostic > 0 && err_aware <= 0.3 * err_agnostic &&
      err_agnostic <= bound;
  report(8, "interaction-aware improvement", pass,
         "aware error " + num(err_aware) + " J <= 0.3 * agnostic " + num(err_agnostic) +
             " J; agnostic <= max P_ext/gamma + 2% K_max = " + num(bound) + " J");
}

TEST_CASE("9: dynamics identities and integrator order") {
  double worst_skew = 0.0, worst_grad = 0.0;
  for (int it = 0; it < 300; ++it) {
    const RobotModel m = random_model();
    const State s = random_state(m);
    const auto dD = mass_matrix_partials(m, s.q);
    Eigen::MatrixXd Ddot = Eigen::MatrixXd::Zero(m.n_links(), m.n_links());
    for (int k = 0; k < m.n_links(); ++k) Ddot += dD[k] * s.qdot[k];
    const Eigen::MatrixXd C = coriolis_matrix(m, s.q, s.qdot);
    const Eigen::VectorXd v = rand_vec(m.n_links(), -1, 1);
    worst_skew = std::max(worst_skew, std::abs(v.dot((Ddot - 2.0 * C) * v)));

    const Eigen::VectorXd g = gravity_torque(m, s.q);
    const double eps = 1e-6;
    for (int j = 0; j < m.n_links(); ++j) {
      Eigen::VectorXd qp = s.q, qm = s.q;
      qp[j] += eps;
      qm[j] -= eps;
      const double fd =
          (potential_energy(m, qp) - potential_energy(m, qm)) / (2 * eps);
      worst_grad = std::max(worst_grad, std::abs(g[j] - fd));
    }
  }

  double worst_audit = 0.0; // relative to each run's energy scale
  const ScenarioBundle& b = bundle();
  for (const auto* family : {&b.exp1, &b.exp2, &b.exp3})
    for (const auto& r : *family)
      worst_audit = std::max(r.result.energy_audit_residual /
                                 std::max(r.result.max_kinetic_energy, 1e-12),
                             worst_audit);
  for (const auto& pt : b.exp4.points)
    worst_audit = std::max(pt.result.energy_audit_residual /
                               std::max(pt.result.max_kinetic_energy, 1e-12),
                           worst_audit);

  auto conservative_residual = [](int substeps) {
    SimConfig sim;
    sim.duration = 2.0;
    sim.physics_substeps = substeps;
    FilterConfig fcfg;
    ControlSetup setup;
    setup.initial = State{scenario_home_posture(), Eigen::VectorXd::Zero(3)};
    setup.filter_enabled = false;
    return run(default_model(), sim, fcfg, setup).energy_audit_residual;
  };
  const double ratio = conservative_residual(5) / conservative_residual(10);

  const bool pass = worst_skew <= 1e-10 && worst_grad <= 1e-6 && worst_audit <= 1e-3 &&
                    ratio > 11.0 && ratio < 23.0;
  report(9, "dynamics correctness suite", pass,
         "skew " + num(worst_skew) + "; gravity gradient " + num(worst_grad) +
             "; relative energy audit " + num(worst_audit) + "; substep-halving ratio " +
             num(ratio));
}

TEST_CASE("10: velocity rate limiter contract") {
  const double dt = 1e-3;
  const Eigen::VectorXd bound = Eigen::VectorXd::Constant(2, 40.0);
  std::normal_distribution<double> noise(0.0, 8.0);

  bool bounded = true;
  Eigen::VectorXd state = Eigen::VectorXd::Zero(2);
  for (int k = 0; k < 100000; ++k) {
    Eigen::VectorXd raw(2);
    raw << noise(rng), noise(rng);
    const Eigen::VectorXd next = rate_limit_velocity(state, raw, dt, bound);
    bounded = bounded && ((next - state).cwiseAbs().array() <= dt * 40.0 + 1e-12).all();
    state = next;
  }

  bool identity = true;
  Eigen::VectorXd prev = Eigen::VectorXd::Zero(2);
  for (int k = 1; k <= 20000; ++k) {
    Eigen::VectorXd raw(2);
    raw << std::sin(0.01 * k), 0.5 * std::sin(0.013 * k); // increments far below bound
    const Eigen::VectorXd out = rate_limit_velocity(prev, raw, dt, bound);
    identity = identity && (out.array() == raw.array()).all();
    prev = out;
  }

  report(10, "rate limiter contract", bounded && identity,
         "increments bounded over 10^5 noise samples; smooth signal passed through bitwise");
}
