#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <limits>
#include <random>

#include "kecbf/scenarios.hpp"
#include "kecbf/simulator.hpp"

using namespace kecbf;

namespace {

std::mt19937_64 rng(555);

Eigen::VectorXd rand_vec(int n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

bool traces_identical(const Trace& a, const Trace& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const auto& ra = a[k];
    const auto& rb = b[k];
    if (ra.t != rb.t || ra.k_e != rb.k_e || ra.h != rb.h || ra.p_safe != rb.p_safe ||
        ra.p_ext != rb.p_ext || ra.p_nom != rb.p_nom || ra.intervened != rb.intervened)
      return false;
    if ((ra.q.array() != rb.q.array()).any() || (ra.qdot.array() != rb.qdot.array()).any())
      return false;
    if ((ra.u_nom.array() != rb.u_nom.array()).any() ||
        (ra.u.array() != rb.u.array()).any() ||
        (ra.u_safe.array() != rb.u_safe.array()).any())
      return false;
  }
  return true;
}

} // namespace

TEST_CASE("rate limiter: admissible increments pass through bitwise") {
  const Eigen::VectorXd prev = rand_vec(3, -1, 1);
  const Eigen::VectorXd bound = Eigen::VectorXd::Constant(3, 100.0);

  CHECK((rate_limit_velocity(prev, prev, 1e-3, bound).array() == prev.array()).all());

  Eigen::VectorXd raw = prev;
  raw[1] += 0.05; // well within 0.1 = dt * bound
  const Eigen::VectorXd out = rate_limit_velocity(prev, raw, 1e-3, bound);
  CHECK((out.array() == raw.array()).all());
}

TEST_CASE("rate limiter: saturation clamps to the acceleration bound") {
  const double dt = 1e-3;
  const Eigen::VectorXd bound = Eigen::VectorXd::Constant(2, 50.0);
  Eigen::VectorXd prev(2), raw(2);
  prev << 0.2, -0.1;
  raw = prev;
  raw[0] += 10.0 * dt * bound[0]; // jump far beyond the admissible increment
  const Eigen::VectorXd out = rate_limit_velocity(prev, raw, dt, bound);
  CHECK(out[0] == doctest::Approx(prev[0] + dt * bound[0]).epsilon(1e-15));
  CHECK(out[1] == raw[1]);
}

TEST_CASE("rate limiter: adversarial noise cannot exceed the bound") {
  const double dt = 1e-3;
  const Eigen::VectorXd bound = Eigen::VectorXd::Constant(1, 30.0);
  std::normal_distribution<double> noise(0.0, 5.0);
  Eigen::VectorXd state = Eigen::VectorXd::Zero(1);
  for (int k = 0; k < 100000; ++k) {
    Eigen::VectorXd raw(1);
    raw << noise(rng);
    const Eigen::VectorXd next = rate_limit_velocity(state, raw, dt, bound);
    CHECK(std::abs(next[0] - state[0]) <= dt * bound[0] + 1e-12);
    state = next;
  }

  // A smooth ramp below the bound is reproduced exactly.
  Eigen::VectorXd prev(1);
  prev << 0.0;
  for (int k = 1; k <= 1000; ++k) {
    Eigen::VectorXd raw(1);
    raw << 0.02 * k * dt * bound[0];
    const Eigen::VectorXd out = rate_limit_velocity(prev, raw, dt, bound);
    CHECK(out[0] == raw[0]);
    prev = out;
  }
}

TEST_CASE("rate limiter input validation") {
  const Eigen::VectorXd v = Eigen::VectorXd::Zero(2);
  CHECK_THROWS_AS(rate_limit_velocity(v, v, 0.0, Eigen::VectorXd::Ones(2)),
                  std::invalid_argument);
  CHECK_THROWS_AS(rate_limit_velocity(v, v, 1e-3, Eigen::VectorXd::Ones(3)),
                  std::invalid_argument);
}

TEST_CASE("at rest with zero input the state never moves") {
  const RobotModel m = default_model();
  SimConfig sim;
  sim.duration = 0.5;
  sim.gravity_compensated = true;
  FilterConfig fcfg;
  ControlSetup setup;
  setup.initial = State{rand_vec(3, -1, 1), Eigen::VectorXd::Zero(3)};
  const RunResult r = run(m, sim, fcfg, setup);
  REQUIRE(!r.blew_up);
  for (const auto& rec : r.trace) {
    CHECK((rec.q.array() == setup.initial.q.array()).all());
    CHECK((rec.qdot.array() == 0.0).all());
    CHECK(rec.k_e == 0.0);
  }
}

TEST_CASE("an inactive filter leaves the closed loop bitwise unchanged") {
  const RobotModel m = default_model();
  SimConfig sim;
  sim.duration = 1.0;
  sim.gravity_compensated = true;
  FilterConfig fcfg;
  fcfg.k_max = 1e6; // never reachable: psi stays positive
  fcfg.gamma = 10.0;

  ControlSetup setup;
  setup.initial = State{scenario_home_posture(), rand_vec(3, -0.3, 0.3)};
  setup.u_nom = [](double t, const State&) {
    Eigen::VectorXd u(3);
    u << std::sin(t), std::cos(2 * t), -std::sin(3 * t);
    return u;
  };

  setup.filter_enabled = true;
  const RunResult on = run(m, sim, fcfg, setup);
  setup.filter_enabled = false;
  const RunResult off = run(m, sim, fcfg, setup);
  REQUIRE(!on.blew_up);
  for (const auto& rec : on.trace) CHECK(!rec.intervened);
  CHECK(traces_identical(on.trace, off.trace));
}

TEST_CASE("energy audit closes over a driven, filtered run") {
  const RobotModel m = default_model();
  SimConfig sim;
  sim.duration = 2.0;
  FilterConfig fcfg;
  fcfg.k_max = 0.5;
  fcfg.gamma = 20.0;
  ControlSetup setup;
  setup.initial = State{scenario_home_posture(), Eigen::VectorXd::Zero(3)};
  setup.u_nom = [](double t, const State&) {
    Eigen::VectorXd u(3);
    u << 12.0 * std::sin(4 * t), -8.0 * std::cos(3 * t), 5.0 * std::sin(7 * t);
    return u;
  };
  setup.tau_ext = [](double t, const State&) {
    Eigen::VectorXd tau(3);
    tau << std::sin(t), 0.0, 0.5 * std::cos(5 * t);
    return tau;
  };
  const RunResult r = run(m, sim, fcfg, setup);
  REQUIRE(!r.blew_up);
  CHECK(r.energy_audit_residual <= 1e-3 * r.max_kinetic_energy);
}

TEST_CASE("halving the substep size cuts the audit residual by about 16x") {
  const RobotModel m = default_model();
  auto residual = [&](int substeps) {
    SimConfig sim;
    sim.duration = 2.0;
    sim.physics_substeps = substeps;
    FilterConfig fcfg;
    ControlSetup setup;
    setup.initial = State{scenario_home_posture(), Eigen::VectorXd::Zero(3)};
    setup.filter_enabled = false; // conservative free swing under gravity
    return run(m, sim, fcfg, setup).energy_audit_residual;
  };
  const double ratio = residual(5) / residual(10);
  CHECK(ratio > 11.0);
  CHECK(ratio < 23.0);
}

TEST_CASE("identical seeds reproduce the trace bitwise, different seeds do not") {
  const RobotModel m = default_model();
  SimConfig sim;
  sim.duration = 0.5;
  sim.velocity_noise_std = 0.01;
  sim.qddot_max = Eigen::VectorXd::Constant(3, 4000.0);
  sim.seed = 77;
  FilterConfig fcfg;
  fcfg.k_max = 0.2;
  fcfg.gamma = 20.0;
  ControlSetup setup;
  setup.initial = State{scenario_home_posture(), rand_vec(3, -0.5, 0.5)};
  setup.u_nom = [](double, const State& s) { return (-2.0 * s.qdot).eval(); };

  const RunResult a = run(m, sim, fcfg, setup);
  const RunResult b = run(m, sim, fcfg, setup);
  CHECK(traces_identical(a.trace, b.trace));

  sim.seed = 78;
  const RunResult c = run(m, sim, fcfg, setup);
  CHECK(!traces_identical(a.trace, c.trace));
}

TEST_CASE("non-finite states abort with the failing tick") {
  const RobotModel m = default_model();
  SimConfig sim;
  sim.duration = 1.0;
  sim.gravity_compensated = true;
  FilterConfig fcfg;
  ControlSetup setup;
  setup.initial = State{scenario_home_posture(), Eigen::VectorXd::Zero(3)};
  setup.filter_enabled = false;
  setup.tau_ext = [](double t, const State&) {
    Eigen::VectorXd tau = Eigen::VectorXd::Zero(3);
    if (t >= 0.4995) tau[0] = std::numeric_limits<double>::quiet_NaN();
    return tau;
  };
  const RunResult r = run(m, sim, fcfg, setup);
  CHECK(r.blew_up);
  CHECK(r.failed_tick == 499);
  CHECK(r.trace.size() == 500); // everything up to and including the failing tick
}

TEST_CASE("estimator knobs degenerate to the exact behavioral identities") {
  const RobotModel m = default_model();
  SimConfig sim;
  sim.duration = 0.8;
  sim.gravity_compensated = true;
  FilterConfig fcfg;
  fcfg.k_max = 0.05;
  fcfg.gamma = 30.0;
  fcfg.mode = InteractionMode::aware;

  ControlSetup setup;
  setup.initial = State{scenario_home_posture(), Eigen::VectorXd::Zero(3)};
  setup.tau_ext = [&m](double t, const State& s) {
    return (ee_jacobian(m, s.q).transpose() *
            push_force(t, 0.1, 0.4, 20.0, Eigen::Vector2d(0, 1)))
        .eval();
  };

  setup.estimator = {EstimatorSpec::Kind::exact, 1.0, 0};
  const RunResult exact = run(m, sim, fcfg, setup);
  setup.estimator = {EstimatorSpec::Kind::scaled, 1.0, 0};
  const RunResult scaled_one = run(m, sim, fcfg, setup);
  CHECK(traces_identical(exact.trace, scaled_one.trace));

  // A zero-scaled or fully delayed estimate behaves like no estimate at all.
  setup.estimator = {EstimatorSpec::Kind::scaled, 0.0, 0};
  const RunResult scaled_zero = run(m, sim, fcfg, setup);
  setup.estimator = {EstimatorSpec::Kind::zero, 1.0, 0};
  const RunResult none = run(m, sim, fcfg, setup);
  CHECK(traces_identical(scaled_zero.trace, none.trace));

  setup.estimator = {EstimatorSpec::Kind::delayed, 1.0, 10000};
  const RunResult fully_delayed = run(m, sim, fcfg, setup);
  CHECK(traces_identical(fully_delayed.trace, none.trace));

  // A short delay changes the response while the push ramps.
  setup.estimator = {EstimatorSpec::Kind::delayed, 1.0, 50};
  const RunResult delayed = run(m, sim, fcfg, setup);
  CHECK(!traces_identical(delayed.trace, exact.trace));
}

TEST_CASE("binary trace round-trip is exact") {
  Trace trace;
  for (int k = 0; k < 257; ++k) {
    TraceRecord r;
    r.t = k * 1e-3;
    r.q = rand_vec(4, -3, 3);
    r.qdot = rand_vec(4, -2, 2);
    r.k_e = std::abs(rand_vec(1, 0, 5)[0]);
    r.h = rand_vec(1, -1, 1)[0];
    r.u_nom = rand_vec(4, -10, 10);
    r.u = rand_vec(4, -10, 10);
    r.u_safe = rand_vec(4, -10, 10);
    r.p_safe = -std::abs(rand_vec(1, 0, 3)[0]);
    r.p_ext = rand_vec(1, -2, 2)[0];
    r.p_nom = rand_vec(1, -2, 2)[0];
    r.intervened = k % 3 == 0;
    trace.push_back(std::move(r));
  }
  const std::string path = "roundtrip_test.ktrc";
  write_trace_binary(path, trace);
  const Trace back = read_trace_binary(path);
  CHECK(traces_identical(trace, back));
  std::remove(path.c_str());

  CHECK_THROWS_AS(read_trace_binary("no_such_file.ktrc"), std::runtime_error);
}

TEST_CASE("csv trace has the documented header") {
  Trace trace(2);
  for (auto& r : trace) {
    r.q = r.qdot = r.u_nom = r.u = r.u_safe = Eigen::VectorXd::Zero(2);
  }
  const std::string path = "header_test.csv";
  write_trace_csv(path, trace);
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "t,q0,q1,qdot0,qdot1,k_e,h,u_nom0,u_nom1,u0,u1,u_safe0,u_safe1,"
        "p_safe,p_ext,p_nom,intervened");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 2);
  std::remove(path.c_str());
}

TEST_CASE("sim config validation") {
  SimConfig sim;
  sim.dt_control = 0.0;
  CHECK_THROWS_AS(sim.validate(), std::invalid_argument);
  sim.dt_control = 1e-3;
  sim.physics_substeps = 0;
  CHECK_THROWS_AS(sim.validate(), std::invalid_argument);
}
