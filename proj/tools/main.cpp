#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "kecbf/plot.hpp"
#include "kecbf/scenarios.hpp"
#include "kecbf/verify.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunOpts {
  std::string scenario;
  std::vector<double> gammas; // empty => scenario default
  std::optional<double> k_max;
  std::string mode;           // "", "agnostic", "aware"
  std::string filter = "on";
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  std::string model_file;
  std::string config_file;
  bool no_traces = false;
};

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw std::runtime_error("parse error in " + path + ": " + e.what());
  }
}

std::string sanitize(std::string label) {
  for (char& c : label)
    if (c == '=' || c == ' ' || c == '/') c = '_';
  return label;
}

bool verdict(const std::string& name, bool pass, const std::string& detail) {
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << name << ": " << detail << "\n";
  return pass;
}

bool report_blowups(const std::vector<kecbf::ScenarioRun>& runs) {
  bool ok = true;
  for (const auto& r : runs)
    if (r.result.blew_up) {
      std::cout << "[FAIL] simulation_finite (" << r.label << "): blew up at tick "
                << r.result.failed_tick << "; partial trace written\n";
      ok = false;
    }
  return ok;
}

double max_p_safe_recomputed(const kecbf::RobotModel& model, const kecbf::Trace& trace) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& r : trace)
    worst = std::max(worst, r.qdot.dot(model.actuation * r.u_safe));
  return worst;
}

bool minimally_invasive(const kecbf::Trace& trace) {
  for (const auto& r : trace)
    if (!r.intervened && ((r.u.array() != r.u_nom.array()).any())) return false;
  return true;
}

void write_run_outputs(const kecbf::RobotModel& model, const std::string& scenario,
                       const std::vector<kecbf::ScenarioRun>& runs, const RunOpts& opts,
                       bool plot_ee_y) {
  const fs::path dir(opts.out_dir);

  std::ofstream summary(dir / (scenario + "_summary.csv"));
  summary << "label,gamma,filter,mode,max_k_e_J,min_p_safe_W,max_p_safe_W,"
             "energy_audit_residual_J\n";

  std::vector<kecbf::PlotSeries> ke_series, psafe_series, ee_series;
  for (const auto& r : runs) {
    if (!opts.no_traces)
      kecbf::write_trace_csv(dir / (scenario + "_" + sanitize(r.label) + ".csv"), r.result.trace);

    double min_ps = 0.0, max_ps = 0.0;
    kecbf::PlotSeries ke{r.label, {}, {}}, ps{r.label, {}, {}}, ee{r.label, {}, {}};
    for (const auto& rec : r.result.trace) {
      min_ps = std::min(min_ps, rec.p_safe);
      max_ps = std::max(max_ps, rec.p_safe);
      ke.x.push_back(rec.t);
      ke.y.push_back(rec.k_e);
      ps.x.push_back(rec.t);
      ps.y.push_back(rec.p_safe);
      if (plot_ee_y) {
        ee.x.push_back(rec.t);
        ee.y.push_back(kecbf::ee_position(model, rec.q).y());
      }
    }
    ke_series.push_back(std::move(ke));
    psafe_series.push_back(std::move(ps));
    if (plot_ee_y) ee_series.push_back(std::move(ee));

    summary << r.label << ',' << r.gamma << ',' << (r.filter_on ? "on" : "off") << ','
            << (r.mode == kecbf::InteractionMode::aware ? "aware" : "agnostic") << ','
            << kecbf::max_kinetic_energy(r.result.trace) << ',' << min_ps << ',' << max_ps
            << ',' << r.result.energy_audit_residual << '\n';
  }

  kecbf::write_svg_plot(dir / (scenario + "_kinetic_energy.svg"),
                        scenario + ": total kinetic energy", "t [s]", "K_e [J]", ke_series);
  kecbf::write_svg_plot(dir / (scenario + "_filter_power.svg"),
                        scenario + ": safety filter power", "t [s]", "p_safe [W]",
                        psafe_series);
  if (plot_ee_y)
    kecbf::write_svg_plot(dir / (scenario + "_ee_y.svg"),
                          scenario + ": end-effector y-position", "t [s]", "y [m]",
                          ee_series);
}

// Checks shared by the step-response and contact-loss scenarios.
bool filtered_family_verdicts(const kecbf::RobotModel& model,
                              const std::vector<kecbf::ScenarioRun>& runs, double k_max,
                              double off_factor) {
  bool ok = true;
  double worst_ps = -std::numeric_limits<double>::infinity();
  bool invasive_ok = true;
  for (const auto& r : runs) {
    worst_ps = std::max(worst_ps, max_p_safe_recomputed(model, r.result.trace));
    invasive_ok = invasive_ok && minimally_invasive(r.result.trace);
  }
  ok &= verdict("filter_power_nonpositive", worst_ps <= 1e-9,
                "max qdot^T B u_safe = " + std::to_string(worst_ps) + " W (tol 1e-9)");
  ok &= verdict("minimally_invasive", invasive_ok, "u == u_nom whenever not intervened");

  std::vector<std::pair<double, double>> by_gamma; // (gamma, max K_e)
  for (const auto& r : runs) {
    const double mk = kecbf::max_kinetic_energy(r.result.trace);
    if (!r.filter_on) {
      ok &= verdict("unfiltered_exceeds_limit", mk > off_factor * k_max,
                    "max K_e = " + std::to_string(mk) + " J > " +
                        std::to_string(off_factor * k_max) + " J");
      continue;
    }
    by_gamma.emplace_back(r.gamma, mk);
    if (r.gamma <= 10.0)
      ok &= verdict("invariance_" + sanitize(r.label), mk <= k_max * 1.02,
                    "max K_e = " + std::to_string(mk) + " J <= " +
                        std::to_string(k_max * 1.02) + " J");
  }
  if (by_gamma.size() >= 2) {
    std::sort(by_gamma.begin(), by_gamma.end());
    bool mono = true;
    for (std::size_t i = 1; i < by_gamma.size(); ++i)
      mono = mono && by_gamma[i].second >= by_gamma[i - 1].second - 1e-12;
    ok &= verdict("conservatism_ordering", mono, "max K_e non-decreasing in gamma");
  }
  return ok;
}

int cmd_run(const RunOpts& opts) {
  const kecbf::RobotModel model =
      opts.model_file.empty() ? kecbf::default_model() : kecbf::load_robot_model(opts.model_file);
  json overrides = json::object();
  if (!opts.config_file.empty()) overrides = load_json_file(opts.config_file);

  std::error_code ec;
  fs::create_directories(opts.out_dir, ec);
  if (ec || !fs::is_directory(opts.out_dir))
    throw std::runtime_error("cannot create output directory: " + opts.out_dir);

  const bool filter_on = opts.filter != "off";
  bool ok = true;

  if (opts.scenario == "exp1" || opts.scenario == "exp2") {
    // Precedence: built-in defaults < config file < command-line flags.
    auto configure = [&](auto& p) {
      p.include_unfiltered = overrides.value("include_unfiltered", true);
      p.stiffness = overrides.value("stiffness", p.stiffness);
      p.damping = overrides.value("damping", p.damping);
      p.duration = overrides.value("duration", p.duration);
      p.k_max = overrides.value("k_max", p.k_max);
      if (overrides.contains("gammas"))
        p.gammas = overrides.at("gammas").get<std::vector<double>>();
      if (!opts.gammas.empty()) p.gammas = opts.gammas;
      if (opts.k_max) p.k_max = *opts.k_max;
      if (opts.seed) p.seed = *opts.seed;
      if (!filter_on) {
        p.gammas.clear();
        p.include_unfiltered = true;
      }
    };

    std::vector<kecbf::ScenarioRun> runs;
    double k_max = 1.0;
    if (opts.scenario == "exp1") {
      kecbf::StepResponseParams p;
      configure(p);
      p.step_offset = overrides.value("step_offset", p.step_offset);
      p.t_step = overrides.value("t_step", p.t_step);
      p.t_return = overrides.value("t_return", p.t_return);
      k_max = p.k_max;
      runs = kecbf::step_response(model, p);
    } else {
      kecbf::ContactLossParams p;
      configure(p);
      p.lift = overrides.value("lift", p.lift);
      p.string_stiffness = overrides.value("string_stiffness", p.string_stiffness);
      p.anchor_drop = overrides.value("anchor_drop", p.anchor_drop);
      p.t_release = overrides.value("t_release", p.t_release);
      k_max = p.k_max;
      std::cout << "stored spring energy at release: " << p.stored_energy() << " J\n";
      runs = kecbf::contact_loss(model, p);
    }
    write_run_outputs(model, opts.scenario, runs, opts, opts.scenario == "exp1");
    ok = report_blowups(runs);
    ok &= filtered_family_verdicts(model, runs, k_max, opts.scenario == "exp1" ? 1.5 : 1.0);
  } else if (opts.scenario == "exp3") {
    kecbf::ExternalInteractionParams p;
    p.gamma = overrides.value("gamma", p.gamma);
    p.k_max = overrides.value("k_max", p.k_max);
    p.push_peak = overrides.value("push_peak", p.push_peak);
    p.push_duration = overrides.value("push_duration", p.push_duration);
    p.push_start = overrides.value("push_start", p.push_start);
    p.duration = overrides.value("duration", p.duration);
    if (opts.k_max) p.k_max = *opts.k_max;
    if (opts.seed) p.seed = *opts.seed;
    if (!opts.gammas.empty()) p.gamma = opts.gammas.front();

    auto runs = kecbf::external_interaction(model, p);
    if (!opts.mode.empty()) {
      std::erase_if(runs, [&](const kecbf::ScenarioRun& r) {
        return r.filter_on && r.label != opts.mode;
      });
    }
    write_run_outputs(model, opts.scenario, runs, opts, false);
    ok = report_blowups(runs);

    std::optional<double> err_off, err_agn, err_aware;
    double p_max_agn = 0;
    for (const auto& r : runs) {
      const double err =
          std::max(0.0, kecbf::max_kinetic_energy(r.result.trace) - p.k_max);
      if (!r.filter_on) err_off = err;
      else if (r.mode == kecbf::InteractionMode::agnostic) {
        err_agn = err;
        p_max_agn = kecbf::max_external_power(r.result.trace);
      } else {
        err_aware = err;
      }
    }
    if (err_agn && err_aware && err_off) {
      ok &= verdict("aware_improves", *err_aware <= 0.3 * *err_agn,
                    "aware error " + std::to_string(*err_aware) + " J <= 0.3 * agnostic " +
                        std::to_string(*err_agn) + " J");
      ok &= verdict("agnostic_error_bound",
                    *err_agn <= p_max_agn / p.gamma + 0.02 * p.k_max,
                    "error " + std::to_string(*err_agn) + " J <= max P_ext/gamma + 2% K_max = " +
                        std::to_string(p_max_agn / p.gamma + 0.02 * p.k_max) + " J");
      ok &= verdict("unfiltered_worst", *err_off > *err_agn && *err_off > *err_aware,
                    "unfiltered error " + std::to_string(*err_off) + " J exceeds both");
    }
    double worst_ps = -std::numeric_limits<double>::infinity();
    for (const auto& r : runs)
      worst_ps = std::max(worst_ps, max_p_safe_recomputed(model, r.result.trace));
    ok &= verdict("filter_power_nonpositive", worst_ps <= 1e-9,
                  "max qdot^T B u_safe = " + std::to_string(worst_ps) + " W");
  } else if (opts.scenario == "exp4") {
    kecbf::ConstantPowerParams p;
    if (!opts.gammas.empty()) p.gammas = opts.gammas;
    if (opts.k_max) p.k_max = *opts.k_max;
    if (opts.seed) p.seed = *opts.seed;
    if (overrides.contains("gammas") && opts.gammas.empty())
      p.gammas = overrides.at("gammas").get<std::vector<double>>();
    if (overrides.contains("p_ext_grid"))
      p.p_ext_grid = overrides.at("p_ext_grid").get<std::vector<double>>();
    p.duration = overrides.value("duration", p.duration);
    p.v_min = overrides.value("v_min", p.v_min);
    p.window = overrides.value("window", p.window);
    p.tol_frac = overrides.value("tol_frac", p.tol_frac);

    const auto sweep = kecbf::constant_power_injection(model, p);

    const fs::path dir(opts.out_dir);
    std::ofstream summary(dir / "exp4_summary.csv");
    summary << "gamma,p_ext_W,k_e_ss_J,fit_slope\n";
    std::vector<kecbf::PlotSeries> series;
    for (const auto& [gamma, fit] : sweep.fits) {
      kecbf::PlotSeries pts{"gamma=" + std::to_string(int(gamma)), {}, {}, true, false};
      for (const auto& pt : sweep.points) {
        if (pt.gamma != gamma) continue;
        if (!pt.steady) {
          std::cout << "warning: no steady state for gamma=" << gamma
                    << " P_ext=" << pt.p_ext << ", excluded from fit\n";
          continue;
        }
        summary << gamma << ',' << pt.p_ext << ',' << pt.steady->k_e_ss << ','
                << fit.slope << '\n';
        pts.x.push_back(pt.p_ext);
        pts.y.push_back(pt.steady->k_e_ss - p.k_max);
      }
      kecbf::PlotSeries line{"fit 1/" + std::to_string(int(gamma)), {}, {}, false, true};
      for (double x : {p.p_ext_grid.front(), p.p_ext_grid.back()}) {
        line.x.push_back(x);
        line.y.push_back(fit.slope * x + fit.intercept);
      }
      series.push_back(std::move(pts));
      series.push_back(std::move(line));
    }
    kecbf::write_svg_plot(dir / "exp4_steady_state.svg",
                          "exp4: steady-state kinetic energy error vs external power",
                          "P_ext [W]", "K_e,ss - K_max [J]", series);
    if (!opts.no_traces)
      for (const auto& pt : sweep.points)
        kecbf::write_trace_binary(dir / ("exp4_g" + std::to_string(int(pt.gamma)) + "_p" +
                                         std::to_string(int(pt.p_ext)) + ".ktrc"),
                                  pt.result.trace);

    for (const auto& pt : sweep.points)
      if (pt.result.blew_up) {
        std::cout << "[FAIL] simulation_finite (gamma=" << pt.gamma << ", P=" << pt.p_ext
                  << "): blew up at tick " << pt.result.failed_tick << "\n";
        ok = false;
      }
    ok &= verdict("fit_count", sweep.fits.size() == p.gammas.size(),
                  std::to_string(sweep.fits.size()) + " of " +
                      std::to_string(p.gammas.size()) + " gammas fitted");
    for (const auto& [gamma, fit] : sweep.fits)
      ok &= verdict("slope_gamma" + std::to_string(int(gamma)),
                    std::abs(fit.slope * gamma - 1.0) <= 0.1,
                    "slope*gamma = " + std::to_string(fit.slope * gamma));
    bool pointwise = true;
    for (const auto& pt : sweep.points)
      if (pt.steady)
        pointwise = pointwise && std::abs((pt.steady->k_e_ss - p.k_max) -
                                          pt.p_ext / pt.gamma) <= 0.05 * pt.p_ext / pt.gamma;
    ok &= verdict("steady_state_law", pointwise, "K_e - K_max = P_ext/gamma within 5%");
  } else {
    throw std::runtime_error("unknown scenario: " + opts.scenario +
                             " (expected exp1|exp2|exp3|exp4)");
  }

  std::cout << (ok ? "all checks passed" : "some checks FAILED") << "\n";
  return ok ? 0 : 1;
}

int cmd_verify(const std::string& which, const std::string& model_file) {
  if (!model_file.empty()) {
    const kecbf::RobotModel m = kecbf::load_robot_model(model_file); // throws on bad config
    std::cout << "model config " << model_file << " validated (" << m.n_links()
              << " links)\n";
  }

  std::vector<kecbf::CheckResult> results;
  if (which == "all") results = kecbf::verify_all();
  else if (which == "dynamics") results = kecbf::verify_dynamics();
  else if (which == "qp") results = kecbf::verify_qp();
  else if (which == "filter") results = kecbf::verify_filter();
  else if (which == "simulator") results = kecbf::verify_simulator();
  else throw std::runtime_error("unknown verify suite: " + which);

  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "[PASS] " : "[FAIL] ") << r.name << ": worst = " << r.worst
              << " (tolerance " << r.tolerance << ")\n";
    ok = ok && r.passed;
  }
  std::cout << (ok ? "all suites passed" : "some suites FAILED") << "\n";
  return ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kinetic-energy safety filter: scenario runner and self-checks"};
  app.require_subcommand(1);

  RunOpts opts;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario and write traces, summaries, plots");
  run_cmd->add_option("scenario", opts.scenario, "exp1|exp2|exp3|exp4")->required();
  run_cmd->add_option("--gamma", opts.gammas, "class-K gains to sweep")->delimiter(',');
  double kmax_opt = 0.0;
  auto* kopt = run_cmd->add_option("--kmax", kmax_opt, "kinetic energy limit [J]");
  run_cmd->add_option("--mode", opts.mode, "agnostic|aware (exp3 case selector)")
      ->check(CLI::IsMember({"agnostic", "aware"}));
  run_cmd->add_option("--filter", opts.filter, "on|off")
      ->check(CLI::IsMember({"on", "off"}));
  std::uint64_t seed_opt = 0;
  auto* sopt = run_cmd->add_option("--seed", seed_opt, "simulation seed");
  run_cmd->add_option("--out", opts.out_dir, "output directory (default: out)");
  run_cmd->add_option("--model", opts.model_file, "robot model JSON config");
  run_cmd->add_option("--config", opts.config_file, "scenario JSON overrides");
  run_cmd->add_flag("--no-traces", opts.no_traces, "skip writing per-run trace files");

  std::string verify_which = "all";
  std::string verify_model;
  auto* verify_cmd = app.add_subcommand("verify", "Run the oracle self-check suites");
  verify_cmd->add_option("suite", verify_which, "all|dynamics|qp|filter|simulator");
  verify_cmd->add_option("--model", verify_model, "validate a robot model JSON config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) {
      if (*kopt) opts.k_max = kmax_opt;
      if (*sopt) opts.seed = seed_opt;
      return cmd_run(opts);
    }
    return cmd_verify(verify_which, verify_model);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
