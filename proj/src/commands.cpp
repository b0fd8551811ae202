#include "cournot/commands.hpp"

#include "cournot/errors.hpp"
#include "plot.hpp"

#include <spdlog/spdlog.h>

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

namespace cournot {

using nlohmann::json;

namespace {

json to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

double max_abs_diff(const Vector& a, const Vector& b) { return (a - b).lpNorm<Eigen::Infinity>(); }

struct OracleAudit {
  double max_deviation = 0.0;  // in units of the grid step
  double max_step = 0.0;
  bool agrees = true;
  json per_producer = json::array();
};

OracleAudit audit_oracle(const MarketSpec& market, const NashTriple& nash) {
  OracleAudit audit;
  for (Index i = 0; i < market.size(); ++i) {
    const auto grid = best_response_oracle(market, nash.price_fn, i, others_of(nash.production, i));
    const double dev = std::abs(grid.argmax - nash.production[i]);
    const bool ok = dev <= grid.step;
    audit.agrees = audit.agrees && ok;
    audit.max_step = std::max(audit.max_step, grid.step);
    audit.max_deviation = std::max(audit.max_deviation, grid.step > 0.0 ? dev / grid.step : dev);
    audit.per_producer.push_back({{"producer", i + 1}, {"grid_argmax", grid.argmax}, {"grid_step", grid.step},
                                  {"equilibrium", nash.production[i]}, {"within_one_step", ok}});
  }
  return audit;
}

json nash_json(const MarketSpec& market, const NashTriple& nash) {
  const auto& v = nash.verdict;
  json r;
  r["nodes"] = market.size();
  r["alpha_star"] = nash.price_fn.slope;
  r["beta_star"] = nash.price_fn.intercept;
  r["P_g"] = to_json(nash.production);
  r["P_d"] = to_json(nash.demand);
  r["p"] = nash.price;
  r["conditions"] = {{"lower_bound", v.lower_bound},
                     {"total_production", v.total_production},
                     {"upper_bound", v.upper_bound},
                     {"max_b_g", v.max_cost_lin},
                     {"min_b_d", v.min_utility_lin},
                     {"consumers_enter", v.consumers_enter()},
                     {"producers_enter", v.producers_enter()},
                     {"price_in_window", v.price_in_window()}};
  r["interior"] = nash.interior;
  r["balanced"] = nash.balanced;
  r["balance_residual"] = nash.balance_residual;
  return r;
}

// Equilibrium the closed loop is centred on in each market epoch.
std::vector<ClosedLoopEquilibrium> epoch_references(const Scenario& scenario) {
  ClosedLoopModel model = scenario.model();
  std::vector<ClosedLoopEquilibrium> refs{model.reference()};
  for (const auto& e : scenario.sim.events) {
    model.apply(e.patch);
    refs.push_back(model.reference());
  }
  return refs;
}

json check(const std::string& name, bool passed, double value, double threshold, const std::string& detail = {}) {
  json c{{"name", name}, {"passed", passed}, {"value", value}, {"threshold", threshold}};
  if (!detail.empty()) c["detail"] = detail;
  return c;
}

std::string format_number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return std::string(buf, ptr);
}

}  // namespace

CommandResult run_nash(const Scenario& scenario) {
  const MarketSpec market = scenario.final_market();
  const auto price_fn = market_clearing_price(market);
  const NashTriple nash = nash_closed_form(market, price_fn);

  CommandResult result;
  result.report = nash_json(market, nash);
  result.report["scenario"] = scenario.name;
  result.report["market_epoch"] = scenario.sim.events.size();
  if (market.size() == 1) {
    result.report["formula"] = {
        {"P_g", "(beta - b_g) / (2 alpha + Q_g)"}, {"p", "beta - alpha P_g"}, {"P_d", "(b_d - p) / Q_d"}};
  }
  if (nash.interior) {
    const auto audit = audit_oracle(market, nash);
    result.report["oracle"] = {{"agrees", audit.agrees},
                               {"max_deviation_in_steps", audit.max_deviation},
                               {"grid_step", audit.max_step},
                               {"producers", audit.per_producer}};
  } else {
    result.report["oracle"] = {{"skipped", "closed form has non-positive entries"}};
    result.outcome = Outcome::Infeasible;
  }
  return result;
}

CommandResult run_equilibrium(const Scenario& scenario) {
  CommandResult result;
  json& r = result.report;
  r["scenario"] = scenario.name;
  r["gain_mode"] = to_string(scenario.controller.mode);
  try {
    ClosedLoopModel model = scenario.model();
    json epochs = json::array();
    auto describe = [&](double start) {
      const auto& eq = model.reference();
      const ClosedLoop loop = model.loop();
      epochs.push_back({{"start_time", start},
                        {"gains", to_json(loop.ctrl.gains())},
                        {"q", eq.price},
                        {"P_g", to_json(eq.production)},
                        {"P_d", to_json(eq.demand)},
                        {"zeta", to_json(eq.zeta)},
                        {"edge_differences", to_json(edge_differences(model.reduction(), eq.zeta))},
                        {"residual", eq.residual},
                        {"imbalance", eq.production.sum() - eq.demand.sum()}});
    };
    describe(0.0);
    for (const auto& e : scenario.sim.events) {
      model.apply(e.patch);
      describe(e.time);
    }
    r["epochs"] = epochs;

    const MarketSpec market = model.market();
    const NashTriple nash = nash_closed_form(market, market_clearing_price(market));
    const auto& eq = model.reference();
    r["nash_gap"] = {{"price", std::abs(eq.price - nash.price)},
                     {"P_g", max_abs_diff(eq.production, nash.production)},
                     {"P_d", max_abs_diff(eq.demand, nash.demand)}};

    const auto open = solve_open_loop_equilibrium(model.network(), model.reduction(), nash.production, nash.demand,
                                                  Vector::Zero(market.size() - 1));
    r["open_loop"] = {{"injections", "nash"},
                      {"y_star", open.y_star},
                      {"zeta", to_json(open.zeta)},
                      {"residual", open.residual},
                      {"method", open.method == OpenLoopEquilibrium::Method::Newton ? "newton" : "tree"}};
  } catch (const InfeasibleError& e) {
    result.outcome = Outcome::Infeasible;
    r["error"] = std::string("no steady state with every edge difference inside the potential domain: ") + e.what();
  }
  return result;
}

std::string trajectory_csv_header(Index nodes, bool adaptive) {
  std::string h = "t";
  const char* groups[] = {"y", "p", "Pg", "Pd"};
  for (const char* g : groups) {
    for (Index i = 1; i <= nodes; ++i) h += "," + std::string(g) + "_" + std::to_string(i);
  }
  h += ",V";
  if (adaptive) {
    for (Index i = 1; i <= nodes; ++i) h += ",alphahat_" + std::to_string(i);
  }
  return h;
}

void write_trajectory_csv(const ClosedLoopModel& model, const Trajectory& traj, std::ostream& out) {
  const Index n = model.size();
  out << trajectory_csv_header(n, model.adaptive()) << '\n';
  std::string line;
  for (const auto& s : traj.samples) {
    const SimState st = model.unpack(s.state);
    const auto sig = model.signals(s.derived);
    line = format_number(s.time);
    auto put = [&](const Vector& v) {
      for (Index i = 0; i < v.size(); ++i) {
        line += ',';
        line += format_number(v[i]);
      }
    };
    put(st.y);
    put(st.p);
    put(sig.production);
    put(sig.demand);
    line += ',';
    line += format_number(sig.lyapunov);
    if (model.adaptive()) put(st.estimator->slope_hat);
    out << line << '\n';
  }
}

namespace {

struct SimulationRun {
  ClosedLoopModel model;
  Trajectory traj;
};

SimulationRun simulate(const Scenario& scenario) {
  ClosedLoopModel model = scenario.model();
  const Vector x0 = model.pack(scenario.initial_state(model));
  spdlog::info("simulating {} s with dt = {}", scenario.sim.t_end, scenario.sim.dt);
  Trajectory traj = integrate(model, x0, scenario.sim);
  return {std::move(model), std::move(traj)};
}

json settled_json(const ClosedLoopModel& model, const Trajectory& traj, const SimulateOptions& options) {
  const auto& last = traj.back();
  const SimState st = model.unpack(last.state);
  const auto sig = model.signals(last.derived);
  const double window = std::min(options.settle_window, 0.5 * last.time);
  const auto steady = window > 0.0 ? steady_state_of(traj, window, options.settle_tol) : std::nullopt;
  json s;
  s["t_end"] = last.time;
  s["samples"] = traj.size();
  s["settled"] = steady.has_value();
  s["settle_window"] = window;
  s["settle_tol"] = options.settle_tol;
  s["settling_time"] = settling_time(traj, options.settle_tol);
  s["final"] = {{"y", to_json(st.y)},
                {"p", to_json(st.p)},
                {"P_g", to_json(sig.production)},
                {"P_d", to_json(sig.demand)},
                {"V", sig.lyapunov},
                {"imbalance", sig.imbalance},
                {"max_abs_y", st.y.lpNorm<Eigen::Infinity>()},
                {"price_spread", st.p.maxCoeff() - st.p.minCoeff()}};
  if (st.estimator) s["final"]["alpha_hat"] = to_json(st.estimator->slope_hat);
  const auto& eq = model.reference();
  s["predicted"] = {{"q", eq.price}, {"P_g", to_json(eq.production)}, {"P_d", to_json(eq.demand)}};
  return s;
}

void write_plots(const ClosedLoopModel& model, const Trajectory& traj, const std::filesystem::path& dir) {
  const Index n = model.size();
  std::vector<double> times;
  times.reserve(traj.size());
  for (const auto& s : traj.samples) times.push_back(s.time);
  auto series_of = [&](const char* label, auto&& pick) {
    std::vector<detail::Series> out(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) out[i].label = std::string(label) + "_" + std::to_string(i + 1);
    for (const auto& s : traj.samples) {
      const Vector v = pick(s);
      for (Index i = 0; i < n; ++i) out[i].values.push_back(v[i]);
    }
    return out;
  };
  detail::write_line_plot(dir / "y.svg", "velocity deviation y", times,
                          series_of("y", [&](const Sample& s) { return model.unpack(s.state).y; }));
  detail::write_line_plot(dir / "p.svg", "local prices p", times,
                          series_of("p", [&](const Sample& s) { return model.unpack(s.state).p; }));
  detail::write_line_plot(dir / "Pg.svg", "production P_g", times,
                          series_of("Pg", [&](const Sample& s) { return model.signals(s.derived).production; }));
  detail::write_line_plot(dir / "Pd.svg", "demand P_d", times,
                          series_of("Pd", [&](const Sample& s) { return model.signals(s.derived).demand; }));
  if (model.adaptive()) {
    detail::write_line_plot(dir / "alphahat.svg", "slope estimates", times, series_of("alphahat", [&](const Sample& s) {
                              return model.unpack(s.state).estimator->slope_hat;
                            }));
  }
}

}  // namespace

CommandResult run_simulate(const Scenario& scenario, const std::filesystem::path& out_dir,
                           const SimulateOptions& options) {
  CommandResult result;
  SimulationRun run = simulate(scenario);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());

  {
    std::ofstream csv(out_dir / "trajectory.csv");
    if (!csv) throw IoError("cannot write " + (out_dir / "trajectory.csv").string());
    write_trajectory_csv(run.model, run.traj, csv);
    if (!csv) throw IoError("failed writing trajectory.csv");
  }
  result.report = settled_json(run.model, run.traj, options);
  result.report["scenario"] = scenario.name;
  result.report["gain_mode"] = to_string(scenario.controller.mode);
  {
    std::ofstream js(out_dir / "summary.json");
    if (!js) throw IoError("cannot write " + (out_dir / "summary.json").string());
    js << result.report.dump(2) << '\n';
  }
  if (options.plots) write_plots(run.model, run.traj, out_dir);
  return result;
}

// ---------------------------------------------------------------------------
// verify

namespace {

constexpr double kEquilibriumAgreement = 1e-9;
constexpr double kNewtonResidual = 1e-10;
constexpr double kLyapunovSlack = 1e-8;
constexpr double kRateRelTol = 1e-2;
constexpr double kRateFloor = 1e-6;
constexpr double kFrequencyTol = 1e-4;
constexpr double kConsensusTol = 1e-6;
constexpr double kBalanceRelTol = 1e-4;
constexpr double kTrackingTol = 1e-3;
constexpr double kEstimatorTol = 1e-4;
constexpr int kUniquenessStarts = 10;

}  // namespace

CommandResult run_verify(const Scenario& scenario) {
  CommandResult result;
  json checks = json::array();
  json& r = result.report;
  r["scenario"] = scenario.name;
  r["gain_mode"] = to_string(scenario.controller.mode);

  // Market side.
  const MarketSpec market = scenario.final_market();
  const NashTriple nash = nash_closed_form(market, market_clearing_price(market));
  checks.push_back(check("nash_interior", nash.interior, nash.verdict.total_production, nash.verdict.upper_bound,
                         "lower bound " + format_number(nash.verdict.lower_bound)));
  checks.push_back(check("nash_balance", nash.balanced, std::abs(nash.balance_residual),
                         kBalanceTolerance * (1.0 + std::abs(nash.production.sum()))));
  if (nash.interior) {
    const auto audit = audit_oracle(market, nash);
    checks.push_back(check("nash_oracle", audit.agrees, audit.max_deviation, 1.0, "deviation in grid steps"));
  }

  try {
    // Closed-loop equilibrium of the final market and its uniqueness.
    ClosedLoopModel final_model = scenario.model();
    for (const auto& e : scenario.sim.events) final_model.apply(e.patch);
    const auto& eq = final_model.reference();
    const ClosedLoop loop = final_model.loop();
    checks.push_back(check("equilibrium_residual", eq.residual <= kNewtonResidual, eq.residual, kNewtonResidual));

    std::mt19937_64 rng(20240917);
    std::uniform_real_distribution<double> angle(-std::numbers::pi / 4.0, std::numbers::pi / 4.0);
    double spread = 0.0;
    for (int s = 0; s < kUniquenessStarts; ++s) {
      Vector start(market.size() - 1);
      for (Index i = 0; i < start.size(); ++i) start[i] = angle(rng);
      const auto other = closed_loop_equilibrium(loop, market, start);
      spread = std::max(spread, max_abs_diff(other.zeta, eq.zeta));
    }
    checks.push_back(check("equilibrium_uniqueness", spread <= kEquilibriumAgreement, spread, kEquilibriumAgreement,
                           std::to_string(kUniquenessStarts) + " Newton starts"));

    const double gap = std::max({std::abs(eq.price - nash.price), max_abs_diff(eq.production, nash.production),
                                 max_abs_diff(eq.demand, nash.demand)});
    if (scenario.controller.mode == GainMode::Explicit) {
      checks.push_back(check("optimality", true, gap, kEquilibriumAgreement,
                             "non-optimal by design: equilibrium price " + format_number(eq.price) +
                                 " vs Cournot-Nash " + format_number(nash.price)));
    } else {
      checks.push_back(check("optimality", gap <= kEquilibriumAgreement, gap, kEquilibriumAgreement,
                             "closed-loop equilibrium vs Cournot-Nash triple"));
    }

    // Dynamic side.
    const auto refs = epoch_references(scenario);
    const SimulationRun run = simulate(scenario);
    const auto& samples = run.traj.samples;
    const bool adaptive = run.model.adaptive();

    if (!adaptive) {
      double max_increase = -std::numeric_limits<double>::infinity();
      double max_rel_err = 0.0;
      int compared = 0;
      for (std::size_t k = 1; k < samples.size(); ++k) {
        if (samples[k].epoch != samples[k - 1].epoch) continue;
        const Index vi = 2 * run.model.size();
        max_increase = std::max(max_increase, samples[k].derived[vi] - samples[k - 1].derived[vi]);
        const auto fd = derived_rate(run.traj, k, vi);
        if (!fd) continue;
        const double rate = lyapunov_rate(loop, run.model.unpack(samples[k].state), refs[samples[k].epoch]);
        if (std::abs(rate) <= kRateFloor) continue;
        max_rel_err = std::max(max_rel_err, std::abs(*fd - rate) / std::abs(rate));
        ++compared;
      }
      checks.push_back(check("lyapunov_monotone", max_increase <= kLyapunovSlack, max_increase, kLyapunovSlack));
      checks.push_back(check("lyapunov_rate", max_rel_err <= kRateRelTol, max_rel_err, kRateRelTol,
                             std::to_string(compared) + " samples compared"));
    }

    const SimState last = run.model.unpack(run.traj.back().state);
    const auto sig = run.model.signals(run.traj.back().derived);
    const double max_y = last.y.lpNorm<Eigen::Infinity>();
    const double price_spread = last.p.maxCoeff() - last.p.minCoeff();
    checks.push_back(check("frequency_regulation", max_y <= kFrequencyTol, max_y, kFrequencyTol));
    checks.push_back(check("price_consensus", price_spread <= kConsensusTol, price_spread, kConsensusTol));
    const double balance_bound = kBalanceRelTol * sig.production.cwiseAbs().sum();
    checks.push_back(check("supply_demand_balance", std::abs(sig.imbalance) <= balance_bound, std::abs(sig.imbalance),
                           balance_bound));
    const auto& ref = run.model.reference();
    const double tracking = std::max({max_abs_diff(last.p, ref.p), max_abs_diff(sig.production, ref.production),
                                      max_abs_diff(sig.demand, ref.demand)});
    checks.push_back(check("converged_to_equilibrium", tracking <= kTrackingTol, tracking, kTrackingTol));
    if (adaptive) {
      const double est_err =
          (last.estimator->slope_hat.array() - market_clearing_price(run.model.market()).slope).abs().maxCoeff();
      checks.push_back(check("estimator_converged", est_err <= kEstimatorTol, est_err, kEstimatorTol));
    }
  } catch (const InfeasibleError& e) {
    checks.push_back(check("network_feasibility", false, 0.0, 0.0, e.what()));
    r["checks"] = checks;
    r["passed"] = false;
    r["error"] = std::string("no steady state with every edge difference inside the potential domain: ") + e.what();
    result.outcome = Outcome::Infeasible;
    return result;
  }

  bool all = true;
  for (const auto& c : checks) all = all && c["passed"].get<bool>();
  r["checks"] = checks;
  r["passed"] = all;
  result.outcome = all ? Outcome::Ok : Outcome::VerificationFailed;
  return result;
}

}  // namespace cournot
