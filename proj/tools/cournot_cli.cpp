// cournot: command-line front end over the C API.

#include "cournot/cournot.h"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <iostream>
#include <memory>
#include <string>

using nlohmann::json;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kParse = 2, kInfeasible = 3, kVerification = 4 };

int exit_code(cournot_status s) {
  switch (s) {
    case COURNOT_OK:
      return kOk;
    case COURNOT_ERR_PARSE:
      return kParse;
    case COURNOT_ERR_INFEASIBLE:
      return kInfeasible;
    case COURNOT_ERR_VERIFICATION:
      return kVerification;
    default:
      return kOther;
  }
}

struct ScenarioDeleter {
  void operator()(cournot_scenario* s) const { cournot_scenario_destroy(s); }
};
using ScenarioPtr = std::unique_ptr<cournot_scenario, ScenarioDeleter>;

std::string vec(const json& arr) {
  std::string out = "[";
  char buf[32];
  for (std::size_t i = 0; i < arr.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%s%.6f", i ? ", " : "", arr[i].get<double>());
    out += buf;
  }
  return out + "]";
}

std::string num(double v, const char* fmt = "%.6g") {
  char buf[32];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

void print_nash(const json& r) {
  std::cout << "scenario " << r.value("scenario", "") << " (market after " << r["market_epoch"] << " events)\n";
  std::cout << "alpha* = " << num(r["alpha_star"], "%.6f") << "  beta* = " << num(r["beta_star"], "%.6f") << '\n';
  std::cout << "P_g = " << vec(r["P_g"]) << '\n';
  std::cout << "P_d = " << vec(r["P_d"]) << '\n';
  std::cout << "p   = " << num(r["p"], "%.6f") << '\n';
  const auto& c = r["conditions"];
  std::cout << "conditions: " << num(c["lower_bound"]) << " < sum P_g = " << num(c["total_production"]) << " < "
            << num(c["upper_bound"]) << "  -> " << (r["interior"].get<bool>() ? "interior" : "NOT interior") << '\n';
  std::cout << "balance residual = " << num(r["balance_residual"]) << (r["balanced"].get<bool>() ? "" : " (FAIL)")
            << '\n';
  if (r.contains("formula")) {
    for (const auto& [k, v] : r["formula"].items()) std::cout << "  " << k << " = " << v.get<std::string>() << '\n';
  }
  const auto& o = r["oracle"];
  if (o.contains("skipped")) {
    std::cout << "grid best-response check skipped: " << o["skipped"].get<std::string>() << '\n';
  } else {
    std::cout << "grid best-response check: " << (o["agrees"].get<bool>() ? "agrees" : "DISAGREES")
              << " (max deviation " << num(o["max_deviation_in_steps"], "%.3f") << " steps)\n";
  }
}

void print_equilibrium(const json& r) {
  std::cout << "scenario " << r.value("scenario", "") << ", gains " << r.value("gain_mode", "") << '\n';
  if (r.contains("error")) {
    std::cout << "infeasible: " << r["error"].get<std::string>() << '\n';
    return;
  }
  for (const auto& e : r["epochs"]) {
    std::cout << "from t = " << num(e["start_time"]) << ":\n";
    std::cout << "  q    = " << num(e["q"], "%.6f") << '\n';
    std::cout << "  P_g  = " << vec(e["P_g"]) << '\n';
    std::cout << "  P_d  = " << vec(e["P_d"]) << '\n';
    std::cout << "  zeta = " << vec(e["zeta"]) << "  (residual " << num(e["residual"]) << ")\n";
  }
  const auto& g = r["nash_gap"];
  std::cout << "gap to Cournot-Nash: price " << num(g["price"]) << ", P_g " << num(g["P_g"]) << ", P_d "
            << num(g["P_d"]) << '\n';
  const auto& o = r["open_loop"];
  std::cout << "uncontrolled network at Nash injections: y* = " << num(o["y_star"]) << ", zeta = " << vec(o["zeta"])
            << " (" << o["method"].get<std::string>() << ")\n";
}

void print_simulate(const json& r, const std::string& dir) {
  const auto& f = r["final"];
  std::cout << "wrote " << dir << "/trajectory.csv (" << r["samples"] << " samples) and summary.json\n";
  std::cout << "t_end = " << num(r["t_end"]) << ", settled: " << (r["settled"].get<bool>() ? "yes" : "no")
            << ", settling time " << num(r["settling_time"]) << " s\n";
  std::cout << "final p   = " << vec(f["p"]) << '\n';
  std::cout << "final P_g = " << vec(f["P_g"]) << '\n';
  std::cout << "final P_d = " << vec(f["P_d"]) << '\n';
  std::cout << "max |y| = " << num(f["max_abs_y"]) << ", imbalance = " << num(f["imbalance"]) << ", V = "
            << num(f["V"]) << '\n';
  if (f.contains("alpha_hat")) std::cout << "alpha_hat = " << vec(f["alpha_hat"]) << '\n';
}

void print_verify(const json& r) {
  if (r.contains("error")) std::cout << r["error"].get<std::string>() << '\n';
  for (const auto& c : r["checks"]) {
    std::cout << (c["passed"].get<bool>() ? "PASS " : "FAIL ") << c["name"].get<std::string>() << ": "
              << num(c["value"]) << " (threshold " << num(c["threshold"]) << ")";
    if (c.contains("detail")) std::cout << "  " << c["detail"].get<std::string>();
    std::cout << '\n';
  }
  std::cout << (r.value("passed", false) ? "all checks passed" : "verification FAILED") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cournot market pricing on swing-equation networks"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Print the raw JSON report");

  std::string file;
  std::string out_dir;
  bool plots = false;
  auto* nash = app.add_subcommand("nash", "Closed-form Cournot-Nash equilibrium");
  nash->add_option("scenario", file, "Scenario file")->required();
  auto* eq = app.add_subcommand("equilibrium", "Closed-loop and network equilibria");
  eq->add_option("scenario", file, "Scenario file")->required();
  auto* sim = app.add_subcommand("simulate", "Integrate the closed loop and write the trajectory");
  sim->add_option("scenario", file, "Scenario file")->required();
  sim->add_option("-o,--out", out_dir, "Output directory")->required();
  sim->add_flag("--plots", plots, "Also write SVG plots");
  auto* verify = app.add_subcommand("verify", "Simulate and check equilibrium, stability and optimality");
  verify->add_option("scenario", file, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kOther;
  }

  cournot_scenario* raw = nullptr;
  cournot_status status = cournot_scenario_load(file.c_str(), &raw);
  if (status != COURNOT_OK) {
    std::cerr << "error: " << file << ": " << cournot_last_error() << '\n';
    return exit_code(status);
  }
  ScenarioPtr scenario(raw);

  char* report = nullptr;
  if (*nash) {
    status = cournot_scenario_nash(scenario.get(), &report);
  } else if (*eq) {
    status = cournot_scenario_equilibrium(scenario.get(), &report);
  } else if (*sim) {
    status = cournot_scenario_simulate(scenario.get(), out_dir.c_str(), plots ? 1 : 0, &report);
  } else {
    status = cournot_scenario_verify(scenario.get(), &report);
  }

  if (!report) {
    std::cerr << "error: " << cournot_last_error() << '\n';
    return exit_code(status);
  }
  const json r = json::parse(report);
  cournot_string_free(report);

  if (as_json) {
    std::cout << r.dump(2) << '\n';
  } else if (*nash) {
    print_nash(r);
  } else if (*eq) {
    print_equilibrium(r);
  } else if (*sim) {
    print_simulate(r, out_dir);
  } else {
    print_verify(r);
  }
  if (status == COURNOT_ERR_INFEASIBLE && !as_json && !r.contains("error")) std::cerr << "infeasible: " << cournot_last_error() << '\n';
  return exit_code(status);
}
