#pragma once

// Scenario-level commands behind the CLI and the C API. Each returns a JSON
// report; the outcome says how the command ended.

#include "cournot/scenario.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>

namespace cournot {

enum class Outcome {
  Ok,
  Infeasible,          // no interior Nash equilibrium, or no network equilibrium
  VerificationFailed,  // at least one verify check failed
};

struct CommandResult {
  Outcome outcome = Outcome::Ok;
  nlohmann::json report;
};

// Cournot-Nash triple of the market in force after all events, with the
// market-clearing price slope/intercept, the positivity conditions, the
// balance residual and the grid best-response cross-check.
CommandResult run_nash(const Scenario& scenario);

// Closed-loop equilibrium for every market epoch, plus the uncontrolled
// network's equilibrium under the final Nash injections.
CommandResult run_equilibrium(const Scenario& scenario);

struct SimulateOptions {
  bool plots = false;
  double settle_window = 10.0;  // seconds
  double settle_tol = 1e-5;
};

// Writes trajectory.csv, summary.json and optionally SVG plots into `out_dir`
// (created if missing). Returns the summary.
CommandResult run_simulate(const Scenario& scenario, const std::filesystem::path& out_dir,
                           const SimulateOptions& options = {});

// Simulates the scenario and runs the equilibrium, stability and optimality
// checks on it.
CommandResult run_verify(const Scenario& scenario);

// CSV header: t,y_1..y_n,p_1..p_n,Pg_1..Pg_n,Pd_1..Pd_n,V[,alphahat_1..alphahat_n]
std::string trajectory_csv_header(Index nodes, bool adaptive);
void write_trajectory_csv(const ClosedLoopModel& model, const Trajectory& traj, std::ostream& out);

}  // namespace cournot
