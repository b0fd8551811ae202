#pragma once

// Scenario files: one YAML document describing market, network, controller,
// integration settings and scheduled market changes.

#include "cournot/control.hpp"
#include "cournot/market.hpp"
#include "cournot/network.hpp"
#include "cournot/sim.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace cournot {

enum class GainMode { Optimal, Explicit, Adaptive };

const char* to_string(GainMode mode);

struct ControllerConfig {
  Vector tau;
  GainMode mode = GainMode::Optimal;
  Vector gains;  // used with GainMode::Explicit only
  std::vector<CommEdge> edges;

  bool operator==(const ControllerConfig& other) const;
};

// Either the steady state of the initial market, or explicit vectors
// (missing entries start at zero).
struct InitialCondition {
  bool at_equilibrium = true;
  Vector zeta;
  Vector y;
  Vector p;
  Vector chi;
  Vector slope_hat;

  bool operator==(const InitialCondition& other) const;
};

struct Scenario {
  std::string name;
  MarketSpec market;
  NetworkSpec network;
  ControllerConfig controller;
  SimConfig sim;
  InitialCondition initial;

  // Controller with gains resolved against the initial market. Optimal
  // gains are tuned once, at t = 0; with the estimator they only seed the
  // reference equilibrium.
  ControllerSpec controller_spec() const;
  ClosedLoopModel model() const;
  SimState initial_state(const ClosedLoopModel& model) const;
  MarketSpec final_market() const { return market_after_events(market, sim); }

  bool operator==(const Scenario& other) const;
};

// Throws ParseError with a 1-based line number on malformed input or specs
// that violate their invariants.
Scenario parse_scenario(std::string_view text);
Scenario load_scenario(const std::filesystem::path& path);
std::string serialize_scenario(const Scenario& scenario);

}  // namespace cournot
