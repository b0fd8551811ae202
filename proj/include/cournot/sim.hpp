#pragma once

// Fixed-step RK4 integration with scheduled market parameter changes and
// trajectory recording.

#include "cournot/control.hpp"
#include "cournot/market.hpp"
#include "cournot/network.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace cournot {

// Replaces whole coefficient vectors of the market.
struct MarketPatch {
  std::optional<Vector> cost_quad;
  std::optional<Vector> cost_lin;
  std::optional<Vector> utility_quad;
  std::optional<Vector> utility_lin;

  MarketSpec apply(const MarketSpec& market) const;
  bool empty() const { return !cost_quad && !cost_lin && !utility_quad && !utility_lin; }
  bool operator==(const MarketPatch& other) const;
};

struct MarketEvent {
  double time = 0.0;
  MarketPatch patch;

  bool operator==(const MarketEvent&) const = default;
};

struct SimConfig {
  double t_end = 300.0;
  double dt = 1e-3;
  int record_every = 10;
  std::vector<MarketEvent> events;

  // dt > 0, record_every >= 1, event times inside [0, t_end].
  void validate() const;
  bool operator==(const SimConfig&) const = default;
};

// Applies every event of `config` in order.
MarketSpec market_after_events(const MarketSpec& initial, const SimConfig& config);

class Dynamics {
 public:
  virtual ~Dynamics() = default;

  virtual void derivative(const Vector& state, Vector& rate) const = 0;
  // Market change at an event time. Models without a market reject events.
  virtual void apply(const MarketPatch& patch);
  // Signals recorded next to each state sample.
  virtual Vector derived(const Vector& /*state*/) const { return {}; }
};

struct Sample {
  double time = 0.0;
  int epoch = 0;  // number of events applied so far
  Vector state;
  Vector derived;
};

struct Trajectory {
  std::vector<Sample> samples;

  const Sample& back() const { return samples.back(); }
  std::size_t size() const { return samples.size(); }
};

// Classical RK4 with step `config.dt`. Steps are shortened to land exactly on
// event times and t_end. A sample is taken every `record_every` steps, at each
// event time (carrying the post-event derived signals) and at t_end. Throws
// NumericalError on a non-finite state.
Trajectory integrate(Dynamics& model, const Vector& initial, const SimConfig& config);

using PlainRhs = std::function<Vector(const Vector&)>;
Trajectory integrate(const PlainRhs& rhs, const Vector& initial, const SimConfig& config);

// The final sample when every state component varied by at most `tol` over
// the trailing `window` seconds, otherwise nullopt.
std::optional<Sample> steady_state_of(const Trajectory& traj, double window, double tol);

// First time after which every state component stays within `tol` of its
// final value.
double settling_time(const Trajectory& traj, double tol);

// Fourth-order central difference of derived[column] at sample k. Needs
// samples k-2..k+2 equally spaced and inside one epoch, otherwise nullopt.
std::optional<double> derived_rate(const Trajectory& traj, std::size_t k, Index column);

// Network + pricing controller + market with events. State layout:
//   zeta (n-1) | y (n) | p (n) [| chi (m_c) | slope_hat (n)]
// the bracketed part only with the online estimator.
class ClosedLoopModel final : public Dynamics {
 public:
  struct Signals {
    Vector production;
    Vector demand;
    double lyapunov = 0.0;
    double imbalance = 0.0;  // 1^T P_g - 1^T P_d
  };

  // Throws InfeasibleError when the reference equilibrium for `market` does
  // not exist.
  ClosedLoopModel(NetworkSpec net, ControllerSpec ctrl, MarketSpec market, bool adaptive);

  Index size() const noexcept { return net_.size(); }
  Index dimension() const noexcept;
  bool adaptive() const noexcept { return adaptive_; }

  Vector pack(const SimState& state) const;
  SimState unpack(const Vector& packed) const;

  void derivative(const Vector& state, Vector& rate) const override;
  void apply(const MarketPatch& patch) override;
  Vector derived(const Vector& state) const override;
  Signals signals(const Vector& derived) const;

  // Closed-loop equilibrium of the active market used to centre the
  // Lyapunov function. With the estimator it is the one reached at
  // slope_hat = alpha*.
  const ClosedLoopEquilibrium& reference() const noexcept { return reference_; }
  const MarketSpec& market() const noexcept { return market_; }
  const NetworkSpec& network() const noexcept { return net_; }
  const ControllerSpec& controller() const noexcept { return ctrl_; }
  const ReducedCoordinates& reduction() const noexcept { return red_; }
  ClosedLoop loop() const { return {net_, red_, reference_ctrl_}; }

  // Steady state of the current market, estimator included.
  SimState equilibrium_state() const;

 private:
  void refresh_reference();

  NetworkSpec net_;
  ReducedCoordinates red_;
  ControllerSpec ctrl_;
  ControllerSpec reference_ctrl_;
  MarketSpec market_;
  bool adaptive_;
  ClosedLoopEquilibrium reference_;
};

}  // namespace cournot
