#pragma once

// Distributed pricing controller. Each node keeps a local price p_i, sets its
// production from it, lets consumers respond to it and exchanges price
// differences with its neighbours on a communication graph:
//
//   tau_i dp_i/dt = -k_i y_i - y_i / Q_d,i - sum_j rho_ij (p_i - p_j)
//   P_g,i = k_i (p_i - b_g,i),    P_d,i = (b_d,i - p_i) / Q_d,i
//
// An optional estimator learns the market-clearing slope online.

#include "cournot/market.hpp"
#include "cournot/network.hpp"

#include <optional>
#include <vector>

namespace cournot {

struct CommEdge {
  Index a = 0;
  Index b = 0;
  double rho = 1.0;    // consensus weight
  double kappa = 1.0;  // estimator coupling weight

  bool operator==(const CommEdge&) const = default;
};

class ControllerSpec {
 public:
  // Throws InvalidArgument unless tau and gains are positive, edges are valid
  // and the communication graph is connected.
  ControllerSpec(Vector tau, Vector gains, std::vector<CommEdge> edges);

  Index size() const noexcept { return tau_.size(); }
  const Vector& tau() const noexcept { return tau_; }
  const Vector& gains() const noexcept { return gains_; }
  const std::vector<CommEdge>& edges() const noexcept { return edges_; }
  const Matrix& laplacian() const noexcept { return laplacian_; }
  const Matrix& incidence() const noexcept { return incidence_; }  // R_c, n x m_c

  ControllerSpec with_gains(Vector gains) const { return {tau_, std::move(gains), edges_}; }

 private:
  Vector tau_;
  Vector gains_;
  std::vector<CommEdge> edges_;
  Matrix incidence_;
  Matrix laplacian_;
};

// k_i = 1 / (alpha* + Q_g,i)
Vector optimal_gain(const MarketSpec& market);

// k_i = 1 / (estimate_i + Q_g,i)
Vector estimated_gain(const MarketSpec& market, const Vector& slope_estimate);

Vector controlled_production(const Vector& gains, const MarketSpec& market, const Vector& price);
Vector controlled_demand(const MarketSpec& market, const Vector& price);

Vector controller_rhs(const ControllerSpec& ctrl, const Vector& gains, const MarketSpec& market, const Vector& price,
                      const Vector& velocity);
inline Vector controller_rhs(const ControllerSpec& ctrl, const MarketSpec& market, const Vector& price,
                             const Vector& velocity) {
  return controller_rhs(ctrl, ctrl.gains(), market, price, velocity);
}

struct EstimatorState {
  Vector chi;         // one entry per communication edge
  Vector slope_hat;   // per-node estimate of alpha*
};

struct SimState {
  Vector zeta;
  Vector y;
  Vector p;
  std::optional<EstimatorState> estimator;
};

// Everything needed to evaluate the closed loop.
struct ClosedLoop {
  const NetworkSpec& net;
  const ReducedCoordinates& red;
  const ControllerSpec& ctrl;
};

SimState closed_loop_rhs(const ClosedLoop& loop, const MarketSpec& market, const SimState& state);

struct ClosedLoopEquilibrium {
  Vector zeta;
  Vector y;  // zero
  Vector p;  // all entries equal to `price`
  double price = 0.0;
  Vector production;
  Vector demand;
  double residual = 0.0;  // Newton residual of the potential balance
};

// Unique equilibrium of the closed loop with the controller's fixed gains.
// Throws InfeasibleError when the potential balance has no solution.
ClosedLoopEquilibrium closed_loop_equilibrium(const ClosedLoop& loop, const MarketSpec& market,
                                              const Vector& initial_zeta, const NewtonOptions& options = {});
inline ClosedLoopEquilibrium closed_loop_equilibrium(const ClosedLoop& loop, const MarketSpec& market) {
  return closed_loop_equilibrium(loop, market, Vector::Zero(loop.net.size() - 1));
}

// Bregman-type storage function centred at `eq`:
//   1/2 |y - y_eq|_M^2 + 1/2 |p - p_eq|_T^2 + H(zeta) - H(zeta_eq) - (zeta - zeta_eq)^T grad H(zeta_eq)
double lyapunov_value(const ClosedLoop& loop, const SimState& state, const ClosedLoopEquilibrium& eq);

// Its time derivative along the closed loop with fixed gains:
//   -(y - y_eq)^T D (y - y_eq) - (p - p_eq)^T L (p - p_eq)
double lyapunov_rate(const ClosedLoop& loop, const SimState& state, const ClosedLoopEquilibrium& eq);

EstimatorState estimator_rhs(const ControllerSpec& ctrl, const MarketSpec& market, const EstimatorState& est);

// alpha_hat = 1 alpha*, with the minimum-norm chi balancing the node equations.
EstimatorState estimator_equilibrium(const ControllerSpec& ctrl, const MarketSpec& market);

// Closed loop with gains driven by the estimator state; `state.estimator`
// must be set.
SimState adaptive_closed_loop_rhs(const ClosedLoop& loop, const MarketSpec& market, const SimState& state);

}  // namespace cournot
