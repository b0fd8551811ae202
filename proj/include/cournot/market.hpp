#pragma once

// Linear-quadratic Cournot market: consumer demand, the aggregated inverse
// demand curve, the closed-form Cournot-Nash equilibrium for an affine price
// function and a grid-search best-response oracle.

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace cournot {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Exact element-wise equality that tolerates differing sizes.
inline bool same_values(const Vector& a, const Vector& b) { return a.size() == b.size() && a == b; }

// One producer and one consumer per node. Producer i pays
//   C(P) = 1/2 cost_quad[i] P^2 + cost_lin[i] P,
// consumer j enjoys
//   U(P) = -1/2 utility_quad[j] P^2 + utility_lin[j] P.
// Q_g, Q_d, b_d strictly positive; b_g nonnegative.
class MarketSpec {
 public:
  MarketSpec(Vector cost_quad, Vector cost_lin, Vector utility_quad, Vector utility_lin);

  Index size() const noexcept { return cost_quad_.size(); }

  const Vector& cost_quad() const noexcept { return cost_quad_; }
  const Vector& cost_lin() const noexcept { return cost_lin_; }
  const Vector& utility_quad() const noexcept { return utility_quad_; }
  const Vector& utility_lin() const noexcept { return utility_lin_; }

  double max_cost_lin() const { return cost_lin_.maxCoeff(); }
  double min_utility_lin() const { return utility_lin_.minCoeff(); }

  bool operator==(const MarketSpec& other) const;

 private:
  Vector cost_quad_;
  Vector cost_lin_;
  Vector utility_quad_;
  Vector utility_lin_;
};

// Price as seen by producers: p(P_g) = intercept - slope * sum(P_g).
struct AffinePrice {
  double slope = 0.0;
  double intercept = 0.0;

  double operator()(double total_production) const { return intercept - slope * total_production; }
};

// The slope/intercept obtained by inverting the aggregate interior demand;
// with it the Cournot-Nash production clears the market.
AffinePrice market_clearing_price(const MarketSpec& market);

// Price-taking consumer best responses, max(0, (b_d - p) / Q_d) entry-wise.
Vector demand_response(const MarketSpec& market, double price);

// Continuous, strictly decreasing u(q) with sum(demand_response(u(q))) == q.
class PiecewiseInverseDemand {
 public:
  struct Segment {
    double slope;      // < 0
    double intercept;  // price at q = 0 when extended
  };

  explicit PiecewiseInverseDemand(const MarketSpec& market);

  double operator()(double total_demand) const;

  // Interior breakpoints q_1 < q_2 < ... (one fewer than segments).
  const std::vector<double>& breakpoints() const noexcept { return breakpoints_; }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  double price_at_zero() const noexcept { return segments_.front().intercept; }

 private:
  std::vector<double> breakpoints_;
  std::vector<Segment> segments_;
};

PiecewiseInverseDemand inverse_demand(const MarketSpec& market);

// Both inequalities of the positivity condition, written as bounds on the
// total equilibrium production, and the equivalent price window
// max(b_g) < p* < min(b_d).
struct InteriorVerdict {
  double lower_bound = 0.0;       // (beta - min b_d) / alpha
  double total_production = 0.0;  // 1^T P_g*
  double upper_bound = 0.0;       // (beta - max b_g) / alpha
  double max_cost_lin = 0.0;
  double min_utility_lin = 0.0;
  double price = 0.0;             // beta - alpha 1^T P_g*

  bool consumers_enter() const { return lower_bound < total_production; }
  bool producers_enter() const { return total_production < upper_bound; }
  bool price_in_window() const { return max_cost_lin < price && price < min_utility_lin; }
  bool interior() const { return consumers_enter() && producers_enter(); }
};

struct NashTriple {
  Vector production;  // P_g*
  Vector demand;      // P_d*
  double price = 0.0; // p*
  AffinePrice price_fn;
  InteriorVerdict verdict;
  bool interior = false;
  bool balanced = false;
  double balance_residual = 0.0;  // 1^T P_g* - 1^T P_d*
};

inline constexpr double kBalanceTolerance = 1e-9;

// Closed-form equilibrium of the producers' game under `price_fn`. The
// linear system (alpha (I + 11^T) + Q_g) P = beta 1 - b_g is solved through
// the rank-one update identity in O(n). Non-interior inputs are reported via
// `interior == false`; the returned vectors are still the closed-form values.
NashTriple nash_closed_form(const MarketSpec& market, const AffinePrice& price_fn);

InteriorVerdict check_interior_conditions(const MarketSpec& market, const AffinePrice& price_fn);

double producer_profit(const MarketSpec& market, const AffinePrice& price_fn, Index producer,
                       const Vector& production);

// Analytic best response of `producer` to the others' output `others`
// (size n - 1, ordered as the remaining producers).
double best_response(const MarketSpec& market, const AffinePrice& price_fn, Index producer,
                     const Vector& others);

struct GridBestResponse {
  double argmax = 0.0;
  double step = 0.0;   // grid spacing actually used
  double upper = 0.0;  // largest grid point considered
};

inline constexpr double kDefaultRelativeGridStep = 1e-4;

// Brute-force maximization of producer_profit over {0, h, 2h, ..., P_max},
// P_max = (beta - b_g[i]) / alpha, h = relative_step * P_max.
GridBestResponse best_response_oracle(const MarketSpec& market, const AffinePrice& price_fn,
                                      Index producer, const Vector& others,
                                      double relative_step = kDefaultRelativeGridStep);

// The other producers' outputs as seen by `producer`.
Vector others_of(const Vector& production, Index producer);

}  // namespace cournot
