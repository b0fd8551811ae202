#include "cournot/control.hpp"

#include "cournot/errors.hpp"

#include <cmath>
#include <string>

namespace cournot {

namespace {

void require_positive(const Vector& v, const char* name) {
  for (Index i = 0; i < v.size(); ++i) {
    if (!(v[i] > 0.0) || !std::isfinite(v[i])) {
      throw InvalidArgument(std::string(name) + "[" + std::to_string(i + 1) + "] must be strictly positive");
    }
  }
}

}  // namespace

ControllerSpec::ControllerSpec(Vector tau, Vector gains, std::vector<CommEdge> edges)
    : tau_(std::move(tau)), gains_(std::move(gains)), edges_(std::move(edges)) {
  const Index n = tau_.size();
  if (n < 1) throw InvalidArgument("controller needs at least one node");
  if (gains_.size() != n) throw InvalidArgument("one gain per node required");
  require_positive(tau_, "tau");
  require_positive(gains_, "k");
  std::vector<std::pair<Index, Index>> pairs;
  Vector rho(static_cast<Index>(edges_.size()));
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const auto& e = edges_[k];
    if (e.a < 0 || e.a >= n || e.b < 0 || e.b >= n || e.a == e.b) {
      throw InvalidArgument("invalid communication edge " + std::to_string(e.a + 1) + "-" + std::to_string(e.b + 1));
    }
    if (!(e.rho > 0.0) || !(e.kappa > 0.0)) throw InvalidArgument("communication weights must be positive");
    pairs.emplace_back(e.a, e.b);
    rho[static_cast<Index>(k)] = e.rho;
  }
  if (!is_connected(n, pairs)) throw InvalidArgument("communication graph is not connected");
  incidence_ = incidence_matrix(n, pairs);
  laplacian_ = incidence_ * rho.asDiagonal() * incidence_.transpose();
}

Vector optimal_gain(const MarketSpec& market) {
  return (market.cost_quad().array() + market_clearing_price(market).slope).inverse();
}

Vector estimated_gain(const MarketSpec& market, const Vector& slope_estimate) {
  return (market.cost_quad() + slope_estimate).cwiseInverse();
}

Vector controlled_production(const Vector& gains, const MarketSpec& market, const Vector& price) {
  return gains.cwiseProduct(price - market.cost_lin());
}

Vector controlled_demand(const MarketSpec& market, const Vector& price) {
  return ((market.utility_lin() - price).array() / market.utility_quad().array()).matrix();
}

Vector controller_rhs(const ControllerSpec& ctrl, const Vector& gains, const MarketSpec& market, const Vector& price,
                      const Vector& velocity) {
  const Vector response = gains + market.utility_quad().cwiseInverse();
  return ((-ctrl.laplacian() * price - response.cwiseProduct(velocity)).array() / ctrl.tau().array()).matrix();
}

namespace {

SimState loop_rhs(const ClosedLoop& loop, const MarketSpec& market, const SimState& state, const Vector& gains) {
  const Vector production = controlled_production(gains, market, state.p);
  const Vector demand = controlled_demand(market, state.p);
  auto net_rate = network_rhs(loop.net, loop.red, state.zeta, state.y, production, demand);
  SimState rate;
  rate.zeta = std::move(net_rate.zeta);
  rate.y = std::move(net_rate.y);
  rate.p = controller_rhs(loop.ctrl, gains, market, state.p, state.y);
  return rate;
}

}  // namespace

SimState closed_loop_rhs(const ClosedLoop& loop, const MarketSpec& market, const SimState& state) {
  return loop_rhs(loop, market, state, loop.ctrl.gains());
}

ClosedLoopEquilibrium closed_loop_equilibrium(const ClosedLoop& loop, const MarketSpec& market,
                                              const Vector& initial_zeta, const NewtonOptions& options) {
  const Vector& k = loop.ctrl.gains();
  const Vector inv_qd = market.utility_quad().cwiseInverse();
  const double price = (k.dot(market.cost_lin()) + inv_qd.dot(market.utility_lin())) / (k.sum() + inv_qd.sum());

  ClosedLoopEquilibrium eq;
  eq.price = price;
  const Index n = market.size();
  eq.p = Vector::Constant(n, price);
  eq.y = Vector::Zero(n);
  eq.production = controlled_production(k, market, eq.p);
  eq.demand = controlled_demand(market, eq.p);
  // Supply and demand balance here, so the damping projector drops out.
  const Vector target = loop.red.left_inverse * (eq.production - eq.demand);
  const auto balance = solve_potential_balance(loop.net, loop.red, target, initial_zeta, options);
  eq.zeta = balance.zeta;
  eq.residual = balance.residual;
  return eq;
}

double lyapunov_value(const ClosedLoop& loop, const SimState& state, const ClosedLoopEquilibrium& eq) {
  const Vector dy = state.y - eq.y;
  const Vector dp = state.p - eq.p;
  const Vector dz = state.zeta - eq.zeta;
  const double kinetic = 0.5 * dy.dot(loop.net.inertia().cwiseProduct(dy));
  const double pricing = 0.5 * dp.dot(loop.ctrl.tau().cwiseProduct(dp));
  const double bregman = potential_energy(loop.net, loop.red, state.zeta) -
                         potential_energy(loop.net, loop.red, eq.zeta) -
                         dz.dot(potential_gradient(loop.net, loop.red, eq.zeta));
  return kinetic + pricing + bregman;
}

double lyapunov_rate(const ClosedLoop& loop, const SimState& state, const ClosedLoopEquilibrium& eq) {
  const Vector dy = state.y - eq.y;
  const Vector dp = state.p - eq.p;
  return -dy.dot(loop.net.damping().cwiseProduct(dy)) - dp.dot(loop.ctrl.laplacian() * dp);
}

EstimatorState estimator_rhs(const ControllerSpec& ctrl, const MarketSpec& market, const EstimatorState& est) {
  const Index n = ctrl.size();
  Vector kappa(static_cast<Index>(ctrl.edges().size()));
  for (std::size_t k = 0; k < ctrl.edges().size(); ++k) kappa[static_cast<Index>(k)] = ctrl.edges()[k].kappa;
  EstimatorState rate;
  rate.chi = ctrl.incidence().transpose() * est.slope_hat;
  rate.slope_hat = Vector::Constant(n, 1.0 / static_cast<double>(n)) -
                   est.slope_hat.cwiseQuotient(market.utility_quad()) -
                   ctrl.incidence() * kappa.cwiseProduct(est.chi);
  return rate;
}

EstimatorState estimator_equilibrium(const ControllerSpec& ctrl, const MarketSpec& market) {
  const Index n = ctrl.size();
  const double slope = market_clearing_price(market).slope;
  EstimatorState est;
  est.slope_hat = Vector::Constant(n, slope);
  Vector kappa(static_cast<Index>(ctrl.edges().size()));
  for (std::size_t k = 0; k < ctrl.edges().size(); ++k) kappa[static_cast<Index>(k)] = ctrl.edges()[k].kappa;
  const Vector rhs = Vector::Constant(n, 1.0 / static_cast<double>(n)) - market.utility_quad().cwiseInverse() * slope;
  if (kappa.size() == 0) {
    est.chi = Vector(0);
  } else {
    const Matrix coupling = ctrl.incidence() * kappa.asDiagonal();
    est.chi = coupling.completeOrthogonalDecomposition().solve(rhs);
  }
  return est;
}

SimState adaptive_closed_loop_rhs(const ClosedLoop& loop, const MarketSpec& market, const SimState& state) {
  if (!state.estimator) throw InvalidArgument("adaptive closed loop needs an estimator state");
  const Vector gains = estimated_gain(market, state.estimator->slope_hat);
  SimState rate = loop_rhs(loop, market, state, gains);
  rate.estimator = estimator_rhs(loop.ctrl, market, *state.estimator);
  return rate;
}

}  // namespace cournot
