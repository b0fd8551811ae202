#include "cournot/market.hpp"

#include "cournot/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cournot {

namespace {

void require_sign(const Vector& v, const char* name, Index n, bool allow_zero) {
  if (v.size() != n) {
    throw InvalidArgument(std::string(name) + ": expected " + std::to_string(n) + " entries, got " +
                          std::to_string(v.size()));
  }
  for (Index i = 0; i < n; ++i) {
    if (!std::isfinite(v[i]) || v[i] < 0.0 || (!allow_zero && v[i] == 0.0)) {
      throw InvalidArgument(std::string(name) + "[" + std::to_string(i + 1) + "] must be finite and " +
                            (allow_zero ? "nonnegative" : "strictly positive"));
    }
  }
}

void require_valid(const AffinePrice& price_fn) {
  if (!(price_fn.slope > 0.0) || !std::isfinite(price_fn.slope) || !std::isfinite(price_fn.intercept)) {
    throw InvalidArgument("price slope must be finite and strictly positive");
  }
}

void require_producer(const MarketSpec& market, Index producer) {
  if (producer < 0 || producer >= market.size()) {
    throw InvalidArgument("producer index " + std::to_string(producer) + " out of range");
  }
}

// Sherman-Morrison pieces for (D + alpha 11^T) with D = diag(Q_g) + alpha I.
struct RankOneSolve {
  Vector d_inv_rhs;
  Vector d_inv_ones;
  double scale;  // alpha / (1 + alpha 1^T D^-1 1)
};

RankOneSolve rank_one_parts(const MarketSpec& market, const AffinePrice& price_fn) {
  const double alpha = price_fn.slope;
  const Vector diag = market.cost_quad().array() + alpha;
  RankOneSolve parts;
  parts.d_inv_rhs = (price_fn.intercept - market.cost_lin().array()) / diag.array();
  parts.d_inv_ones = diag.cwiseInverse();
  parts.scale = alpha / (1.0 + alpha * parts.d_inv_ones.sum());
  return parts;
}

}  // namespace

MarketSpec::MarketSpec(Vector cost_quad, Vector cost_lin, Vector utility_quad, Vector utility_lin)
    : cost_quad_(std::move(cost_quad)),
      cost_lin_(std::move(cost_lin)),
      utility_quad_(std::move(utility_quad)),
      utility_lin_(std::move(utility_lin)) {
  const Index n = cost_quad_.size();
  if (n < 1) throw InvalidArgument("market needs at least one node");
  require_sign(cost_quad_, "Q_g", n, false);
  require_sign(cost_lin_, "b_g", n, true);
  require_sign(utility_quad_, "Q_d", n, false);
  require_sign(utility_lin_, "b_d", n, false);
}

bool MarketSpec::operator==(const MarketSpec& other) const {
  return same_values(cost_quad_, other.cost_quad_) && same_values(cost_lin_, other.cost_lin_) &&
         same_values(utility_quad_, other.utility_quad_) && same_values(utility_lin_, other.utility_lin_);
}

AffinePrice market_clearing_price(const MarketSpec& market) {
  const double inv_sum = market.utility_quad().cwiseInverse().sum();
  const double weighted = (market.utility_lin().array() / market.utility_quad().array()).sum();
  return {1.0 / inv_sum, weighted / inv_sum};
}

Vector demand_response(const MarketSpec& market, double price) {
  // Strict inequality: a consumer whose marginal utility at zero equals the
  // price stays out.
  return ((market.utility_lin().array() - price) / market.utility_quad().array()).max(0.0);
}

PiecewiseInverseDemand::PiecewiseInverseDemand(const MarketSpec& market) {
  const Index n = market.size();
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) {
    return market.utility_lin()[a] > market.utility_lin()[b];
  });

  // Walk consumers by decreasing marginal utility at zero; equal b_d values
  // join the active set together so each breakpoint is distinct.
  double inv_q_sum = 0.0;  // sum of 1/Q_d over active consumers
  double b_over_q = 0.0;   // sum of b_d/Q_d over active consumers
  std::size_t k = 0;
  while (k < order.size()) {
    const double level = market.utility_lin()[order[k]];
    while (k < order.size() && market.utility_lin()[order[k]] == level) {
      inv_q_sum += 1.0 / market.utility_quad()[order[k]];
      b_over_q += market.utility_lin()[order[k]] / market.utility_quad()[order[k]];
      ++k;
    }
    segments_.push_back({-1.0 / inv_q_sum, b_over_q / inv_q_sum});
    if (k < order.size()) {
      // Total demand at the price where the next consumer enters.
      const double next = market.utility_lin()[order[k]];
      breakpoints_.push_back(b_over_q - next * inv_q_sum);
    }
  }
}

double PiecewiseInverseDemand::operator()(double total_demand) const {
  if (total_demand < 0.0) throw InvalidArgument("inverse demand is defined for q >= 0");
  const auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), total_demand);
  const auto& seg = segments_[static_cast<std::size_t>(it - breakpoints_.begin())];
  return seg.intercept + seg.slope * total_demand;
}

PiecewiseInverseDemand inverse_demand(const MarketSpec& market) { return PiecewiseInverseDemand(market); }

InteriorVerdict check_interior_conditions(const MarketSpec& market, const AffinePrice& price_fn) {
  require_valid(price_fn);
  const auto parts = rank_one_parts(market, price_fn);
  const double alpha = price_fn.slope;
  InteriorVerdict v;
  // 1^T (D + alpha 11^T)^-1 r = 1^T D^-1 r / (1 + alpha 1^T D^-1 1)
  v.total_production = parts.d_inv_rhs.sum() / (1.0 + alpha * parts.d_inv_ones.sum());
  v.max_cost_lin = market.max_cost_lin();
  v.min_utility_lin = market.min_utility_lin();
  v.lower_bound = (price_fn.intercept - v.min_utility_lin) / alpha;
  v.upper_bound = (price_fn.intercept - v.max_cost_lin) / alpha;
  v.price = price_fn(v.total_production);
  return v;
}

NashTriple nash_closed_form(const MarketSpec& market, const AffinePrice& price_fn) {
  require_valid(price_fn);
  const auto parts = rank_one_parts(market, price_fn);
  NashTriple t;
  t.price_fn = price_fn;
  t.production = parts.d_inv_rhs - (parts.scale * parts.d_inv_rhs.sum()) * parts.d_inv_ones;
  t.price = price_fn(t.production.sum());
  t.demand = (market.utility_lin().array() - t.price) / market.utility_quad().array();
  t.verdict = check_interior_conditions(market, price_fn);
  t.interior = t.verdict.interior();
  const double supplied = t.production.sum();
  t.balance_residual = supplied - t.demand.sum();
  t.balanced = std::abs(t.balance_residual) <= kBalanceTolerance * (1.0 + std::abs(supplied));
  return t;
}

double producer_profit(const MarketSpec& market, const AffinePrice& price_fn, Index producer,
                       const Vector& production) {
  require_producer(market, producer);
  if (production.size() != market.size()) throw InvalidArgument("production vector has wrong size");
  const double own = production[producer];
  return price_fn(production.sum()) * own - 0.5 * market.cost_quad()[producer] * own * own -
         market.cost_lin()[producer] * own;
}

Vector others_of(const Vector& production, Index producer) {
  Vector out(production.size() - 1);
  for (Index j = 0, k = 0; j < production.size(); ++j) {
    if (j != producer) out[k++] = production[j];
  }
  return out;
}

double best_response(const MarketSpec& market, const AffinePrice& price_fn, Index producer,
                     const Vector& others) {
  require_producer(market, producer);
  require_valid(price_fn);
  if (others.size() != market.size() - 1) throw InvalidArgument("others vector has wrong size");
  const double active = (others.array() > 0.0).select(others, 0.0).sum();
  const double gamma = price_fn.intercept - market.cost_lin()[producer] - price_fn.slope * active;
  if (gamma <= 0.0) return 0.0;
  return gamma / (2.0 * price_fn.slope + market.cost_quad()[producer]);
}

GridBestResponse best_response_oracle(const MarketSpec& market, const AffinePrice& price_fn,
                                      Index producer, const Vector& others, double relative_step) {
  require_producer(market, producer);
  require_valid(price_fn);
  if (!(relative_step > 0.0) || relative_step > 1.0) {
    throw InvalidArgument("relative grid step must lie in (0, 1]");
  }
  if (others.size() != market.size() - 1) throw InvalidArgument("others vector has wrong size");
  if ((others.array() < 0.0).any()) throw InvalidArgument("others' production must be nonnegative");

  GridBestResponse out;
  const double cap = (price_fn.intercept - market.cost_lin()[producer]) / price_fn.slope;
  if (cap <= 0.0) return out;  // profit is negative for every positive output

  const auto points = static_cast<long>(std::ceil(1.0 / relative_step));
  out.step = cap / static_cast<double>(points);
  out.upper = cap;

  // Evaluated directly from the profit definition so that this stays
  // independent of the closed-form best response.
  const double rest = others.sum();
  const double q = market.cost_quad()[producer];
  const double b = market.cost_lin()[producer];
  double best = 0.0;  // profit at zero output
  for (long k = 1; k <= points; ++k) {
    const double own = out.step * static_cast<double>(k);
    const double profit = price_fn(rest + own) * own - 0.5 * q * own * own - b * own;
    if (profit > best) {
      best = profit;
      out.argmax = own;
    }
  }
  return out;
}

}  // namespace cournot
