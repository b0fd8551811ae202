#pragma once

#include "cournot/market.hpp"
#include "cournot/network.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <initializer_list>
#include <random>
#include <string>

namespace testing {

using cournot::Index;
using cournot::Matrix;
using cournot::Vector;

inline std::filesystem::path scenario_path(const std::string& name) {
  return std::filesystem::path(COURNOT_SCENARIO_DIR) / (name + ".scenario");
}

inline Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

// Four-area case-study market after the 25% rise in b_d.
inline cournot::MarketSpec case_study_market() {
  return {vec({1.5, 4.5, 3, 6}), vec({0.6, 1.05, 1.5, 2.7}), vec({1.5, 2.25, 3.6, 6}), vec({7.5, 6.25, 8.75, 10})};
}

// Four-area ring with sinusoidal lines.
inline cournot::NetworkSpec case_study_network() {
  using cournot::EdgePotential;
  return {vec({5.22, 3.98, 4.49, 4.22}),
          vec({1.6, 1.22, 1.38, 1.42}),
          {{0, 1, EdgePotential::sinusoidal(25.6)},
           {1, 2, EdgePotential::sinusoidal(33.1)},
           {2, 3, EdgePotential::sinusoidal(16.6)},
           {3, 0, EdgePotential::sinusoidal(21.0)}}};
}

inline Vector uniform(std::mt19937_64& rng, Index n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = d(rng);
  return v;
}

// b_d in [5, 10] and b_g in [0.1, 2] keep every producer and consumer
// potentially active; curvatures in [0.5, 6].
inline cournot::MarketSpec random_market(std::mt19937_64& rng, Index n) {
  return {uniform(rng, n, 0.5, 6.0), uniform(rng, n, 0.1, 2.0), uniform(rng, n, 0.5, 6.0), uniform(rng, n, 5.0, 10.0)};
}

inline cournot::MarketSpec random_interior_market(std::mt19937_64& rng, Index n) {
  for (;;) {
    auto m = random_market(rng, n);
    if (cournot::nash_closed_form(m, cournot::market_clearing_price(m)).interior) return m;
  }
}

// (alpha (I + 11^T) + diag(Q_g)) P = beta 1 - b_g by dense LU.
inline Vector dense_nash_production(const cournot::MarketSpec& m, const cournot::AffinePrice& fn) {
  const Index n = m.size();
  Matrix a = fn.slope * (Matrix::Identity(n, n) + Matrix::Ones(n, n));
  a.diagonal() += m.cost_quad();
  const Vector rhs = Vector::Constant(n, fn.intercept) - m.cost_lin();
  return a.partialPivLu().solve(rhs);
}

// Spanning path over a random permutation plus `extra` random chords.
inline std::vector<std::pair<Index, Index>> random_connected_pairs(std::mt19937_64& rng, Index n, int extra) {
  std::vector<Index> order(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::pair<Index, Index>> pairs;
  for (Index i = 0; i + 1 < n; ++i) pairs.emplace_back(order[i], order[i + 1]);
  std::uniform_int_distribution<Index> pick(0, n - 1);
  for (int k = 0; k < extra && n > 2; ++k) {
    Index a = pick(rng), b = pick(rng);
    if (a == b) continue;
    pairs.emplace_back(a, b);
  }
  return pairs;
}

}  // namespace testing
