#include "cournot/errors.hpp"
#include "cournot/market.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace cournot;
using doctest::Approx;

using testing::vec;

namespace {

MarketSpec case_study() { return testing::case_study_market(); }

}  // namespace

TEST_SUITE("market") {
  TEST_CASE("market spec rejects bad coefficients") {
    CHECK_THROWS_AS(MarketSpec(vec({1, 2}), vec({0, 0}), vec({1}), vec({2})), InvalidArgument);
    CHECK_THROWS_AS(MarketSpec(vec({0}), vec({0}), vec({1}), vec({2})), InvalidArgument);
    CHECK_THROWS_AS(MarketSpec(vec({1}), vec({0}), vec({-1}), vec({2})), InvalidArgument);
    CHECK_THROWS_AS(MarketSpec(Vector(), Vector(), Vector(), Vector()), InvalidArgument);
    CHECK_NOTHROW(MarketSpec(vec({1}), vec({0}), vec({1}), vec({2})));
  }

  TEST_CASE("clearing price of the case study") {
    const auto fn = market_clearing_price(case_study());
    CHECK(fn.slope == Approx(0.642857).epsilon(1e-6));
    CHECK(fn.intercept == Approx(7.633929).epsilon(1e-6));
    const Vector qd = case_study().utility_quad();
    CHECK(fn.slope == Approx(1.0 / qd.cwiseInverse().sum()));
  }

  TEST_CASE("clearing price of a single consumer is its own curve") {
    const MarketSpec m(vec({1}), vec({0}), vec({2.5}), vec({4}));
    const auto fn = market_clearing_price(m);
    CHECK(fn.slope == Approx(2.5));
    CHECK(fn.intercept == Approx(4));
  }

  TEST_CASE("demand response") {
    const MarketSpec m(vec({1, 1}), vec({0, 0}), vec({1, 2}), vec({2, 4}));
    const Vector d = demand_response(m, 1.0);
    CHECK(d[0] == Approx(1.0));
    CHECK(d[1] == Approx(1.5));
    CHECK(demand_response(m, 4.0).isZero());
    CHECK(demand_response(m, 10.0).isZero());

    const Vector cs = demand_response(case_study(), 4.9883);
    CHECK(cs[0] == Approx(1.674).epsilon(1e-3));
    CHECK(cs[1] == Approx(0.561).epsilon(1e-3));
    CHECK(cs[2] == Approx(1.045).epsilon(1e-3));
    CHECK(cs[3] == Approx(0.835).epsilon(1e-3));
  }

  TEST_CASE("inverse demand segments") {
    const MarketSpec m(vec({1, 1}), vec({0, 0}), vec({1, 2}), vec({2, 4}));
    const auto u = inverse_demand(m);
    REQUIRE(u.segments().size() == 2);
    CHECK(u.segments()[0].slope == Approx(-2.0));
    CHECK(u.segments()[0].intercept == Approx(4.0));
    CHECK(u.segments()[1].slope == Approx(-2.0 / 3.0));
    CHECK(u.segments()[1].intercept == Approx(8.0 / 3.0));
    REQUIRE(u.breakpoints().size() == 1);
    CHECK(u.breakpoints()[0] == Approx(1.0));
    CHECK(u(1.0) == Approx(2.0));
    CHECK(u(1.0 - 1e-12) == Approx(u(1.0 + 1e-12)));
    CHECK(u(0.0) == Approx(4.0));
    CHECK(u.price_at_zero() == Approx(4.0));
    CHECK_THROWS_AS(u(-0.1), InvalidArgument);
  }

  TEST_CASE("inverse demand of one consumer is a single line") {
    const MarketSpec m(vec({1}), vec({0}), vec({3}), vec({5}));
    const auto u = inverse_demand(m);
    CHECK(u.segments().size() == 1);
    CHECK(u(2.0) == Approx(-1.0));
  }

  TEST_CASE("inverse demand merges equal intercepts") {
    const MarketSpec m(vec({1, 1, 1}), vec({0, 0, 0}), vec({1, 2, 4}), vec({3, 3, 5}));
    const auto u = inverse_demand(m);
    CHECK(u.segments().size() == 2);
    CHECK(u.price_at_zero() == Approx(5.0));
  }

  TEST_CASE("inverse demand undoes demand response on random markets") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
      const auto m = testing::random_market(rng, 1 + trial % 7);
      const auto u = inverse_demand(m);
      std::uniform_real_distribution<double> price(-5.0, m.min_utility_lin());
      for (int k = 0; k < 20; ++k) {
        const double p = price(rng);
        CHECK(u(demand_response(m, p).sum()) == Approx(p).epsilon(1e-12));
      }
    }
  }

  TEST_CASE("Nash triple of the case study") {
    const auto m = case_study();
    const auto nash = nash_closed_form(m, market_clearing_price(m));
    const double pg[] = {2.05, 0.77, 0.96, 0.34}, pd[] = {1.67, 0.56, 1.04, 0.83};
    for (Index i = 0; i < 4; ++i) {
      CHECK(std::abs(nash.production[i] - pg[i]) <= 0.01);
      CHECK(std::abs(nash.demand[i] - pd[i]) <= 0.01);
    }
    CHECK(std::abs(nash.price - 4.99) <= 0.01);
    CHECK(nash.interior);
    CHECK(nash.balanced);
  }

  TEST_CASE("Nash scalar and symmetric instances") {
    const MarketSpec one(vec({2}), vec({1}), vec({1}), vec({5}));
    const AffinePrice fn{1.0, 5.0};
    CHECK(nash_closed_form(one, fn).production[0] == Approx((5.0 - 1.0) / (2.0 + 2.0)));

    const MarketSpec sym(vec({2, 2}), vec({0.5, 0.5}), vec({1, 3}), vec({6, 7}));
    const auto nash = nash_closed_form(sym, market_clearing_price(sym));
    CHECK(nash.production[0] == Approx(nash.production[1]));
  }

  TEST_CASE("rank-one solve agrees with a dense solve") {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 200; ++trial) {
      const auto m = testing::random_market(rng, 1 + trial % 30);
      const auto fn = market_clearing_price(m);
      const Vector dense = testing::dense_nash_production(m, fn);
      CHECK((nash_closed_form(m, fn).production - dense).lpNorm<Eigen::Infinity>() <= 1e-10 * (1 + dense.norm()));
    }
  }

  TEST_CASE("balance holds at the clearing price") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 200; ++trial) {
      const auto m = testing::random_market(rng, 1 + trial % 50);
      const auto nash = nash_closed_form(m, market_clearing_price(m));
      CHECK(std::abs(nash.balance_residual) <= 1e-9 * (1 + std::abs(nash.production.sum())));
    }
  }

  TEST_CASE("interior conditions") {
    const auto m = case_study();
    const auto fn = market_clearing_price(m);
    const auto v = check_interior_conditions(m, fn);
    CHECK(v.interior());
    CHECK(v.price_in_window());
    CHECK(v.max_cost_lin == Approx(2.7));
    CHECK(v.min_utility_lin == Approx(6.25));
    CHECK(v.price > 2.7);
    CHECK(v.price < 6.25);

    // Producers cost more than any consumer pays.
    const MarketSpec bad(vec({1, 1}), vec({6, 7}), vec({1, 1}), vec({3, 5}));
    CHECK_FALSE(check_interior_conditions(bad, market_clearing_price(bad)).interior());

    const MarketSpec priced_out(vec({1}), vec({6}), vec({1}), vec({5}));
    const auto po = check_interior_conditions(priced_out, market_clearing_price(priced_out));
    CHECK_FALSE(po.producers_enter());
    CHECK_FALSE(nash_closed_form(priced_out, market_clearing_price(priced_out)).interior);
  }

  TEST_CASE("interior verdict matches positivity of the triple") {
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 300; ++trial) {
      const Index n = 1 + trial % 6;
      MarketSpec m(testing::uniform(rng, n, 0.5, 3), testing::uniform(rng, n, 0, 6), testing::uniform(rng, n, 0.5, 3),
                   testing::uniform(rng, n, 2, 8));
      const auto nash = nash_closed_form(m, market_clearing_price(m));
      const bool positive = (nash.production.array() > 0).all() && (nash.demand.array() > 0).all();
      CHECK(nash.interior == positive);
    }
  }

  TEST_CASE("producer profit") {
    const MarketSpec m(vec({1}), vec({0}), vec({1}), vec({3}));
    const AffinePrice fn{1.0, 3.0};
    CHECK(producer_profit(m, fn, 0, vec({1})) == Approx(1.5));
    CHECK(producer_profit(m, fn, 0, vec({0})) == Approx(0.0));

    const MarketSpec two(vec({1, 1}), vec({0, 0}), vec({1, 1}), vec({3, 3}));
    CHECK(producer_profit(two, fn, 0, vec({0, 7})) == Approx(0.0));

    const auto cs = case_study();
    const auto nash = nash_closed_form(cs, market_clearing_price(cs));
    const double p1 = nash.production[0];
    CHECK(producer_profit(cs, nash.price_fn, 0, nash.production) ==
          Approx(nash.price * p1 - 0.5 * 1.5 * p1 * p1 - 0.6 * p1));
  }

  TEST_CASE("best response") {
    const MarketSpec m(vec({1, 1}), vec({0, 0}), vec({1, 1}), vec({3, 3}));
    const AffinePrice fn{1.0, 3.0};
    CHECK(best_response(m, fn, 0, vec({0})) == Approx(1.0));
    CHECK(best_response(m, fn, 0, vec({5})) == Approx(0.0));
    const auto grid = best_response_oracle(m, fn, 0, vec({0}));
    CHECK(std::abs(grid.argmax - 1.0) <= grid.step);
    CHECK(grid.step == Approx(1e-4 * 3.0));
    CHECK_THROWS_AS(best_response_oracle(m, fn, 0, vec({0}), 0.0), InvalidArgument);
    CHECK_THROWS_AS(best_response_oracle(m, fn, 2, vec({0})), InvalidArgument);
  }

  TEST_CASE("grid oracle lands on the Nash point of the case study") {
    const auto m = case_study();
    const auto nash = nash_closed_form(m, market_clearing_price(m));
    for (Index i = 0; i < 4; ++i) {
      const auto grid = best_response_oracle(m, nash.price_fn, i, others_of(nash.production, i));
      CHECK(std::abs(grid.argmax - nash.production[i]) <= grid.step);
      CHECK(best_response(m, nash.price_fn, i, others_of(nash.production, i)) ==
            Approx(nash.production[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("others_of drops one entry") {
    const Vector o = others_of(vec({1, 2, 3}), 1);
    REQUIRE(o.size() == 2);
    CHECK(o[0] == 1);
    CHECK(o[1] == 3);
  }

  TEST_CASE("market equality compares sizes first") {
    const MarketSpec a(vec({1}), vec({0}), vec({1}), vec({3}));
    const MarketSpec b(vec({1, 1}), vec({0, 0}), vec({1, 1}), vec({3, 3}));
    CHECK(a == a);
    CHECK_FALSE(a == b);
  }
}
