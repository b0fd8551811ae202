#include "cournot/errors.hpp"
#include "cournot/network.hpp"
#include "support.hpp"

#include <doctest.h>

#include <numbers>

using namespace cournot;
using doctest::Approx;
using testing::vec;

namespace {

NetworkSpec two_node(double w, EdgePotential::Kind kind = EdgePotential::Kind::Quadratic) {
  const auto pot = kind == EdgePotential::Kind::Quadratic ? EdgePotential::quadratic(w) : EdgePotential::sinusoidal(w);
  return {vec({2, 3}), vec({1, 1}), {{0, 1, pot}}};
}

// Swing equations on the full angle vector: M th'' = -D th' - R grad H(R^T th) + P_g - P_d.
Vector full_acceleration(const NetworkSpec& net, const Vector& theta, const Vector& omega, const Vector& injection) {
  const Matrix r = incidence_matrix(net.size(), [&] {
    std::vector<std::pair<Index, Index>> p;
    for (const auto& e : net.edges()) p.emplace_back(e.from, e.to);
    return p;
  }());
  const Vector s = r.transpose() * theta;
  Vector grad(s.size());
  for (Index k = 0; k < s.size(); ++k) grad[k] = net.edges()[k].potential.gradient(s[k]);
  return (-net.damping().cwiseProduct(omega) - r * grad + injection).cwiseQuotient(net.inertia());
}

}  // namespace

TEST_SUITE("network") {
  TEST_CASE("potentials") {
    const auto q = EdgePotential::quadratic(2.0);
    CHECK(q.value(3.0) == Approx(9.0));
    CHECK(q.gradient(3.0) == Approx(6.0));
    CHECK(q.curvature(-1.0) == Approx(2.0));
    CHECK(*q.inverse_gradient(6.0) == Approx(3.0));

    const auto s = EdgePotential::sinusoidal(2.0);
    CHECK(s.value(0.0) == Approx(0.0));
    CHECK(s.gradient(std::numbers::pi / 6) == Approx(1.0));
    CHECK(*s.inverse_gradient(1.0) == Approx(std::numbers::pi / 6));
    CHECK_FALSE(s.inverse_gradient(2.5).has_value());
    CHECK(s.in_domain(1.5));
    CHECK_FALSE(s.in_domain(1.6));
    CHECK_THROWS_AS(EdgePotential::quadratic(0.0), InvalidArgument);
    CHECK_THROWS_AS(EdgePotential::sinusoidal(-1.0), InvalidArgument);
  }

  TEST_CASE("network spec validation") {
    CHECK_THROWS_AS(NetworkSpec(vec({1, 1, 1}), vec({1, 1, 1}), {{0, 1, EdgePotential::quadratic(1)}}),
                    InvalidArgument);
    CHECK_THROWS_AS(NetworkSpec(vec({1, 1}), vec({1, 0}), {{0, 1, EdgePotential::quadratic(1)}}), InvalidArgument);
    CHECK_THROWS_AS(NetworkSpec(vec({1, 1}), vec({1, 1}), {{0, 0, EdgePotential::quadratic(1)}}), InvalidArgument);
    CHECK_THROWS_AS(NetworkSpec(vec({1, 1}), vec({1, 1}), {{0, 2, EdgePotential::quadratic(1)}}), InvalidArgument);
    CHECK_NOTHROW(NetworkSpec(vec({1}), vec({1}), {}));
    CHECK(testing::case_study_network().is_tree() == false);
    CHECK(two_node(1).is_tree());
  }

  TEST_CASE("reduction of the smallest network") {
    const auto red = build_reduction(two_node(1.0));
    CHECK(red.difference.rows() == 1);
    CHECK(red.difference(0, 0) == Approx(1));
    CHECK(red.difference(0, 1) == Approx(-1));
    CHECK(std::abs(red.reduced_incidence(0, 0)) == Approx(1));
    CHECK(red.left_inverse(0, 0) == Approx(0.5));
    CHECK(red.left_inverse(0, 1) == Approx(-0.5));
  }

  TEST_CASE("reduction of the four-area ring") {
    const auto net = testing::case_study_network();
    const auto red = build_reduction(net);
    CHECK(red.incidence.rows() == 4);
    CHECK(red.incidence.cols() == 4);
    CHECK(red.reduced_incidence.rows() == 3);
    CHECK(red.reduced_incidence.cols() == 4);
    CHECK((red.left_inverse * red.lift() - Matrix::Identity(3, 3)).norm() <= 1e-14);
    CHECK((red.incidence.transpose() * Vector::Ones(4)).norm() <= 1e-14);
    CHECK(red.incidence(0, 0) == 1);
    CHECK(red.incidence(1, 0) == -1);
  }

  TEST_CASE("incidence annihilates constants on random graphs") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
      const Index n = 2 + trial % 9;
      const auto pairs = testing::random_connected_pairs(rng, n, 3);
      const Matrix r = incidence_matrix(n, pairs);
      CHECK((r.transpose() * Vector::Ones(n)).norm() <= 1e-14);
      CHECK(is_connected(n, pairs));
    }
    CHECK_FALSE(is_connected(3, {{0, 1}}));
  }

  TEST_CASE("network rhs at rest") {
    const auto net = testing::case_study_network();
    const auto red = build_reduction(net);
    const Vector p = vec({1, 2, 3, 4});
    const auto rate = network_rhs(net, red, Vector::Zero(3), Vector::Zero(4), p, p);
    CHECK(rate.zeta.norm() == Approx(0));
    CHECK(rate.y.norm() == Approx(0));
    const auto sync = network_rhs(net, red, vec({0.1, -0.2, 0.05}), Vector::Constant(4, 0.7), p, p);
    CHECK(sync.zeta.norm() <= 1e-15);
  }

  TEST_CASE("two-node swing equation by hand") {
    const double w = 3.0, s = 0.2;
    const auto net = two_node(w);
    const auto red = build_reduction(net);
    const auto rate = network_rhs(net, red, vec({s}), Vector::Zero(2), Vector::Zero(2), Vector::Zero(2));
    // theta_1 - theta_2 = s; node 1 pushes w s out, node 2 receives it.
    CHECK(rate.y[0] == Approx(-w * s / 2.0));
    CHECK(rate.y[1] == Approx(w * s / 3.0));
  }

  TEST_CASE("reduced and full coordinates agree") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 30; ++trial) {
      const Index n = 2 + trial % 6;
      const auto pairs = testing::random_connected_pairs(rng, n, 2);
      std::vector<Edge> edges;
      for (const auto& [a, b] : pairs) edges.push_back({a, b, EdgePotential::sinusoidal(1.0 + trial % 3)});
      const NetworkSpec net(testing::uniform(rng, n, 1, 5), testing::uniform(rng, n, 0.5, 2), edges);
      const auto red = build_reduction(net);
      const Vector theta = testing::uniform(rng, n, -0.3, 0.3);
      const Vector omega = testing::uniform(rng, n, -1, 1);
      const Vector pg = testing::uniform(rng, n, 0, 2), pd = testing::uniform(rng, n, 0, 2);
      const Vector zeta = red.difference * theta;
      const auto rate = network_rhs(net, red, zeta, omega, pg, pd);
      CHECK((rate.y - full_acceleration(net, theta, omega, pg - pd)).norm() <= 1e-12);
      CHECK((rate.zeta - red.difference * omega).norm() <= 1e-14);
      // The reduced potential is the full one evaluated at R^T theta.
      double h = 0;
      const Vector s = red.incidence.transpose() * theta;
      for (Index k = 0; k < s.size(); ++k) h += net.edges()[k].potential.value(s[k]);
      CHECK(potential_energy(net, red, zeta) == Approx(h));
    }
  }

  TEST_CASE("potential gradient and hessian match finite differences") {
    const auto net = testing::case_study_network();
    const auto red = build_reduction(net);
    const Vector z = vec({0.1, -0.05, 0.2});
    const Vector g = potential_gradient(net, red, z);
    const Matrix h = potential_hessian(net, red, z);
    const double eps = 1e-6;
    for (Index i = 0; i < 3; ++i) {
      Vector zp = z, zm = z;
      zp[i] += eps;
      zm[i] -= eps;
      CHECK(g[i] == Approx((potential_energy(net, red, zp) - potential_energy(net, red, zm)) / (2 * eps)).epsilon(1e-7));
      const Vector col = (potential_gradient(net, red, zp) - potential_gradient(net, red, zm)) / (2 * eps);
      CHECK((h.col(i) - col).norm() <= 1e-6);
    }
  }

  TEST_CASE("synchronized velocity") {
    const auto net = testing::case_study_network();
    CHECK(synchronized_velocity(net, vec({1, 1, 1, 1}), vec({1, 1, 1, 1})) == Approx(0));
    CHECK(synchronized_velocity(net, vec({0.562, 0, 0, 0}), Vector::Zero(4)) == Approx(0.1));
    const NetworkSpec one(vec({2}), vec({4}), {});
    CHECK(synchronized_velocity(one, vec({3}), vec({1})) == Approx(0.5));
  }

  TEST_CASE("open-loop equilibrium with balanced injections is the origin") {
    const auto net = testing::case_study_network();
    const auto red = build_reduction(net);
    const Vector p = vec({1, 2, 3, 4});
    const auto eq = solve_open_loop_equilibrium(net, red, p, p, vec({0.3, -0.2, 0.1}));
    CHECK(eq.zeta.norm() <= 1e-10);
    CHECK(eq.y_star == Approx(0));
  }

  TEST_CASE("two-node line has a closed-form equilibrium") {
    const double w = 4.0, delta = 0.6;
    const NetworkSpec net(vec({1, 1}), vec({1, 1}), {{0, 1, EdgePotential::quadratic(w)}});
    const auto red = build_reduction(net);
    NewtonOptions newton;
    newton.allow_tree_inversion = false;
    const auto eq = solve_open_loop_equilibrium(net, red, vec({delta, 0}), vec({0, delta}), vec({0}), newton);
    CHECK(eq.method == OpenLoopEquilibrium::Method::Newton);
    // Edge flow delta from node 1 to node 2.
    CHECK(std::abs(eq.zeta[0] - delta / w) <= 1e-10);
    const auto tree = solve_open_loop_equilibrium(net, red, vec({delta, 0}), vec({0, delta}), vec({0}));
    CHECK(tree.method == OpenLoopEquilibrium::Method::TreeInversion);
    CHECK(std::abs(tree.zeta[0] - delta / w) <= 1e-12);
  }

  TEST_CASE("tree inversion and Newton agree on random trees") {
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 30; ++trial) {
      const Index n = 2 + trial % 7;
      const auto pairs = testing::random_connected_pairs(rng, n, 0);
      std::vector<Edge> edges;
      for (const auto& [a, b] : pairs) edges.push_back({a, b, EdgePotential::sinusoidal(5.0)});
      const NetworkSpec net(testing::uniform(rng, n, 1, 5), testing::uniform(rng, n, 0.5, 2), edges);
      const auto red = build_reduction(net);
      const Vector pg = testing::uniform(rng, n, 0, 1), pd = testing::uniform(rng, n, 0, 1);
      NewtonOptions newton;
      newton.allow_tree_inversion = false;
      const auto a = solve_open_loop_equilibrium(net, red, pg, pd, Vector::Zero(n - 1));
      const auto b = solve_open_loop_equilibrium(net, red, pg, pd, Vector::Zero(n - 1), newton);
      CHECK((a.zeta - b.zeta).lpNorm<Eigen::Infinity>() <= 1e-9);
      const auto rate = network_rhs(net, red, a.zeta, Vector::Constant(n, a.y_star), pg, pd);
      CHECK(rate.y.lpNorm<Eigen::Infinity>() <= 1e-9);
    }
  }

  TEST_CASE("equilibrium is a rest point of the swing dynamics") {
    const auto net = testing::case_study_network();
    const auto red = build_reduction(net);
    const auto m = testing::case_study_market();
    const auto nash = nash_closed_form(m, market_clearing_price(m));
    const auto eq = solve_open_loop_equilibrium(net, red, nash.production, nash.demand, Vector::Zero(3));
    CHECK(eq.residual <= 1e-10);
    const auto rate = network_rhs(net, red, eq.zeta, Vector::Constant(4, eq.y_star), nash.production, nash.demand);
    CHECK(rate.y.lpNorm<Eigen::Infinity>() <= 1e-10);
    CHECK(rate.zeta.lpNorm<Eigen::Infinity>() <= 1e-14);
  }

  TEST_CASE("infeasible mismatch is reported, not crashed on") {
    const auto red = build_reduction(two_node(1.0, EdgePotential::Kind::Sinusoidal));
    const auto net = two_node(1.0, EdgePotential::Kind::Sinusoidal);
    CHECK_THROWS_AS(solve_open_loop_equilibrium(net, red, vec({3, 0}), vec({0, 3}), vec({0})), InfeasibleError);
    NewtonOptions newton;
    newton.allow_tree_inversion = false;
    CHECK_THROWS_AS(solve_open_loop_equilibrium(net, red, vec({3, 0}), vec({0, 3}), vec({0}), newton), InfeasibleError);

    const auto ring = testing::case_study_network();
    const auto rred = build_reduction(ring);
    CHECK_THROWS_AS(solve_open_loop_equilibrium(ring, rred, vec({60, 0, 0, 0}), vec({0, 0, 60, 0}), Vector::Zero(3)),
                    InfeasibleError);
    CHECK_THROWS_AS(solve_open_loop_equilibrium(ring, rred, vec({1, 0, 0, 0}), vec({1, 0, 0, 0}), vec({2, 0, 0})),
                    InfeasibleError);
  }
}
