#include "cournot/network.hpp"

#include "cournot/errors.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <numeric>
#include <string>

namespace cournot {

EdgePotential::EdgePotential(Kind kind, double weight) : kind_(kind), weight_(weight) {
  if (!std::isfinite(weight) || weight <= 0.0) throw InvalidArgument("edge weight must be strictly positive");
}

double EdgePotential::value(double s) const {
  switch (kind_) {
    case Kind::Quadratic:
      return 0.5 * weight_ * s * s;
    case Kind::Sinusoidal:
      return weight_ * (1.0 - std::cos(s));
  }
  return 0.0;
}

double EdgePotential::gradient(double s) const {
  return kind_ == Kind::Quadratic ? weight_ * s : weight_ * std::sin(s);
}

double EdgePotential::curvature(double s) const {
  return kind_ == Kind::Quadratic ? weight_ : weight_ * std::cos(s);
}

std::optional<double> EdgePotential::inverse_gradient(double flow) const {
  if (kind_ == Kind::Quadratic) return flow / weight_;
  const double ratio = flow / weight_;
  if (!(std::abs(ratio) < 1.0)) return std::nullopt;
  return std::asin(ratio);
}

bool EdgePotential::in_domain(double s) const {
  return kind_ == Kind::Quadratic ? std::isfinite(s) : std::abs(s) < kSinusoidalLimit;
}

bool is_connected(Index nodes, const std::vector<std::pair<Index, Index>>& edges) {
  if (nodes <= 1) return true;
  std::vector<Index> parent(static_cast<std::size_t>(nodes));
  std::iota(parent.begin(), parent.end(), Index{0});
  auto find = [&](Index v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  Index components = nodes;
  for (const auto& [a, b] : edges) {
    const Index ra = find(a), rb = find(b);
    if (ra != rb) {
      parent[ra] = rb;
      --components;
    }
  }
  return components == 1;
}

Matrix incidence_matrix(Index nodes, const std::vector<std::pair<Index, Index>>& edges) {
  Matrix r = Matrix::Zero(nodes, static_cast<Index>(edges.size()));
  for (std::size_t k = 0; k < edges.size(); ++k) {
    r(edges[k].first, static_cast<Index>(k)) = 1.0;
    r(edges[k].second, static_cast<Index>(k)) = -1.0;
  }
  return r;
}

namespace {

std::vector<std::pair<Index, Index>> endpoints(const std::vector<Edge>& edges) {
  std::vector<std::pair<Index, Index>> out;
  out.reserve(edges.size());
  for (const auto& e : edges) out.emplace_back(e.from, e.to);
  return out;
}

}  // namespace

NetworkSpec::NetworkSpec(Vector inertia, Vector damping, std::vector<Edge> edges)
    : inertia_(std::move(inertia)), damping_(std::move(damping)), edges_(std::move(edges)) {
  const Index n = inertia_.size();
  if (n < 1) throw InvalidArgument("network needs at least one node");
  if (damping_.size() != n) throw InvalidArgument("D must have one entry per node");
  for (Index i = 0; i < n; ++i) {
    if (!(inertia_[i] > 0.0) || !std::isfinite(inertia_[i])) {
      throw InvalidArgument("M[" + std::to_string(i + 1) + "] must be strictly positive");
    }
    if (!(damping_[i] > 0.0) || !std::isfinite(damping_[i])) {
      throw InvalidArgument("D[" + std::to_string(i + 1) + "] must be strictly positive");
    }
  }
  for (const auto& e : edges_) {
    if (e.from < 0 || e.from >= n || e.to < 0 || e.to >= n) {
      throw InvalidArgument("edge endpoint out of range");
    }
    if (e.from == e.to) throw InvalidArgument("self-loop on node " + std::to_string(e.from + 1));
  }
  if (!is_connected(n, endpoints(edges_))) throw InvalidArgument("physical graph is not connected");
}

bool NetworkSpec::operator==(const NetworkSpec& other) const {
  return same_values(inertia_, other.inertia_) && same_values(damping_, other.damping_) &&
         edges_ == other.edges_;
}

ReducedCoordinates build_reduction(const NetworkSpec& net) {
  const Index n = net.size();
  ReducedCoordinates red;
  red.incidence = incidence_matrix(n, endpoints(net.edges()));
  red.reduced_incidence = red.incidence.topRows(n - 1);
  red.difference = Matrix::Zero(n - 1, n);
  red.difference.leftCols(n - 1).setIdentity();
  red.difference.col(n - 1).setConstant(-1.0);
  // (E^T E)^-1 = (I + 11^T)^-1 = I - 11^T / n
  const Matrix gram_inv =
      Matrix::Identity(n - 1, n - 1) - Matrix::Constant(n - 1, n - 1, 1.0 / static_cast<double>(n));
  red.left_inverse = gram_inv * red.difference;
  return red;
}

Vector edge_differences(const ReducedCoordinates& red, const Vector& zeta) {
  return red.reduced_incidence.transpose() * zeta;
}

double potential_energy(const NetworkSpec& net, const ReducedCoordinates& red, const Vector& zeta) {
  const Vector s = edge_differences(red, zeta);
  double h = 0.0;
  for (Index k = 0; k < s.size(); ++k) h += net.edges()[k].potential.value(s[k]);
  return h;
}

Vector potential_gradient(const NetworkSpec& net, const ReducedCoordinates& red, const Vector& zeta) {
  const Vector s = edge_differences(red, zeta);
  Vector flow(s.size());
  for (Index k = 0; k < s.size(); ++k) flow[k] = net.edges()[k].potential.gradient(s[k]);
  return red.reduced_incidence * flow;
}

Matrix potential_hessian(const NetworkSpec& net, const ReducedCoordinates& red, const Vector& zeta) {
  const Vector s = edge_differences(red, zeta);
  Vector curv(s.size());
  for (Index k = 0; k < s.size(); ++k) curv[k] = net.edges()[k].potential.curvature(s[k]);
  return red.reduced_incidence * curv.asDiagonal() * red.reduced_incidence.transpose();
}

NetworkRate network_rhs(const NetworkSpec& net, const ReducedCoordinates& red, const Vector& zeta,
                        const Vector& y, const Vector& production, const Vector& demand) {
  NetworkRate rate;
  rate.zeta = red.difference * y;
  const Vector coupling = red.lift() * potential_gradient(net, red, zeta);
  rate.y = ((-net.damping().cwiseProduct(y) - coupling + production - demand).array() / net.inertia().array())
               .matrix();
  return rate;
}

double synchronized_velocity(const NetworkSpec& net, const Vector& production, const Vector& demand) {
  return (production - demand).sum() / net.damping().sum();
}

Vector equilibrium_target(const NetworkSpec& net, const ReducedCoordinates& red, const Vector& production,
                          const Vector& demand) {
  const Vector mismatch = production - demand;
  const Vector& d = net.damping();
  const Vector projected = mismatch - d * (mismatch.sum() / d.sum());
  return red.left_inverse * projected;
}

namespace {

bool edges_in_domain(const NetworkSpec& net, const Vector& s) {
  for (Index k = 0; k < s.size(); ++k) {
    if (!net.edges()[k].potential.in_domain(s[k])) return false;
  }
  return true;
}

OpenLoopEquilibrium invert_tree(const NetworkSpec& net, const ReducedCoordinates& red, const Vector& target) {
  // On a tree R_zeta is square and invertible: edge flows follow from the
  // node balance, edge differences from the inverse potential gradients.
  const Eigen::PartialPivLU<Matrix> lu(red.reduced_incidence);
  const Vector flow = lu.solve(target);
  Vector s(flow.size());
  for (Index k = 0; k < flow.size(); ++k) {
    const auto inv = net.edges()[k].potential.inverse_gradient(flow[k]);
    if (!inv) {
      throw InfeasibleError("edge " + std::to_string(net.edges()[k].from + 1) + "-" +
                            std::to_string(net.edges()[k].to + 1) + " must carry flow " +
                            std::to_string(flow[k]) + " beyond its capacity " +
                            std::to_string(net.edges()[k].potential.weight()));
    }
    s[k] = *inv;
  }
  OpenLoopEquilibrium eq;
  eq.method = OpenLoopEquilibrium::Method::TreeInversion;
  eq.zeta = Eigen::PartialPivLU<Matrix>(red.reduced_incidence.transpose()).solve(s);
  eq.residual = (potential_gradient(net, red, eq.zeta) - target).lpNorm<Eigen::Infinity>();
  return eq;
}

}  // namespace

OpenLoopEquilibrium solve_potential_balance(const NetworkSpec& net, const ReducedCoordinates& red,
                                            const Vector& target, const Vector& initial,
                                            const NewtonOptions& options) {
  const Index dim = net.size() - 1;
  if (target.size() != dim || initial.size() != dim) {
    throw InvalidArgument("equilibrium solve expects vectors of size n - 1");
  }
  if (dim == 0) return {Vector(0), 0.0, 0.0, 0, OpenLoopEquilibrium::Method::Newton};
  if (options.allow_tree_inversion && net.is_tree()) return invert_tree(net, red, target);

  Vector zeta = initial;
  if (!edges_in_domain(net, edge_differences(red, zeta))) {
    throw InfeasibleError("initial guess lies outside the potentials' strict-convexity domain");
  }
  Vector residual = potential_gradient(net, red, zeta) - target;
  double norm = residual.norm();

  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    const double max_norm = residual.lpNorm<Eigen::Infinity>();
    if (max_norm <= options.tolerance) {
      return {zeta, 0.0, max_norm, iter, OpenLoopEquilibrium::Method::Newton};
    }
    if (iter == options.max_iterations) break;

    const Eigen::LLT<Matrix> chol(potential_hessian(net, red, zeta));
    if (chol.info() != Eigen::Success) {
      throw InfeasibleError("Jacobian lost positive definiteness during the equilibrium solve");
    }
    const Vector step = chol.solve(-residual);

    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h <= options.max_halvings; ++h, scale *= 0.5) {
      const Vector trial = zeta + scale * step;
      if (!edges_in_domain(net, edge_differences(red, trial))) continue;
      const Vector trial_residual = potential_gradient(net, red, trial) - target;
      const double trial_norm = trial_residual.norm();
      if (trial_norm < norm) {
        zeta = trial;
        residual = trial_residual;
        norm = trial_norm;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw InfeasibleError("Newton stalled at residual " + std::to_string(residual.lpNorm<Eigen::Infinity>()) +
                            "; the required edge flows are not attainable inside the validity domain");
    }
    spdlog::debug("newton iter {} residual {:.3e} step scale {}", iter + 1, norm, scale);
  }
  throw InfeasibleError("Newton did not converge in " + std::to_string(options.max_iterations) +
                        " iterations (residual " + std::to_string(residual.lpNorm<Eigen::Infinity>()) + ")");
}

OpenLoopEquilibrium solve_open_loop_equilibrium(const NetworkSpec& net, const ReducedCoordinates& red,
                                                const Vector& production, const Vector& demand,
                                                const Vector& initial, const NewtonOptions& options) {
  if (production.size() != net.size() || demand.size() != net.size()) {
    throw InvalidArgument("injection vectors must have one entry per node");
  }
  auto eq = solve_potential_balance(net, red, equilibrium_target(net, red, production, demand), initial, options);
  eq.y_star = synchronized_velocity(net, production, demand);
  return eq;
}

}  // namespace cournot
