#pragma once

// Physical layer: a connected graph whose nodes follow damped second-order
// dynamics coupled through strictly convex edge potentials. Node n (the last
// node) is the reference; states are expressed relative to it.

#include "cournot/market.hpp"

#include <numbers>
#include <optional>
#include <vector>

namespace cournot {

class EdgePotential {
 public:
  enum class Kind { Quadratic, Sinusoidal };

  // H(s) = 1/2 w s^2
  static EdgePotential quadratic(double weight) { return {Kind::Quadratic, weight}; }
  // H(s) = w (1 - cos s), strictly convex on |s| < pi/2 only.
  static EdgePotential sinusoidal(double weight) { return {Kind::Sinusoidal, weight}; }

  Kind kind() const noexcept { return kind_; }
  double weight() const noexcept { return weight_; }

  double value(double s) const;
  double gradient(double s) const;
  double curvature(double s) const;
  // Solves gradient(s) = flow inside the validity domain.
  std::optional<double> inverse_gradient(double flow) const;
  bool in_domain(double s) const;

  bool operator==(const EdgePotential&) const = default;

 private:
  EdgePotential(Kind kind, double weight);

  Kind kind_;
  double weight_;
};

inline constexpr double kSinusoidalLimit = std::numbers::pi / 2.0;

// Undirected edge with a fixed orientation: the edge difference is
// x[from] - x[to]. Node indices are 0-based.
struct Edge {
  Index from = 0;
  Index to = 0;
  EdgePotential potential = EdgePotential::quadratic(1.0);

  bool operator==(const Edge&) const = default;
};

class NetworkSpec {
 public:
  // Throws InvalidArgument on non-positive parameters, bad node indices,
  // self-loops or a disconnected graph.
  NetworkSpec(Vector inertia, Vector damping, std::vector<Edge> edges);

  Index size() const noexcept { return inertia_.size(); }
  Index edge_count() const noexcept { return static_cast<Index>(edges_.size()); }
  const Vector& inertia() const noexcept { return inertia_; }
  const Vector& damping() const noexcept { return damping_; }
  const std::vector<Edge>& edges() const noexcept { return edges_; }

  bool is_tree() const noexcept { return edge_count() == size() - 1; }

  bool operator==(const NetworkSpec& other) const;

 private:
  Vector inertia_;
  Vector damping_;
  std::vector<Edge> edges_;
};

// Node-by-edge incidence with +1 at `from` and -1 at `to`.
Matrix incidence_matrix(Index nodes, const std::vector<std::pair<Index, Index>>& edges);

bool is_connected(Index nodes, const std::vector<std::pair<Index, Index>>& edges);

// Reference-node coordinates zeta_i = x_i - x_n.
struct ReducedCoordinates {
  Matrix incidence;          // R, n x m
  Matrix reduced_incidence;  // R_zeta, (n-1) x m: R without its last row
  Matrix difference;         // E^T = [I | -1], (n-1) x n
  Matrix left_inverse;       // E^+ = (E^T E)^-1 E^T, (n-1) x n

  Matrix lift() const { return difference.transpose(); }  // E
};

ReducedCoordinates build_reduction(const NetworkSpec& net);

// R_zeta^T zeta, one entry per edge.
Vector edge_differences(const ReducedCoordinates& red, const Vector& zeta);

// H_zeta(zeta) = sum_k H_k((R_zeta^T zeta)_k)
double potential_energy(const NetworkSpec& net, const ReducedCoordinates& red, const Vector& zeta);

// grad H_zeta(zeta) = R_zeta grad H(R_zeta^T zeta)
Vector potential_gradient(const NetworkSpec& net, const ReducedCoordinates& red, const Vector& zeta);

// R_zeta diag(H''(R_zeta^T zeta)) R_zeta^T
Matrix potential_hessian(const NetworkSpec& net, const ReducedCoordinates& red, const Vector& zeta);

struct NetworkRate {
  Vector zeta;  // d zeta / dt
  Vector y;     // d y / dt
};

NetworkRate network_rhs(const NetworkSpec& net, const ReducedCoordinates& red, const Vector& zeta,
                        const Vector& y, const Vector& production, const Vector& demand);

// Common velocity every node settles to under constant injections.
double synchronized_velocity(const NetworkSpec& net, const Vector& production, const Vector& demand);

struct OpenLoopEquilibrium {
  enum class Method { Newton, TreeInversion };

  Vector zeta;
  double y_star = 0.0;
  double residual = 0.0;  // max-norm of grad H_zeta(zeta) - target
  int iterations = 0;
  Method method = Method::Newton;
};

struct NewtonOptions {
  int max_iterations = 100;
  int max_halvings = 8;
  double tolerance = 1e-10;
  bool allow_tree_inversion = true;
};

// Right-hand side of grad H_zeta(zeta) = target for constant injections:
// E^+ (I - D 11^T / 1^T D 1)(P_g - P_d).
Vector equilibrium_target(const NetworkSpec& net, const ReducedCoordinates& red, const Vector& production,
                          const Vector& demand);

// Equilibrium of the uncontrolled network for constant injections. Trees are
// solved edge by edge; other graphs by damped Newton from `initial`. Throws
// InfeasibleError when no equilibrium is found inside the potentials'
// validity domain.
OpenLoopEquilibrium solve_open_loop_equilibrium(const NetworkSpec& net, const ReducedCoordinates& red,
                                                const Vector& production, const Vector& demand,
                                                const Vector& initial, const NewtonOptions& options = {});

// Lower-level solve of grad H_zeta(zeta) = target.
OpenLoopEquilibrium solve_potential_balance(const NetworkSpec& net, const ReducedCoordinates& red,
                                            const Vector& target, const Vector& initial,
                                            const NewtonOptions& options = {});

}  // namespace cournot
