#include "cournot/sim.hpp"

#include "cournot/errors.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <string>

namespace cournot {

namespace {

bool same_optional(const std::optional<Vector>& a, const std::optional<Vector>& b) {
  if (a.has_value() != b.has_value()) return false;
  return !a || same_values(*a, *b);
}

}  // namespace

MarketSpec MarketPatch::apply(const MarketSpec& market) const {
  return MarketSpec(cost_quad.value_or(market.cost_quad()), cost_lin.value_or(market.cost_lin()),
                    utility_quad.value_or(market.utility_quad()), utility_lin.value_or(market.utility_lin()));
}

bool MarketPatch::operator==(const MarketPatch& other) const {
  return same_optional(cost_quad, other.cost_quad) && same_optional(cost_lin, other.cost_lin) &&
         same_optional(utility_quad, other.utility_quad) && same_optional(utility_lin, other.utility_lin);
}

void SimConfig::validate() const {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidArgument("dt must be strictly positive");
  if (!(t_end > 0.0) || !std::isfinite(t_end)) throw InvalidArgument("t_end must be strictly positive");
  if (record_every < 1) throw InvalidArgument("record_every must be at least 1");
  double last = 0.0;
  for (const auto& e : events) {
    if (!(e.time >= 0.0) || e.time > t_end) throw InvalidArgument("event time outside [0, t_end]");
    if (e.time < last) throw InvalidArgument("events must be sorted by time");
    last = e.time;
  }
}

MarketSpec market_after_events(const MarketSpec& initial, const SimConfig& config) {
  MarketSpec market = initial;
  for (const auto& e : config.events) market = e.patch.apply(market);
  return market;
}

void Dynamics::apply(const MarketPatch&) { throw InvalidArgument("this model does not accept market events"); }

Trajectory integrate(Dynamics& model, const Vector& initial, const SimConfig& config) {
  config.validate();
  const Index dim = initial.size();
  Trajectory traj;
  traj.samples.reserve(static_cast<std::size_t>(config.t_end / config.dt / config.record_every) + 8);

  Vector x = initial;
  Vector k1(dim), k2(dim), k3(dim), k4(dim), tmp(dim);
  double t = 0.0;
  int epoch = 0;
  long steps = 0;

  auto record = [&] {
    Sample s{t, epoch, x, model.derived(x)};
    if (!traj.samples.empty() && traj.samples.back().time == t) {
      traj.samples.back() = std::move(s);
    } else {
      traj.samples.push_back(std::move(s));
    }
  };

  std::size_t next_event = 0;
  auto apply_due_events = [&] {
    bool applied = false;
    while (next_event < config.events.size() && config.events[next_event].time <= t) {
      model.apply(config.events[next_event].patch);
      ++next_event;
      ++epoch;
      applied = true;
    }
    if (applied) spdlog::debug("applied market event at t = {}", t);
  };

  apply_due_events();
  record();

  // Time is measured from the start of the current segment so that long runs
  // do not accumulate rounding drift.
  double segment_start = 0.0;
  long segment_steps = 0;
  while (true) {
    const double stop = next_event < config.events.size() ? config.events[next_event].time : config.t_end;
    double t_next = segment_start + static_cast<double>(segment_steps + 1) * config.dt;
    if (t_next > stop - 1e-9 * config.dt) t_next = stop;
    const double h = t_next - t;

    model.derivative(x, k1);
    tmp = x + 0.5 * h * k1;
    model.derivative(tmp, k2);
    tmp = x + 0.5 * h * k2;
    model.derivative(tmp, k3);
    tmp = x + h * k3;
    model.derivative(tmp, k4);
    x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t = t_next;
    ++segment_steps;
    ++steps;

    if (!x.allFinite()) {
      Index bad = 0;
      while (bad < dim && std::isfinite(x[bad])) ++bad;
      throw NumericalError(t, "state component " + std::to_string(bad) + " became non-finite");
    }
    if (steps % config.record_every == 0) record();

    if (t == stop) {
      if (next_event < config.events.size()) {
        apply_due_events();
        record();
        segment_start = t;
        segment_steps = 0;
        if (t < config.t_end) continue;
      }
      if (traj.samples.back().time != t) record();
      break;
    }
  }
  return traj;
}

namespace {

class PlainModel final : public Dynamics {
 public:
  explicit PlainModel(const PlainRhs& rhs) : rhs_(rhs) {}
  void derivative(const Vector& state, Vector& rate) const override { rate = rhs_(state); }

 private:
  const PlainRhs& rhs_;
};

}  // namespace

Trajectory integrate(const PlainRhs& rhs, const Vector& initial, const SimConfig& config) {
  PlainModel model(rhs);
  return integrate(model, initial, config);
}

std::optional<Sample> steady_state_of(const Trajectory& traj, double window, double tol) {
  if (traj.samples.empty()) return std::nullopt;
  const double t_final = traj.back().time;
  if (!(window < t_final - traj.samples.front().time)) throw InvalidArgument("window exceeds trajectory span");
  const Index dim = traj.back().state.size();
  Vector lo = traj.back().state, hi = traj.back().state;
  for (auto it = traj.samples.rbegin(); it != traj.samples.rend() && it->time >= t_final - window; ++it) {
    lo = lo.cwiseMin(it->state);
    hi = hi.cwiseMax(it->state);
  }
  for (Index i = 0; i < dim; ++i) {
    if (hi[i] - lo[i] > tol) return std::nullopt;
  }
  return traj.back();
}

double settling_time(const Trajectory& traj, double tol) {
  if (traj.samples.empty()) return 0.0;
  const Vector& final_state = traj.back().state;
  for (auto it = traj.samples.rbegin(); it != traj.samples.rend(); ++it) {
    if ((it->state - final_state).lpNorm<Eigen::Infinity>() > tol) {
      return it == traj.samples.rbegin() ? it->time : std::prev(it)->time;
    }
  }
  return traj.samples.front().time;
}

// ---------------------------------------------------------------------------

ClosedLoopModel::ClosedLoopModel(NetworkSpec net, ControllerSpec ctrl, MarketSpec market, bool adaptive)
    : net_(std::move(net)),
      red_(build_reduction(net_)),
      ctrl_(std::move(ctrl)),
      reference_ctrl_(ctrl_),
      market_(std::move(market)),
      adaptive_(adaptive) {
  if (net_.size() != ctrl_.size() || net_.size() != market_.size()) {
    throw InvalidArgument("network, controller and market disagree on the node count");
  }
  refresh_reference();
}

void ClosedLoopModel::refresh_reference() {
  if (adaptive_) reference_ctrl_ = ctrl_.with_gains(optimal_gain(market_));
  const Vector start = reference_.zeta.size() == net_.size() - 1 ? reference_.zeta : Vector::Zero(net_.size() - 1);
  try {
    reference_ = closed_loop_equilibrium(loop(), market_, start);
  } catch (const InfeasibleError&) {
    // Warm start may sit in a poor basin; the origin is the canonical guess.
    reference_ = closed_loop_equilibrium(loop(), market_, Vector::Zero(net_.size() - 1));
  }
}

Index ClosedLoopModel::dimension() const noexcept {
  const Index n = net_.size();
  Index dim = (n - 1) + 2 * n;
  if (adaptive_) dim += static_cast<Index>(ctrl_.edges().size()) + n;
  return dim;
}

Vector ClosedLoopModel::pack(const SimState& s) const {
  const Index n = net_.size();
  Vector out(dimension());
  out.segment(0, n - 1) = s.zeta;
  out.segment(n - 1, n) = s.y;
  out.segment(2 * n - 1, n) = s.p;
  if (adaptive_) {
    if (!s.estimator) throw InvalidArgument("adaptive model needs an estimator state");
    const Index mc = static_cast<Index>(ctrl_.edges().size());
    out.segment(3 * n - 1, mc) = s.estimator->chi;
    out.segment(3 * n - 1 + mc, n) = s.estimator->slope_hat;
  }
  return out;
}

SimState ClosedLoopModel::unpack(const Vector& x) const {
  const Index n = net_.size();
  SimState s;
  s.zeta = x.segment(0, n - 1);
  s.y = x.segment(n - 1, n);
  s.p = x.segment(2 * n - 1, n);
  if (adaptive_) {
    const Index mc = static_cast<Index>(ctrl_.edges().size());
    s.estimator = EstimatorState{x.segment(3 * n - 1, mc), x.segment(3 * n - 1 + mc, n)};
  }
  return s;
}

void ClosedLoopModel::derivative(const Vector& x, Vector& rate) const {
  const SimState s = unpack(x);
  const ClosedLoop l{net_, red_, ctrl_};
  rate = pack(adaptive_ ? adaptive_closed_loop_rhs(l, market_, s) : closed_loop_rhs(l, market_, s));
}

void ClosedLoopModel::apply(const MarketPatch& patch) {
  market_ = patch.apply(market_);
  refresh_reference();
}

Vector ClosedLoopModel::derived(const Vector& x) const {
  const Index n = net_.size();
  const SimState s = unpack(x);
  const Vector gains = adaptive_ ? estimated_gain(market_, s.estimator->slope_hat) : ctrl_.gains();
  Vector out(2 * n + 2);
  out.segment(0, n) = controlled_production(gains, market_, s.p);
  out.segment(n, n) = controlled_demand(market_, s.p);
  out[2 * n] = lyapunov_value(loop(), s, reference_);
  out[2 * n + 1] = out.segment(0, n).sum() - out.segment(n, n).sum();
  return out;
}

ClosedLoopModel::Signals ClosedLoopModel::signals(const Vector& d) const {
  const Index n = net_.size();
  return {d.segment(0, n), d.segment(n, n), d[2 * n], d[2 * n + 1]};
}

SimState ClosedLoopModel::equilibrium_state() const {
  SimState s{reference_.zeta, reference_.y, reference_.p, std::nullopt};
  if (adaptive_) s.estimator = estimator_equilibrium(ctrl_, market_);
  return s;
}

std::optional<double> derived_rate(const Trajectory& traj, std::size_t k, Index column) {
  const auto& s = traj.samples;
  if (k < 2 || k + 2 >= s.size()) return std::nullopt;
  const double h = s[k + 1].time - s[k].time;
  for (std::size_t j = k - 2; j < k + 2; ++j) {
    if (s[j].epoch != s[k].epoch || s[j + 1].epoch != s[k].epoch) return std::nullopt;
    if (std::abs((s[j + 1].time - s[j].time) - h) > 1e-9 * h) return std::nullopt;
  }
  auto v = [&](std::size_t j) { return s[j].derived[column]; };
  return (v(k - 2) - 8.0 * v(k - 1) + 8.0 * v(k + 1) - v(k + 2)) / (12.0 * h);
}

}  // namespace cournot
