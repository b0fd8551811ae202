#include "cournot/scenario.hpp"

#include "cournot/errors.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace cournot {

const char* to_string(GainMode mode) {
  switch (mode) {
    case GainMode::Optimal:
      return "optimal";
    case GainMode::Explicit:
      return "explicit";
    case GainMode::Adaptive:
      return "adaptive";
  }
  return "?";
}

bool ControllerConfig::operator==(const ControllerConfig& other) const {
  return same_values(tau, other.tau) && mode == other.mode && same_values(gains, other.gains) &&
         edges == other.edges;
}

bool InitialCondition::operator==(const InitialCondition& other) const {
  return at_equilibrium == other.at_equilibrium && same_values(zeta, other.zeta) && same_values(y, other.y) &&
         same_values(p, other.p) && same_values(chi, other.chi) && same_values(slope_hat, other.slope_hat);
}

bool Scenario::operator==(const Scenario& other) const {
  return name == other.name && market == other.market && network == other.network &&
         controller == other.controller && sim == other.sim && initial == other.initial;
}

ControllerSpec Scenario::controller_spec() const {
  Vector gains = controller.mode == GainMode::Explicit ? controller.gains : optimal_gain(market);
  return ControllerSpec(controller.tau, std::move(gains), controller.edges);
}

ClosedLoopModel Scenario::model() const {
  return ClosedLoopModel(network, controller_spec(), market, controller.mode == GainMode::Adaptive);
}

SimState Scenario::initial_state(const ClosedLoopModel& model) const {
  if (initial.at_equilibrium) return model.equilibrium_state();
  const Index n = network.size();
  auto or_zero = [](const Vector& v, Index size) { return v.size() == 0 ? Vector::Zero(size) : v; };
  SimState s{or_zero(initial.zeta, n - 1), or_zero(initial.y, n), or_zero(initial.p, n), std::nullopt};
  if (model.adaptive()) {
    s.estimator = EstimatorState{or_zero(initial.chi, static_cast<Index>(controller.edges.size())),
                                 or_zero(initial.slope_hat, n)};
  }
  return s;
}

// ---------------------------------------------------------------------------
// Parsing

namespace {

int line_of(const YAML::Node& node) { return node.Mark().is_null() ? 0 : node.Mark().line + 1; }

[[noreturn]] void fail(const YAML::Node& node, const std::string& what) { throw ParseError(line_of(node), what); }

void allow_keys(const YAML::Node& map, const std::set<std::string>& keys, const std::string& where) {
  if (!map.IsMap()) fail(map, where + " must be a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!keys.count(key)) fail(kv.first, "unknown key '" + key + "' in " + where);
  }
}

YAML::Node require(const YAML::Node& map, const std::string& key, const std::string& where) {
  const YAML::Node node = map[key];
  if (!node) fail(map, "missing key '" + key + "' in " + where);
  return node;
}

double as_number(const YAML::Node& node, const std::string& what) {
  if (!node.IsScalar()) fail(node, what + " must be a number");
  const auto& text = node.Scalar();
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) fail(node, what + " must be a number, got '" + text + "'");
  return value;
}

long as_integer(const YAML::Node& node, const std::string& what) {
  const double v = as_number(node, what);
  if (v != static_cast<double>(static_cast<long>(v))) fail(node, what + " must be an integer");
  return static_cast<long>(v);
}

Vector as_vector(const YAML::Node& node, const std::string& what, Index expected = -1) {
  if (!node.IsSequence()) fail(node, what + " must be a list of numbers");
  Vector v(static_cast<Index>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i) v[static_cast<Index>(i)] = as_number(node[i], what);
  if (expected >= 0 && v.size() != expected) {
    fail(node, what + " has " + std::to_string(v.size()) + " entries, expected " + std::to_string(expected));
  }
  return v;
}

std::pair<Index, Index> as_node_pair(const YAML::Node& node, Index n, const std::string& what) {
  if (!node.IsSequence() || node.size() != 2) fail(node, what + " must be a pair of node numbers");
  const long a = as_integer(node[0], what), b = as_integer(node[1], what);
  if (a < 1 || a > n || b < 1 || b > n) fail(node, what + " refers to a node outside 1.." + std::to_string(n));
  if (a == b) fail(node, what + " connects a node to itself");
  return {static_cast<Index>(a - 1), static_cast<Index>(b - 1)};
}

// Runs a spec constructor and re-anchors its InvalidArgument at `node`.
template <typename F>
auto anchored(const YAML::Node& node, const std::string& where, F&& build) {
  try {
    return build();
  } catch (const InvalidArgument& e) {
    fail(node, where + ": " + e.what());
  }
}

MarketPatch parse_patch(const YAML::Node& node, Index n) {
  allow_keys(node, {"Q_g", "b_g", "Q_d", "b_d"}, "event patch");
  MarketPatch patch;
  if (node["Q_g"]) patch.cost_quad = as_vector(node["Q_g"], "Q_g", n);
  if (node["b_g"]) patch.cost_lin = as_vector(node["b_g"], "b_g", n);
  if (node["Q_d"]) patch.utility_quad = as_vector(node["Q_d"], "Q_d", n);
  if (node["b_d"]) patch.utility_lin = as_vector(node["b_d"], "b_d", n);
  if (patch.empty()) fail(node, "event patch changes nothing");
  return patch;
}

Scenario build(const YAML::Node& root) {
  allow_keys(root, {"name", "market", "network", "controller", "sim", "initial", "events"}, "scenario");

  // market
  const YAML::Node m = require(root, "market", "scenario");
  allow_keys(m, {"Q_g", "b_g", "Q_d", "b_d"}, "market");
  const Vector qg = as_vector(require(m, "Q_g", "market"), "Q_g");
  const Index n = qg.size();
  MarketSpec market = anchored(m, "market", [&] {
    return MarketSpec(qg, as_vector(require(m, "b_g", "market"), "b_g", n),
                      as_vector(require(m, "Q_d", "market"), "Q_d", n),
                      as_vector(require(m, "b_d", "market"), "b_d", n));
  });

  // network
  const YAML::Node nw = require(root, "network", "scenario");
  allow_keys(nw, {"M", "D", "edges"}, "network");
  std::vector<Edge> edges;
  if (nw["edges"]) {
    if (!nw["edges"].IsSequence()) fail(nw["edges"], "network edges must be a list");
    for (const auto& e : nw["edges"]) {
      allow_keys(e, {"nodes", "potential", "weight"}, "network edge");
      const auto [a, b] = as_node_pair(require(e, "nodes", "network edge"), n, "edge nodes");
      const double w = as_number(require(e, "weight", "network edge"), "edge weight");
      const std::string kind = require(e, "potential", "network edge").as<std::string>();
      auto potential = anchored(e, "network edge", [&] {
        if (kind == "quadratic") return EdgePotential::quadratic(w);
        if (kind == "sinusoidal") return EdgePotential::sinusoidal(w);
        throw InvalidArgument("potential must be 'quadratic' or 'sinusoidal', got '" + kind + "'");
      });
      edges.push_back({a, b, potential});
    }
  }
  NetworkSpec network = anchored(nw, "network", [&] {
    return NetworkSpec(as_vector(require(nw, "M", "network"), "M", n), as_vector(require(nw, "D", "network"), "D", n),
                       edges);
  });

  // controller
  const YAML::Node c = require(root, "controller", "scenario");
  allow_keys(c, {"tau", "gain", "k", "comm_edges"}, "controller");
  ControllerConfig ctrl;
  ctrl.tau = as_vector(require(c, "tau", "controller"), "tau", n);
  const YAML::Node gain = require(c, "gain", "controller");
  const std::string mode = gain.as<std::string>();
  if (mode == "optimal") {
    ctrl.mode = GainMode::Optimal;
  } else if (mode == "explicit") {
    ctrl.mode = GainMode::Explicit;
    ctrl.gains = as_vector(require(c, "k", "controller"), "k", n);
  } else if (mode == "adaptive") {
    ctrl.mode = GainMode::Adaptive;
  } else {
    fail(gain, "gain must be 'optimal', 'explicit' or 'adaptive', got '" + mode + "'");
  }
  if (ctrl.mode != GainMode::Explicit && c["k"]) fail(c["k"], "'k' is only allowed with gain: explicit");
  if (c["comm_edges"]) {
    if (!c["comm_edges"].IsSequence()) fail(c["comm_edges"], "comm_edges must be a list");
    for (const auto& e : c["comm_edges"]) {
      allow_keys(e, {"nodes", "rho", "kappa"}, "communication edge");
      const auto [a, b] = as_node_pair(require(e, "nodes", "communication edge"), n, "comm edge nodes");
      CommEdge ce{a, b};
      if (e["rho"]) ce.rho = as_number(e["rho"], "rho");
      if (e["kappa"]) ce.kappa = as_number(e["kappa"], "kappa");
      ctrl.edges.push_back(ce);
    }
  }
  // Validates the communication graph and gains.
  anchored(c, "controller", [&] {
    return ControllerSpec(ctrl.tau, ctrl.mode == GainMode::Explicit ? ctrl.gains : optimal_gain(market), ctrl.edges);
  });

  // sim
  SimConfig sim;
  if (const YAML::Node s = root["sim"]) {
    allow_keys(s, {"t_end", "dt", "record_every"}, "sim");
    if (s["t_end"]) sim.t_end = as_number(s["t_end"], "t_end");
    if (s["dt"]) sim.dt = as_number(s["dt"], "dt");
    if (s["record_every"]) sim.record_every = static_cast<int>(as_integer(s["record_every"], "record_every"));
  }
  if (const YAML::Node ev = root["events"]) {
    if (!ev.IsSequence()) fail(ev, "events must be a list");
    MarketSpec running = market;
    for (const auto& e : ev) {
      allow_keys(e, {"time", "set"}, "event");
      MarketEvent event{as_number(require(e, "time", "event"), "event time"),
                        parse_patch(require(e, "set", "event"), n)};
      running = anchored(e, "event", [&] { return event.patch.apply(running); });
      sim.events.push_back(std::move(event));
    }
  }
  anchored(root["sim"] ? root["sim"] : root, "sim", [&] {
    sim.validate();
    return 0;
  });

  // initial condition
  InitialCondition init;
  if (const YAML::Node i = root["initial"]) {
    if (i.IsScalar()) {
      if (i.Scalar() != "equilibrium") fail(i, "initial must be 'equilibrium' or a mapping of state vectors");
    } else {
      allow_keys(i, {"zeta", "y", "p", "chi", "alpha_hat"}, "initial");
      init.at_equilibrium = false;
      if (i["zeta"]) init.zeta = as_vector(i["zeta"], "zeta", n - 1);
      if (i["y"]) init.y = as_vector(i["y"], "y", n);
      if (i["p"]) init.p = as_vector(i["p"], "p", n);
      if (i["chi"]) init.chi = as_vector(i["chi"], "chi", static_cast<Index>(ctrl.edges.size()));
      if (i["alpha_hat"]) init.slope_hat = as_vector(i["alpha_hat"], "alpha_hat", n);
    }
  }

  std::string name = root["name"] ? root["name"].as<std::string>() : std::string{};
  return Scenario{std::move(name), std::move(market), std::move(network), std::move(ctrl), std::move(sim),
                  std::move(init)};
}

}  // namespace

Scenario parse_scenario(std::string_view text) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ParseError(e.mark.is_null() ? 0 : e.mark.line + 1, e.msg);
  }
  if (!root || root.IsNull()) throw ParseError(0, "empty scenario");
  try {
    return build(root);
  } catch (const YAML::Exception& e) {
    throw ParseError(e.mark.is_null() ? 0 : e.mark.line + 1, e.msg);
  }
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario(buffer.str());
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

// Shortest text that reads back to the same double.
std::string number(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void emit_vector(YAML::Emitter& out, const Vector& v) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Index i = 0; i < v.size(); ++i) out << number(v[i]);
  out << YAML::EndSeq;
}

void emit_pair(YAML::Emitter& out, Index a, Index b) {
  out << YAML::Flow << YAML::BeginSeq << (a + 1) << (b + 1) << YAML::EndSeq;
}

}  // namespace

std::string serialize_scenario(const Scenario& s) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  if (!s.name.empty()) out << YAML::Key << "name" << YAML::Value << s.name;

  out << YAML::Key << "market" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "Q_g" << YAML::Value;
  emit_vector(out, s.market.cost_quad());
  out << YAML::Key << "b_g" << YAML::Value;
  emit_vector(out, s.market.cost_lin());
  out << YAML::Key << "Q_d" << YAML::Value;
  emit_vector(out, s.market.utility_quad());
  out << YAML::Key << "b_d" << YAML::Value;
  emit_vector(out, s.market.utility_lin());
  out << YAML::EndMap;

  out << YAML::Key << "network" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "M" << YAML::Value;
  emit_vector(out, s.network.inertia());
  out << YAML::Key << "D" << YAML::Value;
  emit_vector(out, s.network.damping());
  out << YAML::Key << "edges" << YAML::Value << YAML::BeginSeq;
  for (const auto& e : s.network.edges()) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "nodes" << YAML::Value;
    emit_pair(out, e.from, e.to);
    out << YAML::Key << "potential" << YAML::Value
        << (e.potential.kind() == EdgePotential::Kind::Quadratic ? "quadratic" : "sinusoidal");
    out << YAML::Key << "weight" << YAML::Value << number(e.potential.weight()) << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::Key << "controller" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "tau" << YAML::Value;
  emit_vector(out, s.controller.tau);
  out << YAML::Key << "gain" << YAML::Value << to_string(s.controller.mode);
  if (s.controller.mode == GainMode::Explicit) {
    out << YAML::Key << "k" << YAML::Value;
    emit_vector(out, s.controller.gains);
  }
  out << YAML::Key << "comm_edges" << YAML::Value << YAML::BeginSeq;
  for (const auto& e : s.controller.edges) {
    out << YAML::Flow << YAML::BeginMap << YAML::Key << "nodes" << YAML::Value;
    emit_pair(out, e.a, e.b);
    out << YAML::Key << "rho" << YAML::Value << number(e.rho);
    out << YAML::Key << "kappa" << YAML::Value << number(e.kappa) << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;

  out << YAML::Key << "sim" << YAML::Value << YAML::BeginMap;
  out << YAML::Key << "t_end" << YAML::Value << number(s.sim.t_end);
  out << YAML::Key << "dt" << YAML::Value << number(s.sim.dt);
  out << YAML::Key << "record_every" << YAML::Value << s.sim.record_every;
  out << YAML::EndMap;

  out << YAML::Key << "initial" << YAML::Value;
  if (s.initial.at_equilibrium) {
    out << "equilibrium";
  } else {
    out << YAML::BeginMap;
    const std::pair<const char*, const Vector*> fields[] = {{"zeta", &s.initial.zeta},
                                                           {"y", &s.initial.y},
                                                           {"p", &s.initial.p},
                                                           {"chi", &s.initial.chi},
                                                           {"alpha_hat", &s.initial.slope_hat}};
    for (const auto& [key, vec] : fields) {
      if (vec->size() == 0) continue;
      out << YAML::Key << key << YAML::Value;
      emit_vector(out, *vec);
    }
    out << YAML::EndMap;
  }

  if (!s.sim.events.empty()) {
    out << YAML::Key << "events" << YAML::Value << YAML::BeginSeq;
    for (const auto& e : s.sim.events) {
      out << YAML::BeginMap << YAML::Key << "time" << YAML::Value << number(e.time);
      out << YAML::Key << "set" << YAML::Value << YAML::BeginMap;
      const std::pair<const char*, const std::optional<Vector>*> fields[] = {{"Q_g", &e.patch.cost_quad},
                                                                            {"b_g", &e.patch.cost_lin},
                                                                            {"Q_d", &e.patch.utility_quad},
                                                                            {"b_d", &e.patch.utility_lin}};
      for (const auto& [key, vec] : fields) {
        if (!*vec) continue;
        out << YAML::Key << key << YAML::Value;
        emit_vector(out, **vec);
      }
      out << YAML::EndMap << YAML::EndMap;
    }
    out << YAML::EndSeq;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

}  // namespace cournot
