#include "cournot/cournot.h"

#include "cournot/commands.hpp"
#include "cournot/errors.hpp"
#include "cournot/market.hpp"
#include "cournot/scenario.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <cstring>
#include <mutex>
#include <new>
#include <string>

struct cournot_market {
  cournot::MarketSpec spec;
};

struct cournot_scenario {
  cournot::Scenario scenario;
};

namespace {

thread_local std::string g_last_error;

cournot_status fail(cournot_status status, const char* what) {
  g_last_error = what;
  return status;
}

// Library log output goes to stderr; COURNOT_LOG_LEVEL picks the level
// (trace, debug, info, warn, error, off; default warn).
void configure_logging() {
  static std::once_flag once;
  std::call_once(once, [] {
    auto logger = spdlog::stderr_color_mt("cournot");
    const char* level = std::getenv("COURNOT_LOG_LEVEL");
    logger->set_level(level ? spdlog::level::from_str(level) : spdlog::level::warn);
    spdlog::set_default_logger(std::move(logger));
  });
}

// Runs `body` and maps escaping exceptions onto status codes.
template <class F>
cournot_status guarded(F&& body) {
  configure_logging();
  g_last_error.clear();
  try {
    return body();
  } catch (const cournot::ParseError& e) {
    return fail(COURNOT_ERR_PARSE, e.what());
  } catch (const cournot::InfeasibleError& e) {
    return fail(COURNOT_ERR_INFEASIBLE, e.what());
  } catch (const cournot::InvalidArgument& e) {
    return fail(COURNOT_ERR_INVALID_ARGUMENT, e.what());
  } catch (const cournot::IoError& e) {
    return fail(COURNOT_ERR_IO, e.what());
  } catch (const cournot::NumericalError& e) {
    return fail(COURNOT_ERR_NUMERIC, e.what());
  } catch (const std::bad_alloc&) {
    return fail(COURNOT_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(COURNOT_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(COURNOT_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

cournot::Vector to_vector(const double* data, std::size_t n) {
  return Eigen::Map<const cournot::Vector>(data, static_cast<cournot::Index>(n));
}

void copy_out(const cournot::Vector& v, double* out) {
  for (cournot::Index i = 0; i < v.size(); ++i) out[i] = v[i];
}

cournot_status from_outcome(cournot::Outcome outcome, const nlohmann::json& report) {
  switch (outcome) {
    case cournot::Outcome::Ok:
      return COURNOT_OK;
    case cournot::Outcome::Infeasible:
      g_last_error = report.value("error", std::string("no interior equilibrium"));
      return COURNOT_ERR_INFEASIBLE;
    case cournot::Outcome::VerificationFailed:
      g_last_error = "verification failed";
      return COURNOT_ERR_VERIFICATION;
  }
  return COURNOT_ERR_INTERNAL;
}

template <class Command>
cournot_status run_command(const cournot_scenario* scenario, char** report_json, Command&& command) {
  if (!scenario || !report_json) return fail(COURNOT_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const cournot::CommandResult result = command(scenario->scenario);
    *report_json = copy_string(result.report.dump(2));
    return from_outcome(result.outcome, result.report);
  });
}

}  // namespace

extern "C" {

const char* cournot_last_error(void) { return g_last_error.c_str(); }

const char* cournot_version(void) { return "1.0.0"; }

void cournot_string_free(char* s) { std::free(s); }

cournot_status cournot_market_create(size_t n, const double* cost_quad, const double* cost_lin,
                                     const double* utility_quad, const double* utility_lin, cournot_market** out) {
  if (!out || !cost_quad || !cost_lin || !utility_quad || !utility_lin) {
    return fail(COURNOT_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    *out = new cournot_market{cournot::MarketSpec(to_vector(cost_quad, n), to_vector(cost_lin, n),
                                                  to_vector(utility_quad, n), to_vector(utility_lin, n))};
    return COURNOT_OK;
  });
}

void cournot_market_destroy(cournot_market* market) { delete market; }

size_t cournot_market_size(const cournot_market* market) {
  return market ? static_cast<size_t>(market->spec.size()) : 0;
}

cournot_status cournot_market_clearing_price(const cournot_market* market, double* alpha, double* beta) {
  if (!market || !alpha || !beta) return fail(COURNOT_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto fn = cournot::market_clearing_price(market->spec);
    *alpha = fn.slope;
    *beta = fn.intercept;
    return COURNOT_OK;
  });
}

cournot_status cournot_market_demand(const cournot_market* market, double price, double* demand) {
  if (!market || !demand) return fail(COURNOT_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    copy_out(cournot::demand_response(market->spec, price), demand);
    return COURNOT_OK;
  });
}

cournot_status cournot_market_inverse_demand(const cournot_market* market, double q, double* price) {
  if (!market || !price) return fail(COURNOT_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *price = cournot::inverse_demand(market->spec)(q);
    return COURNOT_OK;
  });
}

cournot_status cournot_market_nash(const cournot_market* market, double* production, double* demand, double* price,
                                   int* interior) {
  if (!market || !production || !demand || !price) return fail(COURNOT_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    const auto nash = cournot::nash_closed_form(market->spec, cournot::market_clearing_price(market->spec));
    copy_out(nash.production, production);
    copy_out(nash.demand, demand);
    *price = nash.price;
    if (interior) *interior = nash.interior ? 1 : 0;
    return COURNOT_OK;
  });
}

cournot_status cournot_market_best_response(const cournot_market* market, size_t producer, const double* others,
                                            double* analytic) {
  if (!market || !analytic || (market->spec.size() > 1 && !others)) {
    return fail(COURNOT_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const auto n = static_cast<std::size_t>(market->spec.size());
    if (producer >= n) throw cournot::InvalidArgument("producer index out of range");
    const cournot::Vector rest = n > 1 ? to_vector(others, n - 1) : cournot::Vector();
    *analytic = cournot::best_response(market->spec, cournot::market_clearing_price(market->spec),
                                       static_cast<cournot::Index>(producer), rest);
    return COURNOT_OK;
  });
}

cournot_status cournot_market_best_response_grid(const cournot_market* market, size_t producer, const double* others,
                                                 double relative_step, double* argmax, double* step) {
  if (!market || !argmax || (market->spec.size() > 1 && !others)) {
    return fail(COURNOT_ERR_INVALID_ARGUMENT, "null argument");
  }
  return guarded([&] {
    const auto n = static_cast<std::size_t>(market->spec.size());
    if (producer >= n) throw cournot::InvalidArgument("producer index out of range");
    const cournot::Vector rest = n > 1 ? to_vector(others, n - 1) : cournot::Vector();
    const auto grid = cournot::best_response_oracle(market->spec, cournot::market_clearing_price(market->spec),
                                                    static_cast<cournot::Index>(producer), rest, relative_step);
    *argmax = grid.argmax;
    if (step) *step = grid.step;
    return COURNOT_OK;
  });
}

cournot_status cournot_scenario_load(const char* path, cournot_scenario** out) {
  if (!path || !out) return fail(COURNOT_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new cournot_scenario{cournot::load_scenario(path)};
    return COURNOT_OK;
  });
}

cournot_status cournot_scenario_parse(const char* text, cournot_scenario** out) {
  if (!text || !out) return fail(COURNOT_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new cournot_scenario{cournot::parse_scenario(text)};
    return COURNOT_OK;
  });
}

void cournot_scenario_destroy(cournot_scenario* scenario) { delete scenario; }

cournot_status cournot_scenario_serialize(const cournot_scenario* scenario, char** yaml) {
  if (!scenario || !yaml) return fail(COURNOT_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *yaml = copy_string(cournot::serialize_scenario(scenario->scenario));
    return COURNOT_OK;
  });
}

cournot_status cournot_scenario_final_market(const cournot_scenario* scenario, cournot_market** out) {
  if (!scenario || !out) return fail(COURNOT_ERR_INVALID_ARGUMENT, "null argument");
  return guarded([&] {
    *out = new cournot_market{scenario->scenario.final_market()};
    return COURNOT_OK;
  });
}

cournot_status cournot_scenario_nash(const cournot_scenario* scenario, char** report_json) {
  return run_command(scenario, report_json, [](const cournot::Scenario& s) { return cournot::run_nash(s); });
}

cournot_status cournot_scenario_equilibrium(const cournot_scenario* scenario, char** report_json) {
  return run_command(scenario, report_json, [](const cournot::Scenario& s) { return cournot::run_equilibrium(s); });
}

cournot_status cournot_scenario_simulate(const cournot_scenario* scenario, const char* out_dir, int plots,
                                         char** report_json) {
  if (!out_dir) return fail(COURNOT_ERR_INVALID_ARGUMENT, "null argument");
  return run_command(scenario, report_json, [&](const cournot::Scenario& s) {
    cournot::SimulateOptions options;
    options.plots = plots != 0;
    return cournot::run_simulate(s, out_dir, options);
  });
}

cournot_status cournot_scenario_verify(const cournot_scenario* scenario, char** report_json) {
  return run_command(scenario, report_json, [](const cournot::Scenario& s) { return cournot::run_verify(s); });
}

}  // extern "C"
