#ifndef COURNOT_H
#define COURNOT_H

/* C interface to the Cournot market / swing-network pricing library.
 *
 * Handles are opaque and owned by the caller. Every function returns a
 * cournot_status; on failure cournot_last_error() describes the cause (per
 * thread, valid until the next call on that thread). Strings returned through
 * char** out-parameters are released with cournot_string_free. */

#include <stddef.h>

#if defined(_WIN32)
#  if defined(COURNOT_BUILDING)
#    define COURNOT_API __declspec(dllexport)
#  else
#    define COURNOT_API __declspec(dllimport)
#  endif
#else
#  define COURNOT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum cournot_status {
  COURNOT_OK = 0,
  COURNOT_ERR_PARSE = 2,
  COURNOT_ERR_INFEASIBLE = 3,
  COURNOT_ERR_VERIFICATION = 4,
  COURNOT_ERR_INVALID_ARGUMENT = 5,
  COURNOT_ERR_IO = 6,
  COURNOT_ERR_NUMERIC = 7,
  COURNOT_ERR_INTERNAL = 8
} cournot_status;

typedef struct cournot_market cournot_market;
typedef struct cournot_scenario cournot_scenario;

COURNOT_API const char* cournot_last_error(void);
COURNOT_API const char* cournot_version(void);
COURNOT_API void cournot_string_free(char* s);

/* ---- market ------------------------------------------------------------ */

/* Q_g, b_g, Q_d, b_d each of length n. */
COURNOT_API cournot_status cournot_market_create(size_t n, const double* cost_quad, const double* cost_lin,
                                                 const double* utility_quad, const double* utility_lin,
                                                 cournot_market** out);
COURNOT_API void cournot_market_destroy(cournot_market* market);
COURNOT_API size_t cournot_market_size(const cournot_market* market);

/* Market-clearing price p = beta - alpha * total production. */
COURNOT_API cournot_status cournot_market_clearing_price(const cournot_market* market, double* alpha, double* beta);

/* demand[i] = max(0, (b_d[i] - price) / Q_d[i]); `demand` holds n entries. */
COURNOT_API cournot_status cournot_market_demand(const cournot_market* market, double price, double* demand);

/* Piecewise-linear inverse demand evaluated at total demand q >= 0. */
COURNOT_API cournot_status cournot_market_inverse_demand(const cournot_market* market, double q, double* price);

/* Closed-form Cournot-Nash triple. production and demand hold n entries;
 * interior is set to 1 when every entry is strictly positive. Not-interior
 * markets still fill the outputs and return COURNOT_OK. */
COURNOT_API cournot_status cournot_market_nash(const cournot_market* market, double* production, double* demand,
                                               double* price, int* interior);

/* Producer i's profit-maximizing output against fixed `others` (n-1
 * entries), analytically and on a grid of relative spacing `relative_step`. */
COURNOT_API cournot_status cournot_market_best_response(const cournot_market* market, size_t producer,
                                                        const double* others, double* analytic);
COURNOT_API cournot_status cournot_market_best_response_grid(const cournot_market* market, size_t producer,
                                                             const double* others, double relative_step,
                                                             double* argmax, double* step);

/* ---- scenarios --------------------------------------------------------- */

COURNOT_API cournot_status cournot_scenario_load(const char* path, cournot_scenario** out);
COURNOT_API cournot_status cournot_scenario_parse(const char* text, cournot_scenario** out);
COURNOT_API void cournot_scenario_destroy(cournot_scenario* scenario);
COURNOT_API cournot_status cournot_scenario_serialize(const cournot_scenario* scenario, char** yaml);
/* Market in force after all scheduled events. Caller destroys it. */
COURNOT_API cournot_status cournot_scenario_final_market(const cournot_scenario* scenario, cournot_market** out);

/* Commands. Each writes a JSON report to *report_json (also on
 * COURNOT_ERR_INFEASIBLE and COURNOT_ERR_VERIFICATION). */
COURNOT_API cournot_status cournot_scenario_nash(const cournot_scenario* scenario, char** report_json);
COURNOT_API cournot_status cournot_scenario_equilibrium(const cournot_scenario* scenario, char** report_json);
COURNOT_API cournot_status cournot_scenario_simulate(const cournot_scenario* scenario, const char* out_dir, int plots,
                                                     char** report_json);
COURNOT_API cournot_status cournot_scenario_verify(const cournot_scenario* scenario, char** report_json);

#ifdef __cplusplus
}
#endif

#endif
