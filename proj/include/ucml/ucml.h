/*
  Copyright 2026 The ucml Authors

  Licensed under the Apache License, Version 2.0 (the "License");
  you may not use this file except in compliance with the License.
  You may obtain a copy of the License at

  http://www.apache.org/licenses/LICENSE-2.0

  Unless required by applicable law or agreed to in writing, software
  distributed under the License is distributed on an "AS IS" BASIS,
  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
  See the License for the specific language governing permissions and
  limitations under the License.
*/

#ifndef UCML_UCML_H_
#define UCML_UCML_H_

/* C interface to the unidirectionally coupled map lattice library.
 *
 * Every fallible call returns a ucml_status. On failure the calling thread's
 * message is available from ucml_last_error() until its next failing call.
 * Objects are opaque handles released with the matching *_destroy function;
 * strings returned through char** are released with ucml_string_free. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define UCML_API __declspec(dllexport)
#else
#define UCML_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ucml_status {
  UCML_OK = 0,
  UCML_ERR_INVALID_ARGUMENT = 1,
  UCML_ERR_DOMAIN = 2,
  UCML_ERR_NO_ROOT = 3,
  UCML_ERR_IO = 4,
  UCML_ERR_NOT_CONVERGED = 5,
  UCML_ERR_INSUFFICIENT_DATA = 6,
  UCML_ERR_INTERNAL = 99
} ucml_status;

UCML_API const char* ucml_version(void);
UCML_API const char* ucml_status_string(ucml_status status);
UCML_API const char* ucml_last_error(void);
UCML_API void ucml_string_free(char* s);

/* ---- model ------------------------------------------------------------ */

typedef struct ucml_params {
  double alpha;
  double h;
  double delta;
} ucml_params;

/* alpha = 0, h = 2.1, delta = 0.1 */
UCML_API ucml_params ucml_default_params(void);
UCML_API ucml_status ucml_validate_params(const ucml_params* params);

UCML_API ucml_status ucml_onsite_map(const ucml_params* params, double x,
                                     double* out);
UCML_API ucml_status ucml_coupling_map(const ucml_params* params, double x,
                                       double* out);
/* x[0..2] = 0, h*delta/(h-1), h*(2+delta)/(1+h); stable[k] nonzero if stable */
UCML_API ucml_status ucml_fixed_points(const ucml_params* params, double x[3],
                                       int stable[3]);
UCML_API ucml_status ucml_single_site_lifetime(const ucml_params* params,
                                               double* tau_s);

/* ---- thresholds and velocity laws ------------------------------------- */

typedef struct ucml_saddle_node {
  double alpha_sn;
  double x_fixed;
  double value_residual;
  double slope_residual;
} ucml_saddle_node;

typedef struct ucml_intermittency {
  double a;
  double nu_c;
  double A;
  double xi;
} ucml_intermittency;

UCML_API ucml_intermittency ucml_default_intermittency(void);
UCML_API ucml_status ucml_find_saddle_node(double delta, ucml_saddle_node* out);
UCML_API ucml_status ucml_alpha_puff_threshold(const ucml_params* params,
                                               double* alpha_p);
UCML_API ucml_status ucml_scan_puff_threshold(const ucml_params* params,
                                              double alpha_lo, double alpha_hi,
                                              double step, int horizon,
                                              double* alpha_below,
                                              double* alpha_above);
UCML_API ucml_status ucml_trailing_velocity_theory(double h, double* v_t);
/* fit may be NULL for the default constants. */
UCML_API ucml_status ucml_leading_velocity_theory(
    double alpha, double delta, const ucml_intermittency* fit, double* v_l);

/* ---- lattice ---------------------------------------------------------- */

typedef struct ucml_lattice ucml_lattice;

UCML_API ucml_status ucml_lattice_create(const ucml_params* params,
                                         const double* sites, size_t count,
                                         ucml_lattice** out);
UCML_API void ucml_lattice_destroy(ucml_lattice* lattice);
UCML_API ucml_status ucml_lattice_advance(ucml_lattice* lattice,
                                          int64_t steps);
/* leading/trailing are -1 once the lattice is laminar. */
UCML_API ucml_status ucml_lattice_state(const ucml_lattice* lattice,
                                        int64_t* time, int* laminar,
                                        int64_t* leading, int64_t* trailing);
UCML_API ucml_status ucml_lattice_value(const ucml_lattice* lattice,
                                        int64_t site, double* value);

/* ---- trajectories ----------------------------------------------------- */

typedef enum ucml_ic_kind {
  UCML_IC_SINGLE_SITE = 0,
  UCML_IC_FIXED_KICK = 1,
  UCML_IC_MULTI_SITE = 2,
  UCML_IC_EXPLICIT = 3
} ucml_ic_kind;

typedef struct ucml_ic {
  ucml_ic_kind kind;
  double value;          /* fixed kick */
  int count;             /* multi-site */
  const double* profile; /* explicit */
  size_t profile_len;
  uint64_t seed;
  double jitter;         /* fixed kick: uniform offset half-width */
} ucml_ic;

UCML_API ucml_ic ucml_default_ic(void);

typedef enum ucml_cause {
  UCML_DECAYED = 0,
  UCML_MAX_TIME = 1,
  UCML_WIDTH_LIMIT = 2
} ucml_cause;

typedef enum ucml_label { UCML_DECAY = 0, UCML_PUFF = 1, UCML_SLUG = 2 } ucml_label;

typedef struct ucml_classification {
  ucml_label label;
  int long_lived;
  double v_l;
  double v_t;
  double width_slope;
} ucml_classification;

typedef struct ucml_trajectory ucml_trajectory;

UCML_API ucml_status ucml_run_trajectory(const ucml_params* params,
                                         const ucml_ic* ic, int64_t max_time,
                                         ucml_trajectory** out);
UCML_API void ucml_trajectory_destroy(ucml_trajectory* trajectory);
/* steps = number of recorded time points (t = 0 .. steps - 1). */
UCML_API ucml_status ucml_trajectory_info(const ucml_trajectory* trajectory,
                                          int64_t* lifetime, ucml_cause* cause,
                                          size_t* steps);
/* Copies up to cap entries of each non-NULL array. */
UCML_API ucml_status ucml_trajectory_edges(const ucml_trajectory* trajectory,
                                           int64_t* leading, int64_t* trailing,
                                           int64_t* active, size_t cap);
UCML_API ucml_status ucml_trajectory_velocities(
    const ucml_trajectory* trajectory, int64_t begin, int64_t end, double* v_l,
    double* v_t);
UCML_API ucml_status ucml_trajectory_classify(const ucml_trajectory* trajectory,
                                              ucml_classification* out);

/* ---- ensembles -------------------------------------------------------- */

typedef struct ucml_ensemble_options {
  size_t n;
  uint64_t master_seed;
  int64_t max_time;
  int64_t width_limit; /* 0 = off */
  unsigned threads;    /* 0 = UCML_THREADS or hardware concurrency */
} ucml_ensemble_options;

typedef struct ucml_sample {
  uint64_t seed;
  int64_t lifetime;
  ucml_cause cause;
  ucml_label label;
  int long_lived;
} ucml_sample;

typedef struct ucml_lifetime_fit {
  double rate;
  double rate_lo;
  double rate_hi;
  double tau;
  double tau_lo;
  double tau_hi;
  double sample_mean;
  int64_t origin;
  size_t events;
  size_t censored;
  double ks_statistic;
  double ks_p_value;
} ucml_lifetime_fit;

typedef struct ucml_ensemble ucml_ensemble;

UCML_API ucml_status ucml_run_ensemble(const ucml_params* params,
                                       const ucml_ic* ic,
                                       const ucml_ensemble_options* options,
                                       ucml_ensemble** out);
UCML_API void ucml_ensemble_destroy(ucml_ensemble* ensemble);
UCML_API size_t ucml_ensemble_size(const ucml_ensemble* ensemble);
UCML_API ucml_status ucml_ensemble_sample(const ucml_ensemble* ensemble,
                                          size_t index, ucml_sample* out);
/* origin < 0 selects the default (smallest lifetime minus one). */
UCML_API ucml_status ucml_ensemble_fit(const ucml_ensemble* ensemble,
                                       int64_t origin, ucml_lifetime_fit* out);

/* ---- sweeps ----------------------------------------------------------- */

typedef struct ucml_config ucml_config;
typedef void (*ucml_log_fn)(const char* message, void* user);

UCML_API ucml_status ucml_config_create(const char* command, ucml_config** out);
/* Accepts a config object, an output JSON document or a "# config:" line. */
UCML_API ucml_status ucml_config_from_text(const char* text, ucml_config** out);
UCML_API void ucml_config_destroy(ucml_config* config);

/* Keys follow the JSON config names; nested ones are flattened
 * (slug_window, scan_step, start_a, velocity_begin, ...). Axes (alpha, h,
 * delta_alpha) and ic_profile are set as text: "v", "a,b,c" or
 * "lo:hi:step". Execution keys: out (string), threads and resume (int). */
UCML_API ucml_status ucml_config_set_double(ucml_config* config,
                                            const char* key, double value);
UCML_API ucml_status ucml_config_set_int(ucml_config* config, const char* key,
                                         int64_t value);
UCML_API ucml_status ucml_config_set_seed(ucml_config* config, uint64_t seed);
UCML_API ucml_status ucml_config_set_string(ucml_config* config,
                                            const char* key, const char* value);
UCML_API ucml_status ucml_config_get_command(const ucml_config* config,
                                             char** command);
UCML_API ucml_status ucml_config_to_json(const ucml_config* config,
                                         char** json);
UCML_API const char* const* ucml_command_names(size_t* count);

/* Runs the configured command; summary (may be NULL) receives a JSON text. */
UCML_API ucml_status ucml_run_command(const ucml_config* config,
                                      ucml_log_fn log, void* user,
                                      char** summary);

#ifdef __cplusplus
}
#endif

#endif /* UCML_UCML_H_ */
