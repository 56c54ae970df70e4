#ifndef GRAPH_NLS_H
#define GRAPH_NLS_H

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define GNLS_OK 0

#define GNLS_NULL_POINTER 1

#define GNLS_INVALID_UTF8 2

#define GNLS_PARSE_ERROR 3

#define GNLS_INVALID_ARGUMENT 4

#define GNLS_BELOW_THRESHOLD 5

#define GNLS_NUMERICAL_ERROR 6

#define GNLS_UNCONVERGED 7

#define GNLS_PANIC 99

#define GNLS_PLACEMENT_LONGEST_EDGE 0

#define GNLS_PLACEMENT_MULTI_EDGE 1

#define GNLS_STATUS_CONVERGED 0

#define GNLS_STATUS_UNCONVERGED 1

#define GNLS_STATUS_STALLED 2

#define GNLS_STATUS_VANISHING 3

// Distinct bound states returned by [`gnls_solve`], by increasing energy.
typedef struct GnlsBoundStates GnlsBoundStates;

// A parsed metric graph.
typedef struct GnlsGraph GnlsGraph;

// A finite-element mesh over a graph.
typedef struct GnlsMesh GnlsMesh;

typedef struct GnlsSolitonInfo {
  double p;
  double mu;
  double lambda;
  double amplitude;
  double rate;
  double energy;
  // Zero of the Lagrangian density.
  double sign_point;
} GnlsSolitonInfo;

typedef struct GnlsSolveOptions {
  double mu;
  double p;
  uint32_t k;
  double tolerance;
  uint32_t max_iterations;
  uint32_t theta_samples;
  uint64_t seed;
  int32_t placement;
  // Solve even when `mu` is below the threshold for `k`.
  bool force;
} GnlsSolveOptions;

typedef struct GnlsStateSummary {
  double energy;
  double lambda;
  double mass;
  double mass_error;
  double j_residual;
  double max_kirchhoff;
  double sup_norm;
  int32_t status;
} GnlsStateSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *gnls_version(void);

// Message describing the last failure on this thread, or null. The
// pointer stays valid until the next `gnls_*` call on the same thread.
const char *gnls_last_error_message(void);

// Parses a graph description.
//
// # Safety
// `json` must be a NUL-terminated string and `out` a writable pointer.
int32_t gnls_graph_from_json(const char *json, struct GnlsGraph **out);

// # Safety
// `graph` must be null or a handle from [`gnls_graph_from_json`] not yet freed.
void gnls_graph_free(struct GnlsGraph *graph);

// # Safety
// `graph` must be a live handle; `out` writable.
int32_t gnls_graph_edge_count(const struct GnlsGraph *graph, size_t *out);

// Index and length of the longest bounded edge.
//
// # Safety
// `graph` must be a live handle; `index` and `length` writable.
int32_t gnls_graph_longest_core_edge(const struct GnlsGraph *graph, size_t *index, double *length);

// Closed-form constants of the line soliton of mass `mu`.
//
// # Safety
// `out` must be writable.
int32_t gnls_soliton_info(double p, double mu, struct GnlsSolitonInfo *out);

// Smallest mass for which the cut-off soliton on an edge of length `ell`
// has certified negative energy.
//
// # Safety
// `out` must be writable.
int32_t gnls_mass_threshold(double p, double ell, double *out);

// Mass threshold for the `k`-slot seed family on `graph`.
//
// # Safety
// `graph` must be a live handle; `out` writable.
int32_t gnls_mass_threshold_k(const struct GnlsGraph *graph, uint32_t k, double p, int32_t placement, double *out);

// Upper bound for the `j`-th min-max level built from `k` slots.
//
// # Safety
// `graph` must be a live handle; `out` writable.
int32_t gnls_level_bound(const struct GnlsGraph *graph, uint32_t k, uint32_t j, double mu, double p, double *out);

// Meshes `graph` with cells of size at most `h`, truncating half-lines
// at `truncation`.
//
// # Safety
// `graph` must be a live handle; `out` writable.
int32_t gnls_mesh_new(const struct GnlsGraph *graph, double h, double truncation, struct GnlsMesh **out);

// # Safety
// `mesh` must be null or a handle from [`gnls_mesh_new`] not yet freed.
void gnls_mesh_free(struct GnlsMesh *mesh);

// # Safety
// `mesh` must be a live handle; `out` writable.
int32_t gnls_mesh_dof_count(const struct GnlsMesh *mesh, size_t *out);

// Defaults matching the command-line solver.
struct GnlsSolveOptions gnls_solve_options_default(double mu, double p, uint32_t k);

// Runs the multistart search for levels `1..=k`. Returns
// `GNLS_UNCONVERGED` (with `*out` still set) when fewer than `k` distinct
// states were found.
//
// # Safety
// `mesh` must be a live handle, `options` readable, `out` writable.
int32_t gnls_solve(const struct GnlsMesh *mesh, const struct GnlsSolveOptions *options, struct GnlsBoundStates **out);

// # Safety
// `states` must be a live handle; `out` writable.
int32_t gnls_states_count(const struct GnlsBoundStates *states, size_t *out);

// # Safety
// `states` must be a live handle; `out` writable.
int32_t gnls_state_summary(const struct GnlsBoundStates *states, size_t index, struct GnlsStateSummary *out);

// Copies the nodal values of state `index` into `buffer`. `*written`
// receives the number of values; pass a null buffer to query it.
//
// # Safety
// `states` must be a live handle; `buffer` null or writable for
// `capacity` doubles; `written` writable.
int32_t gnls_state_values(const struct GnlsBoundStates *states, size_t index, double *buffer, size_t capacity, size_t *written);

// # Safety
// `states` must be null or a handle from [`gnls_solve`] not yet freed.
void gnls_states_free(struct GnlsBoundStates *states);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRAPH_NLS_H */
