#ifndef ISSPARABOLIC_H
#define ISSPARABOLIC_H

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum IspStatus {
  ISP_STATUS_OK = 0,
  ISP_STATUS_NULL_POINTER = 1,
  ISP_STATUS_INVALID_UTF8 = 2,
  ISP_STATUS_INVALID_ARGUMENT = 3,
  ISP_STATUS_PARSE_ERROR = 4,
  ISP_STATUS_EVAL_ERROR = 5,
  ISP_STATUS_LOAD_ERROR = 6,
  ISP_STATUS_VALIDATION_FAILED = 7,
  ISP_STATUS_SOLVER_FAILED = 8,
  ISP_STATUS_BOUND_VIOLATED = 9,
  ISP_STATUS_ESTIMATOR_FAILED = 10,
  ISP_STATUS_BUFFER_TOO_SMALL = 11,
  ISP_STATUS_IO_ERROR = 12,
  ISP_STATUS_PANIC = 13,
} IspStatus;

// Free variable selector.
typedef enum IspVariable {
  ISP_VARIABLE_R = 0,
  ISP_VARIABLE_T = 1,
  ISP_VARIABLE_U = 2,
} IspVariable;

// Boundary operator selector.
typedef enum IspBoundaryKind {
  ISP_BOUNDARY_KIND_ROBIN = 0,
  ISP_BOUNDARY_KIND_NEUMANN = 1,
  ISP_BOUNDARY_KIND_DIRICHLET = 2,
} IspBoundaryKind;

// Per-time series of a trajectory.
typedef enum IspColumn {
  ISP_COLUMN_TIME = 0,
  ISP_COLUMN_L2_NORM = 1,
  ISP_COLUMN_SUP_NORM = 2,
  ISP_COLUMN_BOUNDARY_VALUE = 3,
} IspColumn;

// Parsed expression in `r`, `t` and `u`.
typedef struct IspExpression IspExpression;

// Loaded scenario.
typedef struct IspScenario IspScenario;

// Solution trajectory of a simulation.
typedef struct IspTrajectory IspTrajectory;

// ISS envelope at one horizon. `epsilon` is NaN unless the Neumann
// envelope was evaluated.
typedef struct IspIssEstimate {
  double horizon;
  double decay_rate;
  double transient;
  double gain_d;
  double gain_f;
  double total;
  double epsilon;
} IspIssEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread; empty if none. The pointer
// stays valid until the next failing call on the same thread.
const char *isp_last_error(void);

// Library version as a static NUL-terminated string.
const char *isp_version(void);

// Parses `text` into a new expression handle stored in `*out`.
enum IspStatus isp_expression_parse(const char *text, struct IspExpression **out);

// Evaluates at `(r, t, u)`.
enum IspStatus isp_expression_eval(const struct IspExpression *expr,
                                   double r,
                                   double t,
                                   double u,
                                   double *out);

// Symbolic derivative with respect to `var`, as a new handle.
enum IspStatus isp_expression_derivative(const struct IspExpression *expr,
                                         enum IspVariable var,
                                         struct IspExpression **out);

// Writes the canonical text of `expr` into `buf` (NUL-terminated).
// `*needed` receives the required size including the NUL; if `capacity`
// is too small nothing is written and `BufferTooSmall` is returned.
enum IspStatus isp_expression_to_string(const struct IspExpression *expr,
                                        char *buf,
                                        size_t capacity,
                                        size_t *needed);

void isp_expression_free(struct IspExpression *expr);

// Loads a scenario file.
enum IspStatus isp_scenario_load(const char *path, struct IspScenario **out);

// Parses scenario text.
enum IspStatus isp_scenario_parse(const char *text, struct IspScenario **out);

// The built-in superlinear example with the given boundary kind and
// disturbance amplitude.
enum IspStatus isp_scenario_example(enum IspBoundaryKind kind,
                                    double amplitude,
                                    struct IspScenario **out);

void isp_scenario_free(struct IspScenario *scenario);

// Effective trace constant of the scenario (declared or estimated).
enum IspStatus isp_scenario_trace_constant(const struct IspScenario *scenario, double *out);

// Runs the validators. Returns `Ok` when all pass and `ValidationFailed`
// otherwise; the failing checks are named in the last error.
enum IspStatus isp_scenario_validate(const struct IspScenario *scenario);

// ISS envelope of the scenario's boundary kind at horizon `horizon`.
enum IspStatus isp_scenario_iss_bound(const struct IspScenario *scenario,
                                      double sup_f,
                                      double sup_d,
                                      double sup_phi,
                                      double l2_phi,
                                      double horizon,
                                      struct IspIssEstimate *out);

// Solves the scenario. On solver failure `SolverFailed` is returned and
// `*out` holds the partial trajectory, which must still be freed.
enum IspStatus isp_simulate(const struct IspScenario *scenario, struct IspTrajectory **out);

// Number of recorded times.
size_t isp_trajectory_len(const struct IspTrajectory *traj);

// Copies one per-time series into `buf`, which must hold at least
// `isp_trajectory_len` values.
enum IspStatus isp_trajectory_copy_column(const struct IspTrajectory *traj,
                                          enum IspColumn column,
                                          double *buf,
                                          size_t capacity);

void isp_trajectory_free(struct IspTrajectory *traj);

// Runs the full verification pipeline. Writes `report.csv` to `out_dir`
// unless it is NULL. Returns `Ok` if every check passes, `BoundViolated`
// if one fails; `*passed_claims`/`*total_claims` receive the counts when
// non-NULL.
enum IspStatus isp_verify_iss(const struct IspScenario *scenario,
                              const char *out_dir,
                              int *passed_claims,
                              int *total_claims);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ISSPARABOLIC_H */
