/* C interface to the quantized controller synthesizer.
 *
 * Every function returns a qs_status. On failure a message is available
 * from qs_last_error() until the next call on the same thread. Strings
 * written into caller buffers are always NUL terminated; QS_ERR_INVALID_ARGUMENT
 * is returned when a buffer is too small.
 */
#ifndef QSYNTH_H
#define QSYNTH_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define QS_API __attribute__((visibility("default")))
#else
#define QS_API
#endif

typedef enum qs_status {
  QS_OK = 0,
  QS_ERR_INVALID_ARGUMENT = 1,
  QS_ERR_MODEL = 2,
  QS_ERR_INFEASIBLE = 3,
  QS_ERR_SOLVER = 4,
  QS_ERR_IO = 5,
  QS_ERR_HASH_MISMATCH = 6,
  QS_ERR_INTERNAL = 7
} qs_status;

typedef enum qs_outcome { QS_SOL = 0, QS_NOSOL = 1, QS_UNK = 2 } qs_outcome;
typedef enum qs_variant { QS_VARIANT_MIN = 0, QS_VARIANT_MAX = 1 } qs_variant;
typedef enum qs_disturbance {
  QS_DISTURB_NOMINAL = 0,
  QS_DISTURB_PER_TRIAL = 1,
  QS_DISTURB_PER_STEP = 2
} qs_disturbance;

typedef struct qs_model qs_model;

QS_API const char* qs_version(void);
QS_API const char* qs_last_error(void);
QS_API const char* qs_status_string(qs_status s);

/* "trace", "debug", "info", "warn", "error", "off". */
QS_API qs_status qs_set_log_level(const char* level);

/* Newline-separated built-in model names. */
QS_API qs_status qs_models_list(char* buf, size_t len);

/* name: buck, buck-robust, multibuck:n, multibuck-robust:n; inputs gives n
 * for multibuck names without ":n" and is otherwise 0. */
QS_API qs_status qs_model_builtin(const char* name, int inputs, qs_model** out);
QS_API qs_status qs_model_load(const char* path, qs_model** out);
QS_API void qs_model_free(qs_model* m);
QS_API qs_status qs_model_hash(const qs_model* m, char* buf, size_t len);
QS_API qs_status qs_model_name(const qs_model* m, char* buf, size_t len);
QS_API qs_status qs_model_dims(const qs_model* m, int* states, int* inputs, int* aux);
/* Canonical JSON model document. */
QS_API qs_status qs_model_json(const qs_model* m, char* buf, size_t len);

typedef struct qs_synth_options {
  const char* model; /* built-in name or model file path */
  int bits;
  int inputs;
  double goal_vref;
  double goal_eps;
  qs_variant variant;
  int exact;
  long budget_nodes;
  int jobs;
  unsigned long long seed;
  const char* out; /* artifact directory */
} qs_synth_options;

typedef struct qs_synth_result {
  qs_outcome outcome;
  int empty_goal;
  unsigned long long cells;
  unsigned long long controllable_cells;
  int max_rank;
  long arcs;
  long max_loops;
  double loop_frac;
  double cpu_seconds;
  long mem_kb;
  unsigned long source_lines;
  long budget_events;
  char model_hash[17];
  char config_hash[17];
} qs_synth_result;

QS_API void qs_synth_options_default(qs_synth_options* o);
/* Runs synthesis and writes the artifact set into o->out. */
QS_API qs_status qs_synth(const qs_synth_options* o, qs_synth_result* r);

typedef struct qs_sim_options {
  const char* controller; /* controller.csv written by qs_synth */
  const double* initial;  /* NULL: random starts inside the region */
  int initial_len;
  int steps;
  int trials;
  qs_disturbance disturbance;
} qs_sim_options;

typedef struct qs_sim_result {
  int trials;
  int violations;
  int faults;
  int reached;
  int reached_within_bound;
  int left_goal;
  int max_steps_to_goal;
} qs_sim_result;

QS_API void qs_sim_options_default(qs_sim_options* o);
/* Simulates the controller in s->controller on the model of o and writes
 * trace.csv and summary.txt into o->out. QS_ERR_HASH_MISMATCH when the
 * controller belongs to another model. */
QS_API qs_status qs_simulate(const qs_synth_options* o, const qs_sim_options* s, qs_sim_result* r);

/* Region CSV of a controller file, written to out_path. */
QS_API qs_status qs_region(const qs_synth_options* o, const char* controller, const char* out_path,
                           unsigned long long* controllable_cells);

#ifdef __cplusplus
}
#endif

#endif /* QSYNTH_H */
