#ifndef ENTDECON_H
#define ENTDECON_H

#include <stddef.h>

#if defined(ENTDECON_BUILDING_LIBRARY)
#define ENTDECON_API __attribute__((visibility("default")))
#else
#define ENTDECON_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ed_status {
  ED_OK = 0,
  ED_INVALID_ARGUMENT = 1,
  ED_DIMENSION_MISMATCH = 2,
  ED_INFEASIBLE = 3,
  ED_NOT_CONVERGED = 4,
  ED_IO = 5,
  ED_PARSE = 6,
  ED_INTERNAL = 7
} ed_status;

typedef struct ed_measure ed_measure;

ENTDECON_API const char* ed_version(void);
ENTDECON_API const char* ed_status_name(ed_status status);
// Message of the last failing call on this thread; "" if none.
ENTDECON_API const char* ed_last_error(void);

// atoms: n points of dimension dim, row-major. Weights must sum to 1.
ENTDECON_API ed_status ed_measure_create(size_t dim, size_t n, const double* atoms, const double* weights,
                                         ed_measure** out);
// Measure JSON file, or a sample CSV (read as its empirical measure).
ENTDECON_API ed_status ed_measure_load(const char* path, ed_measure** out);
ENTDECON_API void ed_measure_free(ed_measure* m);
ENTDECON_API size_t ed_measure_size(const ed_measure* m);
ENTDECON_API size_t ed_measure_dim(const ed_measure* m);
// Copies size() weights / size()*dim() coordinates into out.
ENTDECON_API ed_status ed_measure_weights(const ed_measure* m, double* out);
ENTDECON_API ed_status ed_measure_atoms(const ed_measure* m, double* out);

// Cost and noise specs are JSON objects such as {"kind":"gaussian","sigma2":1}.
// tolerance <= 0 and max_iterations == 0 select the defaults. Either output
// pointer may be NULL.
ENTDECON_API ed_status ed_sinkhorn(const ed_measure* mu, const ed_measure* nu, const char* cost_json, double sigma2,
                                   double tolerance, size_t max_iterations, double* objective,
                                   double* marginal_error);
ENTDECON_API ed_status ed_relaxed(const ed_measure* p, const ed_measure* nu, const char* cost_json, double sigma2,
                                  double* value);
// points: n observations of dimension ed_measure_dim(p), row-major.
ENTDECON_API ed_status ed_log_likelihood(const ed_measure* p, size_t n, const double* points, const char* noise_json,
                                         double* value);

// Runs one command from a JSON run configuration. ED_OK means the command
// ran; its outcome is *exit_code, and *report receives the rendered report
// (free with ed_string_free). Failures inside the command leave ED_OK with a
// nonzero exit code and the message in ed_last_error().
ENTDECON_API ed_status ed_run_json(const char* config_json, char** report, int* exit_code);
ENTDECON_API void ed_string_free(char* s);

#ifdef __cplusplus
}
#endif

#endif
