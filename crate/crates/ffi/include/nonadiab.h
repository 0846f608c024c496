#ifndef NONADIAB_H
#define NONADIAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum {
  NONADIAB_STATUS_OK = 0,
  NONADIAB_STATUS_NULL_POINTER = 1,
  NONADIAB_STATUS_INVALID_UTF8 = 2,
  NONADIAB_STATUS_CONFIG = 3,
  NONADIAB_STATUS_NUMERICAL = 4,
  NONADIAB_STATUS_INCOMPATIBLE = 5,
  NONADIAB_STATUS_IO = 6,
  NONADIAB_STATUS_DATA = 7,
  NONADIAB_STATUS_BUFFER_TOO_SMALL = 8,
  NONADIAB_STATUS_PANIC = 9,
} NonadiabStatus;

// Parsed run configuration.
typedef struct NonadiabConfig NonadiabConfig;

// Trajectory ensemble advanced step by step.
typedef struct NonadiabEnsemble NonadiabEnsemble;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer stays
// valid until the next failing call on the same thread.
const char *nonadiab_last_error(void);

// Library version as a static NUL-terminated string.
const char *nonadiab_version(void);

// Parses configuration text. On success `*out` owns a new handle.
//
// # Safety
// `text` must be a NUL-terminated string and `out` a valid pointer.
NonadiabStatus nonadiab_config_parse(const char *text, NonadiabConfig **out);

// # Safety
// `cfg` must come from [`nonadiab_config_parse`] and not be used afterwards.
void nonadiab_config_free(NonadiabConfig *cfg);

// Overrides the random seed.
//
// # Safety
// `cfg` must be a live handle.
NonadiabStatus nonadiab_config_set_seed(NonadiabConfig *cfg, uint64_t seed);

// Overrides the output directory.
//
// # Safety
// `cfg` must be a live handle and `dir` a NUL-terminated string.
NonadiabStatus nonadiab_config_set_output_dir(NonadiabConfig *cfg, const char *dir);

// Writes the configuration hash (64 hex digits plus NUL) into `buf`.
//
// # Safety
// `cfg` must be a live handle and `buf` valid for `len` bytes.
NonadiabStatus nonadiab_config_hash(const NonadiabConfig *cfg, char *buf, uintptr_t len);

// Runs the configured method to completion and writes the output files.
// `threads == 0` uses every available core.
//
// # Safety
// `cfg` must be a live handle.
NonadiabStatus nonadiab_run(const NonadiabConfig *cfg, uintptr_t threads);

// Samples the initial ensemble of a trajectory method.
//
// # Safety
// `cfg` must be a live handle and `out` a valid pointer.
NonadiabStatus nonadiab_ensemble_new(const NonadiabConfig *cfg, NonadiabEnsemble **out);

// # Safety
// `ens` must come from [`nonadiab_ensemble_new`] and not be used afterwards.
void nonadiab_ensemble_free(NonadiabEnsemble *ens);

// Advances the ensemble by `steps` time steps. Stops at the first failure.
//
// # Safety
// `ens` must be a live handle.
NonadiabStatus nonadiab_ensemble_step(NonadiabEnsemble *ens, uintptr_t steps);

// Number of trajectories, or 0 for a null handle.
//
// # Safety
// `ens` must be null or a live handle.
uintptr_t nonadiab_ensemble_len(const NonadiabEnsemble *ens);

// Current time (a.u.), population of each state and the decoherence
// indicator.
//
// # Safety
// `ens` must be a live handle; the output pointers must be valid.
NonadiabStatus nonadiab_ensemble_observables(const NonadiabEnsemble *ens,
                                             double *time,
                                             double (*populations)[2],
                                             double *coherence);

// Copies the trajectory positions into `buf`, which must hold at least
// [`nonadiab_ensemble_len`] values.
//
// # Safety
// `ens` must be a live handle and `buf` valid for `len` values.
NonadiabStatus nonadiab_ensemble_positions(const NonadiabEnsemble *ens, double *buf, uintptr_t len);

// Adiabatic energies and the non-adiabatic coupling of a benchmark model
// (`"single_avoided"`, `"dual_avoided"`, `"extended_coupling"`,
// `"double_arch"`) with default parameters.
//
// # Safety
// `model` must be a NUL-terminated string; the output pointers must be valid.
NonadiabStatus nonadiab_model_adiabatic(const char *model,
                                        double r,
                                        double (*energies)[2],
                                        double *nacv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NONADIAB_H */
