#ifndef GRIDSEC_H
#define GRIDSEC_H

/* Generated by cbindgen from gridsec-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Status codes returned by every fallible call.
 */
typedef enum GridsecStatus {
  GRIDSEC_STATUS_OK = 0,
  GRIDSEC_STATUS_NULL_ARGUMENT = 1,
  GRIDSEC_STATUS_INVALID_UTF8 = 2,
  GRIDSEC_STATUS_PARSE_ERROR = 3,
  GRIDSEC_STATUS_VALIDATION_ERROR = 4,
  GRIDSEC_STATUS_DOMAIN_ERROR = 5,
  GRIDSEC_STATUS_INTERNAL_ERROR = 6,
} GridsecStatus;

/*
 Opaque case handle.
 */
typedef struct GridsecCase GridsecCase;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message describing the most recent failure on this thread. The pointer
 stays valid until the next failing call on the same thread.
 */
const char *gridsec_last_error_message(void);

/*
 Release a string returned by this library.

 # Safety
 `s` must be a pointer previously returned through one of the `out`
 parameters here, not yet freed.
 */
void gridsec_string_free(char *s);

/*
 Release a case handle.

 # Safety
 `case` must come from a successful `gridsec_case_load_*` call and must
 not be used afterwards.
 */
void gridsec_case_free(struct GridsecCase *case_);

/*
 Parse and validate a case from a JSON document.

 # Safety
 `json` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum GridsecStatus gridsec_case_load_json(const char *json, struct GridsecCase **out);

/*
 Parse and validate a case from a file. `format` is `"native"` or
 `"matpower"`; NULL means native.

 # Safety
 `path` must be a NUL-terminated string; `out` must be a valid pointer.
 */
enum GridsecStatus gridsec_case_load_path(const char *path,
                                          const char *format,
                                          struct GridsecCase **out);

/*
 Number of buses in a case.

 # Safety
 `case` must be a live handle; `out` must be valid.
 */
enum GridsecStatus gridsec_case_bus_count(const struct GridsecCase *case_, size_t *out);

/*
 Validation diagnostics as a JSON array (empty array means every
 invariant holds).

 # Safety
 `case` must be a live handle; `out_json` must be valid.
 */
enum GridsecStatus gridsec_validate_json(const struct GridsecCase *case_, char **out_json);

/*
 Contingency screening; returns the screen CSV (same columns as the CLI
 artifact). `config_json` is a full run configuration or NULL for
 defaults.

 # Safety
 `case` must be a live handle; `out_csv` must be valid.
 */
enum GridsecStatus gridsec_rtca_csv(const struct GridsecCase *case_,
                                    const char *config_json,
                                    char **out_csv);

/*
 Security-constrained dispatch at the case state; returns the solution
 JSON.

 # Safety
 `case` must be a live handle; `out_json` must be valid.
 */
enum GridsecStatus gridsec_sced_json(const struct GridsecCase *case_,
                                     const char *config_json,
                                     char **out_json);

/*
 Design the worst-case attack for one target; returns the design JSON
 (attack vector, certified flows, solve trace).
 `spec_json`: `{"target_line": ..., "contingency": "<id>|base",
 "n1": ..., "ls": ...}`.

 # Safety
 `case` must be a live handle; string arguments NUL-terminated;
 `out_json` valid.
 */
enum GridsecStatus gridsec_design_json(const struct GridsecCase *case_,
                                       const char *config_json,
                                       const char *spec_json,
                                       char **out_json);

/*
 Design one attack and run it through the defender loop; returns the
 assessment report JSON.

 # Safety
 `case` must be a live handle; string arguments NUL-terminated;
 `out_json` valid.
 */
enum GridsecStatus gridsec_simulate_json(const struct GridsecCase *case_,
                                         const char *config_json,
                                         const char *spec_json,
                                         char **out_json);

/*
 Attack every warned pair over the configured budget grid; returns the
 statistical table CSV.

 # Safety
 `case` must be a live handle; `out_csv` valid.
 */
enum GridsecStatus gridsec_screen_table_csv(const struct GridsecCase *case_,
                                            const char *config_json,
                                            char **out_csv);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GRIDSEC_H */
