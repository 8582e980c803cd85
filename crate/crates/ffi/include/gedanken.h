#ifndef GEDANKEN_H
#define GEDANKEN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum GdStatus {
  GD_STATUS_OK = 0,
  GD_STATUS_NULL_POINTER = 1,
  GD_STATUS_INVALID_ARGUMENT = 2,
  GD_STATUS_CONFIG = 3,
  GD_STATUS_WRAPPED = 4,
  GD_STATUS_NULL_POSTSELECTION = 5,
  GD_STATUS_NUMERICAL = 6,
  GD_STATUS_IO = 7,
  GD_STATUS_BUFFER_TOO_SMALL = 8,
  GD_STATUS_PANIC = 9,
} GdStatus;

typedef enum GdEnvelopeKind {
  GD_ENVELOPE_KIND_UNIT = 0,
  GD_ENVELOPE_KIND_GAUSSIAN = 1,
} GdEnvelopeKind;

typedef enum GdRep {
  GD_REP_POSITION = 0,
  GD_REP_MOMENTUM = 1,
} GdRep;

/**
 * Opaque probability density.
 */
typedef struct GdDensity GdDensity;

/**
 * Opaque 1-D lattice.
 */
typedef struct GdGrid GdGrid;

/**
 * Opaque multi-axis state.
 */
typedef struct GdState GdState;

/**
 * Transverse profile; `center` and `width` are ignored for `Unit`.
 */
typedef struct GdEnvelope {
  enum GdEnvelopeKind kind;
  double center;
  double width;
} GdEnvelope;

typedef struct GdPreparation {
  double d;
  double sigma;
  double k0;
  struct GdEnvelope envelopes[2];
} GdPreparation;

typedef struct GdCorrelation {
  double ridge_slope;
  double ridge_offset;
  double pearson;
  double flatness_tv;
} GdCorrelation;

typedef struct GdCollision {
  double omega_out;
  double v_out;
  double shift_exact;
  double shift_expansion;
  double shift_doppler;
} GdCollision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next failing call on the same thread.
 */
const char *gd_last_error(void);

/**
 * Library version as a static string.
 */
const char *gd_version(void);

/**
 * Frees a string returned by this library. NULL is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void gd_string_free(char *s);

/**
 * # Safety
 * `out` must be a valid pointer to write a handle into.
 */
enum GdStatus gd_grid_new(size_t n_points, double length, struct GdGrid **out);

/**
 * # Safety
 * `grid` must be NULL or a live handle from [`gd_grid_new`].
 */
void gd_grid_free(struct GdGrid *grid);

/**
 * Writes the position and momentum lattice spacings.
 *
 * # Safety
 * `grid` must be a live handle; the out-pointers must be writable.
 */
enum GdStatus gd_grid_spacings(const struct GdGrid *grid, double *dx, double *dk);

/**
 * Default preparation: d = 3, sigma = 0.15, K0 = 0, unit envelopes.
 */
struct GdPreparation gd_preparation_default(void);

/**
 * Two-particle EPR state (axes `particle1`, `particle2`).
 *
 * # Safety
 * `grid` and `prep` must be valid; `out` writable.
 */
enum GdStatus gd_state_epr(const struct GdGrid *grid,
                           const struct GdPreparation *prep,
                           struct GdState **out);

/**
 * Particle-particle-diaphragm state (axes `particle1`, `particle2`, `diaphragm`).
 *
 * # Safety
 * `grid` and `prep` must be valid; `out` writable.
 */
enum GdStatus gd_state_bohr(const struct GdGrid *grid,
                            const struct GdPreparation *prep,
                            struct GdState **out);

/**
 * # Safety
 * `state` must be NULL or a live state handle.
 */
void gd_state_free(struct GdState *state);

/**
 * Number of axes, or 0 for NULL.
 *
 * # Safety
 * `state` must be NULL or a live state handle.
 */
size_t gd_state_n_axes(const struct GdState *state);

/**
 * `sum |psi|^2 * cell`.
 *
 * # Safety
 * `state` must be a live handle; `out` writable.
 */
enum GdStatus gd_state_norm_sqr(const struct GdState *state, double *out);

/**
 * Conditions `axis` on a pointer outcome. `smearing` 0 is a sharp slice.
 *
 * # Safety
 * `state` live, `axis` a NUL-terminated string, out-pointers writable.
 */
enum GdStatus gd_postselect(const struct GdState *state,
                            const char *axis,
                            enum GdRep basis,
                            double value,
                            double smearing,
                            struct GdState **out_state,
                            double *out_probability);

/**
 * Joint density with axis `i` read in `reps[i]`; `n_reps` must equal the
 * number of axes.
 *
 * # Safety
 * `reps` must point to `n_reps` values; `out` writable.
 */
enum GdStatus gd_joint_density(const struct GdState *state,
                               const enum GdRep *reps,
                               size_t n_reps,
                               struct GdDensity **out);

/**
 * # Safety
 * `density` must be NULL or a live density handle.
 */
void gd_density_free(struct GdDensity *density);

/**
 * Number of cells, or 0 for NULL.
 *
 * # Safety
 * `density` must be NULL or a live density handle.
 */
size_t gd_density_len(const struct GdDensity *density);

/**
 * Copies the values in row-major (lexicographic) order into `buf`.
 *
 * # Safety
 * `buf` must have room for `capacity` doubles.
 */
enum GdStatus gd_density_values(const struct GdDensity *density, double *buf, size_t capacity);

/**
 * Total variation distance between two densities on the same support.
 *
 * # Safety
 * Both handles live, `out` writable.
 */
enum GdStatus gd_total_variation(const struct GdDensity *a, const struct GdDensity *b, double *out);

/**
 * Ridge fit of a two-axis density.
 *
 * # Safety
 * `density` live, `out` writable.
 */
enum GdStatus gd_ridge_fit(const struct GdDensity *density, struct GdCorrelation *out);

/**
 * Exact photon/mirror collision.
 *
 * # Safety
 * `out` writable.
 */
enum GdStatus gd_doppler_collide(double omega, double v, double mass, struct GdCollision *out);

/**
 * Runs a protocol scenario and returns its report as JSON.
 *
 * `config_yaml` may be NULL for defaults. The string written to `out_json`
 * is freed with [`gd_string_free`].
 *
 * # Safety
 * `scenario` (and `config_yaml` when non-NULL) must be NUL-terminated;
 * `out_json` writable.
 */
enum GdStatus gd_run_scenario(const char *scenario, const char *config_yaml, char **out_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GEDANKEN_H */
