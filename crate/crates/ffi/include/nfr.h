#ifndef NFR_H
#define NFR_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum NfrStatus {
  NFR_STATUS_OK = 0,
  // A required pointer argument was null.
  NFR_STATUS_NULL_ARGUMENT = 1,
  // Malformed input data, configuration or buffer size.
  NFR_STATUS_INVALID_INPUT = 2,
  // A file could not be read or parsed.
  NFR_STATUS_IO = 3,
  // The correspondence filter rejected every pair.
  NFR_STATUS_NO_CORRESPONDENCES = 4,
  // The energy became NaN or infinite.
  NFR_STATUS_NON_FINITE_ENERGY = 5,
  // A linear solve or eigensolve failed.
  NFR_STATUS_NUMERICAL = 6,
  // The library panicked; this is a bug.
  NFR_STATUS_PANIC = 7,
} NfrStatus;

// Point cloud, optionally with per-point source-vertex indices.
typedef struct NfrCloud NfrCloud;

// Registration settings.
typedef struct NfrConfig NfrConfig;

// Triangle mesh.
typedef struct NfrMesh NfrMesh;

// Output of one registration.
typedef struct NfrResult NfrResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. The
// pointer stays valid until the next failing call on the same thread.
const char *nfr_last_error(void);

// Library version as a static nul-terminated string.
const char *nfr_version(void);

// Builds a mesh from `vertex_count` xyz triples and `face_count` index
// triples.
//
// # Safety
// `vertices` must point to `3 * vertex_count` doubles and `faces` to
// `3 * face_count` indices; `out` must be writable.
enum NfrStatus nfr_mesh_new(const double *vertices,
                            size_t vertex_count,
                            const uint32_t *faces,
                            size_t face_count,
                            struct NfrMesh **out);

// Reads an OFF or PLY mesh.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum NfrStatus nfr_mesh_load(const char *path, struct NfrMesh **out);

// Number of vertices, or 0 for a null handle.
//
// # Safety
// `mesh` must be null or a live handle.
size_t nfr_mesh_vertex_count(const struct NfrMesh *mesh);

// Releases a mesh. Null is ignored.
//
// # Safety
// `mesh` must be null or a handle not yet freed.
void nfr_mesh_free(struct NfrMesh *mesh);

// Builds a cloud from `count` xyz triples. `provenance` may be null; when
// given it holds `count` distinct vertex indices into a mesh with
// `parent_vertex_count` vertices.
//
// # Safety
// `xyz` must point to `3 * count` doubles, `provenance` to `count` indices
// or be null; `out` must be writable.
enum NfrStatus nfr_cloud_new(const double *xyz,
                             size_t count,
                             const uint32_t *provenance,
                             size_t parent_vertex_count,
                             struct NfrCloud **out);

// Reads an XYZ, PLY or OFF point cloud, with its provenance sidecar if
// present.
//
// # Safety
// `path` must be a nul-terminated string; `out` must be writable.
enum NfrStatus nfr_cloud_load(const char *path, struct NfrCloud **out);

// Number of points, or 0 for a null handle.
//
// # Safety
// `cloud` must be null or a live handle.
size_t nfr_cloud_len(const struct NfrCloud *cloud);

// Releases a cloud. Null is ignored.
//
// # Safety
// `cloud` must be null or a handle not yet freed.
void nfr_cloud_free(struct NfrCloud *cloud);

// Default registration settings.
//
// # Safety
// `out` must be writable.
enum NfrStatus nfr_config_default(struct NfrConfig **out);

// Settings from a TOML document; omitted keys keep their defaults.
//
// # Safety
// `toml` must be a nul-terminated string; `out` must be writable.
enum NfrStatus nfr_config_from_toml(const char *toml, struct NfrConfig **out);

// Releases a config. Null is ignored.
//
// # Safety
// `config` must be null or a handle not yet freed.
void nfr_config_free(struct NfrConfig *config);

// Deforms `source` onto `target`; both must already share a frame.
//
// `config` may be null for the defaults. With spectral features,
// `target_mesh` is the mesh the cloud was sampled from (the cloud's
// provenance selects its rows); otherwise it may be null. External feature
// matrices are not available through this interface.
//
// # Safety
// Handles must be live or null where allowed; `out` must be writable.
enum NfrStatus nfr_register(const struct NfrMesh *source,
                            const struct NfrCloud *target,
                            const struct NfrConfig *config,
                            const struct NfrMesh *target_mesh,
                            struct NfrResult **out);

// Number of deformed vertices (the source vertex count).
//
// # Safety
// `result` must be null or a live handle.
size_t nfr_result_vertex_count(const struct NfrResult *result);

// Number of target points.
//
// # Safety
// `result` must be null or a live handle.
size_t nfr_result_target_count(const struct NfrResult *result);

// Total iterations over both stages.
//
// # Safety
// `result` must be null or a live handle.
size_t nfr_result_iterations(const struct NfrResult *result);

// Total energy of the final iterate, or NaN for a null handle.
//
// # Safety
// `result` must be null or a live handle.
double nfr_result_final_energy(const struct NfrResult *result);

// Copies the deformed vertices as xyz triples into `xyz`, which holds
// `capacity` doubles (at least `3 * nfr_result_vertex_count`).
//
// # Safety
// `result` must be live; `xyz` must hold `capacity` doubles.
enum NfrStatus nfr_result_copy_vertices(const struct NfrResult *result,
                                        double *xyz,
                                        size_t capacity);

// Copies the source-to-target map (nearest target point of every deformed
// vertex), `nfr_result_vertex_count` entries.
//
// # Safety
// `result` must be live; `map` must hold `capacity` entries.
enum NfrStatus nfr_result_copy_map_st(const struct NfrResult *result, size_t *map, size_t capacity);

// Copies the target-to-source map (nearest deformed vertex of every target
// point), `nfr_result_target_count` entries.
//
// # Safety
// `result` must be live; `map` must hold `capacity` entries.
enum NfrStatus nfr_result_copy_map_ts(const struct NfrResult *result, size_t *map, size_t capacity);

// Releases a result. Null is ignored.
//
// # Safety
// `result` must be null or a handle not yet freed.
void nfr_result_free(struct NfrResult *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NFR_H */
