/*
 * sketchrod C API.
 *
 * Sketch-guided extraction of simulation-ready polylines from Gaussian
 * splatting scenes, plus an elastic rod simulation that drives the bound
 * primitives. All functions return an sr_status; on failure a description of
 * the last error on the calling thread is available from sr_last_error().
 * Strings returned through `char**` out-parameters are owned by the caller and
 * released with sr_string_free().
 */
#ifndef SKETCHROD_SKETCHROD_H
#define SKETCHROD_SKETCHROD_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(SKETCHROD_BUILDING)
#define SR_API __declspec(dllexport)
#else
#define SR_API __declspec(dllimport)
#endif
#else
#define SR_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum sr_status {
  SR_OK = 0,
  SR_ERR_INVALID_ARGUMENT = 1,
  SR_ERR_IO = 2,
  SR_ERR_FORMAT = 3,
  SR_ERR_VALIDATION = 4,
  SR_ERR_BOUNDS = 5,
  SR_ERR_STROKE_INVALID = 6,
  SR_ERR_PARTIAL_EXTRACTION = 7,
  SR_ERR_DEGENERATE = 8,
  SR_ERR_BINDING_INVALID = 9,
  SR_ERR_DIVERGED = 10,
  SR_ERR_NOT_READY = 11,
  SR_ERR_PROTOCOL = 12,
  SR_ERR_INTERNAL = 13
} sr_status;

typedef struct sr_session sr_session;
typedef struct sr_server sr_server;

SR_API const char* sr_version(void);
SR_API int sr_protocol_version(void);
SR_API const char* sr_status_string(sr_status status);
/* Message of the most recent failure on this thread; never NULL. */
SR_API const char* sr_last_error(void);
SR_API void sr_string_free(char* str);

/* --- sessions ------------------------------------------------------------ */

SR_API sr_status sr_session_create(sr_session** out);
SR_API void sr_session_destroy(sr_session* session);

/* Relative paths resolve against $SKETCHROD_SCENE_DIR when it is set. */
SR_API sr_status sr_session_load_scene(sr_session* session, const char* ply_path, size_t* primitive_count);
SR_API sr_status sr_session_set_camera_json(sr_session* session, const char* camera_json);
SR_API sr_status sr_session_set_camera_file(sr_session* session, const char* camera_path);
/* Merges the given keys into the pipeline configuration. */
SR_API sr_status sr_session_set_params_json(sr_session* session, const char* params_json);

/*
 * Runs the extraction pipeline for a stroke document. On success *rod_id is the
 * new rod. SR_ERR_STROKE_INVALID: an endpoint is off the object.
 * SR_ERR_PARTIAL_EXTRACTION: the partial result is kept and can be exported
 * with sr_session_export_last. A string "camera" entry in the stroke is
 * resolved relative to `base_dir` (may be NULL).
 */
SR_API sr_status sr_session_submit_stroke_json(sr_session* session, const char* stroke_json, const char* base_dir,
                                               int* rod_id);
SR_API sr_status sr_session_submit_stroke_file(sr_session* session, const char* stroke_path, int* rod_id);

/* JSON of the last extraction (complete or partial), as sent on the wire. */
SR_API sr_status sr_session_last_result_json(sr_session* session, char** out_json);
/* Writes path.json, polyline.obj/json, segmentation.json, binding.json and timing.json. */
SR_API sr_status sr_session_export_last(sr_session* session, const char* out_dir);
SR_API sr_status sr_session_export_rod(sr_session* session, int rod_id, const char* out_dir);

SR_API sr_status sr_session_rod_count(sr_session* session, size_t* count);
SR_API sr_status sr_session_begin_drag(sr_session* session, int rod_id, size_t vertex, const double target[3]);
SR_API sr_status sr_session_update_drag(sr_session* session, int rod_id, const double target[3]);
SR_API sr_status sr_session_end_drag(sr_session* session, int rod_id);
SR_API sr_status sr_session_delete_rod(sr_session* session, int rod_id);

/* Advances every rod one frame; *out_json is a JSON array of tick_update messages. */
SR_API sr_status sr_session_tick(sr_session* session, char** out_json);

/* Handles one wire-protocol message; *out_json is the single response. */
SR_API sr_status sr_session_handle_message(sr_session* session, const char* message, size_t length,
                                           char** out_json);

/* --- headless tools ------------------------------------------------------ */

/* Runs a scenario file and writes the trajectory JSON. `params_json` (may be
 * NULL) overrides keys of the scenario's params. On divergence the partial
 * trajectory is written, *diverged_step is set and SR_ERR_DIVERGED returned;
 * otherwise *diverged_step is -1. */
SR_API sr_status sr_simulate_file(const char* scenario_path, const char* params_json, const char* trajectory_path,
                                  int64_t* diverged_step);

/* Writes <prefix>.png and <prefix>.raw for the index image of a scene/camera. */
SR_API sr_status sr_rasterize_debug(const char* ply_path, const char* camera_path, const char* out_prefix);

/* --- server -------------------------------------------------------------- */

/* port 0 selects an ephemeral port; tick_hz <= 0 disables pushed ticks. */
SR_API sr_status sr_server_start(const char* host, uint16_t port, double tick_hz, sr_server** out);
SR_API uint16_t sr_server_port(const sr_server* server);
/* Blocks until sr_server_stop is called (e.g. from a signal handler thread). */
SR_API void sr_server_wait(sr_server* server);
SR_API void sr_server_stop(sr_server* server);
SR_API void sr_server_destroy(sr_server* server);

#ifdef __cplusplus
}
#endif

#endif /* SKETCHROD_SKETCHROD_H */
