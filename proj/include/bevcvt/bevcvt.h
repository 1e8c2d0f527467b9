// Copyright 2026 The bevcvt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BEVCVT_BEVCVT_H_
#define BEVCVT_BEVCVT_H_

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define BEVCVT_API __attribute__((visibility("default")))
#else
#define BEVCVT_API
#endif

typedef enum bevcvt_status {
  BEVCVT_OK = 0,
  BEVCVT_ERR_INVALID_ARGUMENT = 1,
  BEVCVT_ERR_IO = 2,
  BEVCVT_ERR_FORMAT = 3,
  BEVCVT_ERR_CONFIG = 4,
  BEVCVT_ERR_GEOMETRY = 5,
  BEVCVT_ERR_BEHIND_CAMERA = 6,
  BEVCVT_ERR_NOT_FOUND = 7,
  BEVCVT_ERR_NO_ROUTE = 8,
  BEVCVT_ERR_SHAPE = 9,
  BEVCVT_ERR_RUNTIME = 10,
  BEVCVT_ERR_UNKNOWN = 99
} bevcvt_status;

/* Message of the last failed call on this thread; "" after a success. */
BEVCVT_API const char* bevcvt_last_error(void);
BEVCVT_API const char* bevcvt_status_name(bevcvt_status status);
BEVCVT_API const char* bevcvt_version(void);

/* Strings returned through char** out-parameters are owned by the caller. */
BEVCVT_API void bevcvt_string_free(char* s);

/* Called once per progress line during long operations. */
typedef void (*bevcvt_log_fn)(const char* line, void* user);

/* ---- geometry ---- */

typedef struct bevcvt_camera bevcvt_camera;

/* position in metres; angles are pitch, yaw, roll in degrees. */
BEVCVT_API bevcvt_status bevcvt_camera_create(const char* name, int width, int height, double fov_deg,
                                              const double position[3], const double angles_deg[3],
                                              bevcvt_camera** out);
BEVCVT_API void bevcvt_camera_destroy(bevcvt_camera* camera);

/* Row-major K (3x3) and E = [R t; 0 1] (4x4). */
BEVCVT_API bevcvt_status bevcvt_camera_intrinsics(const bevcvt_camera* camera, double k[9]);
BEVCVT_API bevcvt_status bevcvt_camera_extrinsics(const bevcvt_camera* camera, double e[16]);

BEVCVT_API bevcvt_status bevcvt_intrinsics_from_fov(int width, int height, double fov_deg, double k[9]);
BEVCVT_API bevcvt_status bevcvt_project(const bevcvt_camera* camera, const double world[3], double pixel[2]);
BEVCVT_API bevcvt_status bevcvt_unproject(const bevcvt_camera* camera, const double pixel[2], double direction[3]);
BEVCVT_API bevcvt_status bevcvt_geometric_similarity(const bevcvt_camera* camera, const double pixel[2],
                                                     const double world[3], double* similarity);

/* ---- data ---- */

/* config_json: generation settings, missing keys take defaults. The summary
 * is the per-split listing. */
BEVCVT_API bevcvt_status bevcvt_generate_dataset(const char* config_json, const char* root, int force,
                                                 char** summary_out);
/* rig_override may be NULL, "default3" or "default4". */
BEVCVT_API bevcvt_status bevcvt_ingest_external(const char* source, const char* root, const char* rig_override,
                                                int force);

/* ---- training ---- */

/* Returns the run record (config snapshot and epochs) as JSON. */
BEVCVT_API bevcvt_status bevcvt_train(const char* config_json, const char* data_root, const char* out_dir,
                                      bevcvt_log_fn log, void* user, char** run_json_out);

/* cells_json: NULL for the full six-cell matrix, else an array of cell
 * slugs such as "cvt_l1_4cams". model_overrides_json maps "cvt" / "unet"
 * to architecture options and may be NULL. */
BEVCVT_API bevcvt_status bevcvt_run_matrix(const char* base_config_json, const char* model_overrides_json,
                                           const char* cells_json, const char* data_root, const char* out_dir,
                                           bevcvt_log_fn log, void* user, char** result_json_out);

/* ---- models ---- */

typedef struct bevcvt_model bevcvt_model;

BEVCVT_API bevcvt_status bevcvt_model_load(const char* checkpoint, bevcvt_model** out);
BEVCVT_API void bevcvt_model_destroy(bevcvt_model* model);
/* {"arch", "n_views", "parameters", "config", "meta"} */
BEVCVT_API bevcvt_status bevcvt_model_info(const bevcvt_model* model, char** json_out);
/* split is "train", "val" or "test". model_name may be NULL. */
BEVCVT_API bevcvt_status bevcvt_model_evaluate(bevcvt_model* model, const char* data_root, const char* split,
                                               const char* model_name, char** report_json_out);

/* ---- reporting ---- */

BEVCVT_API bevcvt_status bevcvt_report(const char* const* inputs, size_t n_inputs, const char* out_dir,
                                       char** summary_json_out);
BEVCVT_API bevcvt_status bevcvt_visualize(const char* checkpoint, const char* data_root, const char* const* sample_ids,
                                          size_t n_samples, const char* out_dir, double threshold,
                                          char** files_json_out);

#ifdef __cplusplus
}
#endif

#endif /* BEVCVT_BEVCVT_H_ */
