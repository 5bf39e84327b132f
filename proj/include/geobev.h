/* Copyright 2026 The GeoBEV Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
/*
 * C API of the geobev shared library. All entry points return a
 * geobev_status; on failure geobev_last_error() describes what went wrong
 * for the calling thread. Status values match the CLI exit-code taxonomy.
 */
#ifndef GEOBEV_H_
#define GEOBEV_H_

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum geobev_status {
  GEOBEV_OK = 0,
  GEOBEV_E_VERIFY = 1, /* a verification suite reported a mismatch */
  GEOBEV_E_CONFIG = 2, /* bad configuration, flags or shapes */
  GEOBEV_E_IO = 3,     /* missing/unwritable files or directories */
  GEOBEV_E_FORMAT = 4  /* malformed GTNS/GCGR payload or version mismatch */
} geobev_status;

const char* geobev_version(void);

/* Message for the most recent failing call on this thread. */
const char* geobev_last_error(void);

/* --- tensors (GTNS files) ------------------------------------------------ */

typedef struct geobev_tensor geobev_tensor;

geobev_status geobev_tensor_create(const uint32_t* dims, size_t ndim,
                                   const double* data, geobev_tensor** out);
geobev_status geobev_tensor_load(const char* path, geobev_tensor** out);
geobev_status geobev_tensor_save(const geobev_tensor* t, const char* path);
size_t geobev_tensor_ndim(const geobev_tensor* t);
uint32_t geobev_tensor_dim(const geobev_tensor* t, size_t axis);
size_t geobev_tensor_size(const geobev_tensor* t);
const double* geobev_tensor_data(const geobev_tensor* t);
void geobev_tensor_free(geobev_tensor* t);

/* --- workflows ------------------------------------------------------------ */

/* Generates `count` scenes (seeded) and exports the dataset directory.
 * config_path may be NULL for defaults. */
geobev_status geobev_gen_scenes(const char* out_dir, const char* config_path,
                                uint64_t seed, uint32_t count,
                                uint32_t* out_samples);

/* Runs every finite-difference verification suite. report (optional) receives
 * the text report, truncated to report_cap bytes. Returns GEOBEV_E_VERIFY on
 * any gradient mismatch. inject_fault flips one analytic gradient's sign to
 * prove the checker reacts. */
geobev_status geobev_gradcheck(const char* config_path, int inject_fault,
                               char* report, size_t report_cap);

geobev_status geobev_train(const char* config_path, const char* data_dir,
                           const char* out_dir);

/* Evaluates every sample of data_dir; writes "metric,value" CSV to out_csv
 * (optional) and the pretty table into report (optional). */
geobev_status geobev_eval(const char* checkpoint_path, const char* data_dir,
                          const char* config_path, const char* out_csv,
                          char* report, size_t report_cap);

/* Builds the camera-visibility mask for a rig and writes <out_prefix>.pgm
 * plus <out_prefix>.gtns. */
geobev_status geobev_mask(const char* rig_path, double extent_x,
                          double extent_y, double resolution, double epsilon,
                          int img_h, int img_w, int stride, int depth_bins,
                          double depth_min, double depth_max,
                          const char* out_prefix);

/* Trains the {static, conv3d, convgru, geo-convgru} x {T = 1,3,5,7} grid
 * (static at T = 1 only) with identical seeds and budgets and writes
 * module,T,iou,pq,train_seconds rows to out_csv. GEOBEV_THREADS caps
 * cell-level workers (default 1). */
geobev_status geobev_ablate(const char* config_path, const char* data_dir,
                            const char* out_csv);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* GEOBEV_H_ */
