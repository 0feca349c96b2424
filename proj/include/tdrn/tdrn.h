/* Copyright 2026 The tdrn Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License. */

#ifndef TDRN_TDRN_H_
#define TDRN_TDRN_H_

/* C interface of libtdrn: turbulence degradation, prior/restoration network
 * training, restoration and evaluation.
 *
 * Every function returns a tdrn_status. On failure the message for the
 * calling thread is available from tdrn_last_error() until the next call.
 * Objects are opaque handles released with the matching *_free function.
 * Strings returned through char** are allocated by the library and released
 * with tdrn_string_free(). */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define TDRN_API __declspec(dllexport)
#else
#define TDRN_API __attribute__((visibility("default")))
#endif

typedef enum tdrn_status {
  TDRN_OK = 0,
  TDRN_ERR_INVALID_ARGUMENT = 1,
  TDRN_ERR_IO = 2,
  TDRN_ERR_CONFIG = 3,
  TDRN_ERR_ARCH_MISMATCH = 4,
  TDRN_ERR_CORRUPT = 5,
  TDRN_ERR_DIVERGED = 6,
  TDRN_ERR_NOT_FOUND = 7,
  TDRN_ERR_INTERNAL = 99
} tdrn_status;

typedef enum tdrn_log_level {
  TDRN_LOG_DEBUG = 0,
  TDRN_LOG_INFO = 1,
  TDRN_LOG_WARN = 2,
  TDRN_LOG_ERROR = 3
} tdrn_log_level;

typedef struct tdrn_config tdrn_config;
typedef struct tdrn_image tdrn_image;
typedef struct tdrn_restorer tdrn_restorer;

typedef void (*tdrn_log_fn)(int level, const char* message, void* user);

/* ---- library ---------------------------------------------------------- */

TDRN_API const char* tdrn_version(void);
TDRN_API const char* tdrn_last_error(void);
TDRN_API const char* tdrn_status_string(tdrn_status status);
TDRN_API void tdrn_string_free(char* s);

/* NULL restores the default stderr logger. */
TDRN_API void tdrn_set_log_callback(tdrn_log_fn fn, void* user);
TDRN_API void tdrn_set_log_level(tdrn_log_level level);

/* ---- configuration ---------------------------------------------------- */

/* All defaults. */
TDRN_API tdrn_status tdrn_config_create(tdrn_config** out);
TDRN_API tdrn_status tdrn_config_load(const char* path, tdrn_config** out);
TDRN_API tdrn_status tdrn_config_parse(const char* json, tdrn_config** out);
TDRN_API void tdrn_config_free(tdrn_config* cfg);

/* Dotted key ("train.tdrn.iterations") and a JSON value ("50", "[1,3]").
 * Unquoted text that is not JSON is taken as a string. */
TDRN_API tdrn_status tdrn_config_set(tdrn_config* cfg, const char* key, const char* json_value);

/* --seed semantics: degrade master seed, every training seed, eval seed. */
TDRN_API tdrn_status tdrn_config_set_seed(tdrn_config* cfg, uint64_t seed);

/* JSON text of one value by dotted key. */
TDRN_API tdrn_status tdrn_config_get(const tdrn_config* cfg, const char* key, char** json_out);

TDRN_API tdrn_status tdrn_config_dump(const tdrn_config* cfg, char** json_out);
TDRN_API tdrn_status tdrn_config_checksum(const tdrn_config* cfg, char** hex_out);

/* $TDRN_RUN_ROOT (default "runs") / <label>-<checksum prefix>. */
TDRN_API tdrn_status tdrn_default_run_dir(const tdrn_config* cfg, const char* label, char** path_out);

/* ---- pipeline --------------------------------------------------------- */

typedef struct tdrn_degrade_summary {
  size_t images;
  size_t records;
  char manifest_checksum[17];
} tdrn_degrade_summary;

/* Writes clean/, distorted/, deblur/, dewarp/ and the three manifests into out_dir.
 * clean_dir NULL means data.clean_dir. manifest_out (optional) receives the deturbulence manifest path. */
TDRN_API tdrn_status tdrn_degrade(const tdrn_config* cfg, const char* clean_dir, const char* out_dir,
                                  tdrn_degrade_summary* summary, char** manifest_out);

/* which: "dbn", "gdrn" or "tdrn". resume != 0 continues from resume_from, or
 * from the newest checkpoint in run_dir when resume_from is NULL or empty. */
TDRN_API tdrn_status tdrn_train(const tdrn_config* cfg, const char* which, const char* run_dir, int resume,
                                const char* resume_from, char** checkpoint_out);

/* input is one PNG or a directory of PNGs; outputs keep their file names.
 * samples <= 0 means priors.S. Checkpoints come from train.*_checkpoint. */
TDRN_API tdrn_status tdrn_restore_files(const tdrn_config* cfg, const char* input, const char* out_dir, int samples,
                                        uint64_t seed, size_t* written);

/* manifest may be NULL (config test_dir / dataset_dir). Exactly one source is
 * used: passthrough ("clean" or "distorted"), restored_dir, else the config checkpoints. */
TDRN_API tdrn_status tdrn_evaluate(const tdrn_config* cfg, const char* manifest, const char* out_dir,
                                   const char* restored_dir, const char* passthrough, char** report_out);

TDRN_API tdrn_status tdrn_ablate(const tdrn_config* cfg, const char* run_dir, char** report_out);

/* Synthetic clean faces face_000.png, face_001.png, ... */
TDRN_API tdrn_status tdrn_synth(const char* out_dir, int count, int size, uint64_t seed, size_t* written);

/* ---- images and metrics ----------------------------------------------- */

/* Planar RGB, values in [0,1], channel-major (c, y, x). */
TDRN_API tdrn_status tdrn_image_create(int height, int width, const double* planar_rgb, tdrn_image** out);
TDRN_API tdrn_status tdrn_image_load(const char* path, tdrn_image** out);
TDRN_API tdrn_status tdrn_image_save(const tdrn_image* img, const char* path);
TDRN_API void tdrn_image_free(tdrn_image* img);
TDRN_API tdrn_status tdrn_image_size(const tdrn_image* img, int* height, int* width);
/* Copies 3*height*width values into dst. */
TDRN_API tdrn_status tdrn_image_copy(const tdrn_image* img, double* dst, size_t capacity);

TDRN_API tdrn_status tdrn_psnr(const tdrn_image* a, const tdrn_image* b, double* out);
TDRN_API tdrn_status tdrn_ssim(const tdrn_image* a, const tdrn_image* b, double* out);

/* ---- restoration ------------------------------------------------------ */

/* dbn_ckpt / gdrn_ckpt may be NULL when the restoration network takes no priors. */
TDRN_API tdrn_status tdrn_restorer_load(const char* dbn_ckpt, const char* gdrn_ckpt, const char* tdrn_ckpt,
                                        tdrn_restorer** out);
TDRN_API void tdrn_restorer_free(tdrn_restorer* r);
TDRN_API tdrn_status tdrn_restorer_run(const tdrn_restorer* r, const tdrn_image* distorted, int samples,
                                       uint64_t seed, tdrn_image** out);

#ifdef __cplusplus
}
#endif

#endif /* TDRN_TDRN_H_ */
