/*
 * Copyright 2026 The Semistream Authors. All Rights Reserved
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef SEMISTREAM_SEMISTREAM_H
#define SEMISTREAM_SEMISTREAM_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SS_API __declspec(dllexport)
#else
#define SS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ss_status {
  SS_OK = 0,
  SS_ERR_INVALID_ARGUMENT = 1,
  SS_ERR_DOMAIN = 2,
  SS_ERR_RANGE = 3,
  SS_ERR_SHAPE = 4,
  SS_ERR_FORMAT = 5,
  SS_ERR_SEQUENCING = 6,
  SS_ERR_PLAN = 7,
  SS_ERR_IO = 8,
  SS_ERR_INTERNAL = 9
} ss_status;

typedef enum ss_rounding { SS_ROUND_NEAREST = 0, SS_ROUND_TRUNCATE = 1 } ss_rounding;
typedef enum ss_mode { SS_MODE_SEQUENTIAL = 0, SS_MODE_STREAM = 1 } ss_mode;
typedef enum ss_format { SS_FORMAT_TEXT = 0, SS_FORMAT_CSV = 1 } ss_format;
typedef enum ss_engine { SS_ENGINE_C2D = 0, SS_ENGINE_DWC, SS_ENGINE_PRO, SS_ENGINE_EXP, SS_ENGINE_ADD } ss_engine;
typedef enum ss_fault { SS_FAULT_NONE = 0, SS_FAULT_REQUANT_OFF_BY_ONE = 1 } ss_fault;

typedef struct ss_model ss_model;
typedef struct ss_tensor ss_tensor;
typedef struct ss_result ss_result;

/* Message for the last failing call on this thread ("" if none). */
SS_API const char* ss_last_error(void);
SS_API const char* ss_status_string(ss_status status);
SS_API const char* ss_version(void);
/* Frees strings returned through char** out-parameters. */
SS_API void ss_string_free(char* s);

/* ---- models ---------------------------------------------------------- */

/* Seeded MobileNetV2 graph (unprepared). */
SS_API ss_status ss_model_generate(double width_multiplier, int resolution, uint64_t seed, ss_model** out);
/* Reads a package directory holding either a graph or a prepared model. */
SS_API ss_status ss_model_load(const char* dir, ss_model** out);
SS_API ss_status ss_model_save(const ss_model* model, const char* dir);
/* Derives integer parameters and the round plan.  No-op on prepared models
 * with the same rounding; SS_ERR_INVALID_ARGUMENT when the rounding differs. */
SS_API ss_status ss_model_prepare(ss_model* model, ss_rounding rounding);
SS_API void ss_model_free(ss_model* model);

typedef struct ss_model_info {
  int prepared;
  ss_rounding rounding;
  int layers;
  int residual_links;
  int rounds;       /* bottleneck rounds */
  int head_entries; /* trailing pool/classifier entries */
  int input_height, input_width, input_channels;
  int output_channels;
  uint64_t weight_bytes;
  uint64_t residual_fifo_batches;
} ss_model_info;

/* Graph models are planned on a scratch copy (nearest rounding). */
SS_API ss_status ss_model_info_get(const ss_model* model, ss_model_info* out);
/* Human-readable layer and round listing. */
SS_API ss_status ss_model_summary(const ss_model* model, char** out);

/* ---- tensors ----------------------------------------------------------- */

SS_API ss_status ss_tensor_create(int height, int width, int channels, double scale, int32_t zero_point,
                                  const uint8_t* data, ss_tensor** out);
/* P6 PPM or RAWHWC blob, quantized like the model input. */
SS_API ss_status ss_image_load(const char* path, const ss_model* model, ss_tensor** out);
SS_API ss_status ss_image_random(const ss_model* model, uint64_t seed, ss_tensor** out);
SS_API ss_status ss_image_save(const ss_tensor* image, const char* path, int ppm);
SS_API ss_status ss_tensor_shape(const ss_tensor* t, int* height, int* width, int* channels);
SS_API ss_status ss_tensor_quant(const ss_tensor* t, double* scale, int32_t* zero_point);
/* Borrowed pointer, valid until the tensor is freed. */
SS_API ss_status ss_tensor_data(const ss_tensor* t, const uint8_t** data, size_t* size);
SS_API void ss_tensor_free(ss_tensor* t);

/* ---- inference --------------------------------------------------------- */

typedef struct ss_infer_options {
  ss_mode mode;
  size_t stream_queue_capacity; /* 0: twice the frame width */
  size_t residual_capacity;     /* 0: the model's residual FIFO requirement */
} ss_infer_options;

typedef struct ss_engine_stats {
  uint64_t cycles;
  uint64_t madds;
  uint64_t useful_madds;
  uint64_t weight_bytes;
  uint64_t output_elements;
  uint64_t accumulator_words;
} ss_engine_stats;

/* The model must be prepared.  options may be NULL (sequential). */
SS_API ss_status ss_infer(const ss_model* model, const ss_tensor* image, const ss_infer_options* options,
                          ss_result** out);
/* Borrowed logits tensor (1 x 1 x classes for models with a head). */
SS_API ss_status ss_result_logits(const ss_result* result, const ss_tensor** out);
SS_API ss_status ss_result_engine_stats(const ss_result* result, ss_engine engine, ss_engine_stats* out);
SS_API void ss_result_free(ss_result* result);

/* Layer-by-layer naive evaluation of the prepared model. */
SS_API ss_status ss_oracle_infer(const ss_model* model, const ss_tensor* image, ss_tensor** out);

/* ---- verification ------------------------------------------------------- */

typedef struct ss_verify_options {
  uint64_t seed;
  int trials;
  ss_rounding rounding;
  const char* suite; /* NULL or "" for all */
  ss_fault fault;
} ss_verify_options;

/* *passed is 1 when every suite matched; *report receives the text report. */
SS_API ss_status ss_verify(const ss_verify_options* options, int* passed, char** report);

/* ---- performance model --------------------------------------------------- */

typedef struct ss_clock {
  double frequency_hz;
  double external_bandwidth; /* bytes per second; HUGE_VAL for unlimited */
} ss_clock;

/* Calibrated defaults: 100 MHz and 2.0e9 B/s. */
SS_API ss_clock ss_clock_default(void);
SS_API ss_status ss_report(const ss_model* model, const ss_clock* clock, ss_format format, char** out);
SS_API ss_status ss_latency(const ss_model* model, const ss_clock* clock, double* milliseconds, double* fps);
SS_API ss_status ss_engine_gops(ss_engine engine, double frequency_hz, double* gops);
SS_API ss_status ss_normalize_performance(double gops, double freq_mhz, int dsps, double* out);

#ifdef __cplusplus
}
#endif

#endif /* SEMISTREAM_SEMISTREAM_H */
