#ifndef VCOMP_H
#define VCOMP_H

/* C interface of the composition toolkit. All functions return a status;
 * on failure vcomp_last_error() holds a message for the calling thread.
 * Strings returned through char** are owned by the caller and released
 * with vcomp_free_string. Config arguments are JSON objects, either flat
 * ({"width": 64, "learning_rate": 0.002}) or grouped into sections
 * ("model", "train", "format", "context", "synth", "decode", "eval");
 * each function reads the keys it knows and ignores the rest. NULL means
 * all defaults. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define VCOMP_API __declspec(dllexport)
#else
#define VCOMP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Mirrors vcomp::ErrorCode. */
typedef enum vcomp_status {
    VCOMP_OK = 0,
    VCOMP_E_PARSE = 1,
    VCOMP_E_VALIDATION = 2,
    VCOMP_E_NOT_FOUND = 3,
    VCOMP_E_DUPLICATE = 4,
    VCOMP_E_OUT_OF_RANGE = 5,
    VCOMP_E_TOO_LONG = 6,
    VCOMP_E_SCHEMA = 7,
    VCOMP_E_IO = 8,
    VCOMP_E_INVALID_ARGUMENT = 9,
    VCOMP_E_NUMERICAL = 10,
    VCOMP_E_INTERNAL = 11
} vcomp_status;

typedef struct vcomp_pool vcomp_pool;
typedef struct vcomp_corpus vcomp_corpus;
typedef struct vcomp_model vcomp_model;

/* Called with one JSON object per training log line. */
typedef void (*vcomp_log_fn)(const char* line_json, void* user);

VCOMP_API const char* vcomp_version(void);
VCOMP_API const char* vcomp_status_name(vcomp_status status);
VCOMP_API const char* vcomp_last_error(void);
VCOMP_API void vcomp_free_string(char* s);

/* Effect pools. sizes_json maps category tags to counts, e.g.
 * {"image-sticker": 16, "sound-effect": 8}; NULL gives the toy pool. */
VCOMP_API vcomp_status vcomp_pool_load(const char* path, vcomp_pool** out);
VCOMP_API vcomp_status vcomp_pool_synthetic(const char* sizes_json, uint64_t seed, vcomp_pool** out);
VCOMP_API vcomp_status vcomp_pool_save(const vcomp_pool* pool, const char* path);
/* {"pool_id", "size", "counts": {tag: n}} */
VCOMP_API vcomp_status vcomp_pool_describe(const vcomp_pool* pool, char** json_out);
VCOMP_API void vcomp_pool_free(vcomp_pool* pool);

/* Datasets (JSON lines). */
VCOMP_API vcomp_status vcomp_corpus_load(const char* path, vcomp_corpus** out);
VCOMP_API vcomp_status vcomp_corpus_save(const vcomp_corpus* corpus, const char* path);
VCOMP_API size_t vcomp_corpus_size(const vcomp_corpus* corpus);
/* Keys: num_samples, segments_range [lo, hi], words_range [lo, hi], density,
 * prompt_rate, seed, num_topics, num_emotions, visual_dim, audio_dim. */
VCOMP_API vcomp_status vcomp_corpus_generate(const char* config_json, const vcomp_pool* pool, vcomp_corpus** out);
VCOMP_API vcomp_status vcomp_corpus_filter(const vcomp_corpus* corpus, size_t min_sentences, vcomp_corpus** out);
VCOMP_API vcomp_status vcomp_corpus_split(const vcomp_corpus* corpus, double val_fraction, uint64_t seed,
                                          vcomp_corpus** train_out, vcomp_corpus** val_out);
VCOMP_API vcomp_status vcomp_corpus_stats(const vcomp_corpus* corpus, char** json_out);
/* Structural checks of every sample; with a pool, also effect membership. */
VCOMP_API vcomp_status vcomp_corpus_validate(const vcomp_corpus* corpus, const vcomp_pool* pool);
VCOMP_API void vcomp_corpus_free(vcomp_corpus* corpus);

/* Composer models. The vocabulary is built from the corpus and pool. */
VCOMP_API vcomp_status vcomp_model_create(const char* config_json, const vcomp_corpus* corpus,
                                          const vcomp_pool* pool, vcomp_model** out);
VCOMP_API vcomp_status vcomp_model_load(const char* path, vcomp_model** out);
VCOMP_API vcomp_status vcomp_model_save(const vcomp_model* model, const char* path);
/* {"model", "format", "context", "vocab_size", "num_parameters"} */
VCOMP_API vcomp_status vcomp_model_describe(const vcomp_model* model, char** json_out);
/* Trains in place; summary holds losses, timing and final validation metrics. */
VCOMP_API vcomp_status vcomp_model_train(vcomp_model* model, const vcomp_corpus* train_set,
                                         const vcomp_corpus* val_set, const vcomp_pool* pool,
                                         const char* config_json, vcomp_log_fn on_log, void* user,
                                         char** summary_json);
/* Decode keys: mode ("greedy" | "sample"), temperature, seed, constrained,
 * max_new_tokens, density (0-100), categories [tags], use_sample_prompt.
 * Decoding is grammar-constrained unless "constrained" is false.
 * Writes {"sample_id", "text"} lines to out_path. */
VCOMP_API vcomp_status vcomp_model_compose(const vcomp_model* model, const vcomp_corpus* corpus,
                                           const vcomp_pool* pool, const char* config_json, const char* out_path,
                                           char** summary_json);
VCOMP_API void vcomp_model_free(vcomp_model* model);

/* Scores a predictions file (composition texts or dataset records) against
 * gt. Keys: format options, align ("optimal" | "greedy"), micro. */
VCOMP_API vcomp_status vcomp_evaluate(const vcomp_corpus* gt, const char* predictions_path, const vcomp_pool* pool,
                                      const char* config_json, const char* report_path, char** summary_json);
/* Mean and standard error over repeated-run reports (n >= 2). */
VCOMP_API vcomp_status vcomp_combine_reports(const char* const* report_paths, size_t n, const char* out_path,
                                             char** summary_json);

/* One composition document per sample, as JSON lines. Targets come from the
 * predictions file when given, else from the dataset. */
VCOMP_API vcomp_status vcomp_render(const vcomp_corpus* corpus, const char* predictions_path,
                                    const vcomp_pool* pool, const char* config_json, const char* out_path,
                                    char** summary_json);

#ifdef __cplusplus
}
#endif

#endif
