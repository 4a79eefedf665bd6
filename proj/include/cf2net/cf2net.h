/*
 * cf2net — coarse-to-fine fusion segmentation toolkit, C API.
 *
 * All entry points return a cf2n_status; CF2N_OK means success and anything
 * else leaves a human-readable description in cf2n_last_error(). Objects are
 * opaque handles that must be released with their matching destroy/close
 * call. Strings returned through char** out-parameters are heap-allocated
 * and must be released with cf2n_string_free().
 */
#ifndef CF2NET_CF2NET_H
#define CF2NET_CF2NET_H

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define CF2N_API __declspec(dllexport)
#else
#define CF2N_API __attribute__((visibility("default")))
#endif

typedef enum cf2n_status {
    CF2N_OK = 0,
    CF2N_ERR_INVALID_ARGUMENT = 1, /* bad handle or null pointer */
    CF2N_ERR_CONFIG = 2,           /* invalid or contradictory configuration */
    CF2N_ERR_IO = 3,               /* filesystem or decoding failure */
    CF2N_ERR_NUMERIC = 4,          /* non-finite loss or similar breakdown */
    CF2N_ERR_INTERNAL = 5
} cf2n_status;

typedef struct cf2n_config cf2n_config; /* experiment configuration */
typedef struct cf2n_model cf2n_model;   /* loaded checkpoint for inference */

CF2N_API const char* cf2n_version(void);

/* Message describing the most recent failure on this thread. */
CF2N_API const char* cf2n_last_error(void);

CF2N_API void cf2n_string_free(char* s);

/* ------------------------------------------------------------------ */
/* Configuration                                                       */
/* ------------------------------------------------------------------ */

/* Defaults; never fails with a valid out pointer. */
CF2N_API cf2n_status cf2n_config_create(cf2n_config** out);

/* Defaults overridden by a JSON document. */
CF2N_API cf2n_status cf2n_config_from_json(const char* json_text, cf2n_config** out);

/* Defaults overridden by a JSON file. */
CF2N_API cf2n_status cf2n_config_load_file(const char* path, cf2n_config** out);

/* Deep-merges a JSON document into an existing configuration. */
CF2N_API cf2n_status cf2n_config_merge_json(cf2n_config* cfg, const char* json_text);

/* Sets one value by dotted path, e.g. ("model.base_width", "16").
 * The value is parsed as JSON when possible, otherwise taken as a string. */
CF2N_API cf2n_status cf2n_config_set(cf2n_config* cfg, const char* dotted_key,
                                     const char* value);

/* Fully resolved configuration as JSON. */
CF2N_API cf2n_status cf2n_config_to_json(const cf2n_config* cfg, char** out_json);

CF2N_API void cf2n_config_destroy(cf2n_config* cfg);

/* ------------------------------------------------------------------ */
/* Pipeline operations                                                 */
/* ------------------------------------------------------------------ */

/* Materializes the preprocessed dataset (images, masks, edge bands and
 * superpixel channels) with a manifest; re-running with unchanged
 * parameters is a no-op. out_manifest_json may be NULL. */
CF2N_API cf2n_status cf2n_prepare(const cf2n_config* cfg, char** out_manifest_json);

/* k-fold cross-validated training; writes checkpoints, logs and the
 * metrics report under the configured output directory. */
CF2N_API cf2n_status cf2n_train(const cf2n_config* cfg, char** out_report_json);

/* Evaluates the checkpoint named in the configuration on its held-out
 * fold (or on the whole prepared set when no fold is recorded). */
CF2N_API cf2n_status cf2n_evaluate(const cf2n_config* cfg, char** out_report_json);

/* Cross-validates every requested ablation variant and emits the combined
 * table (JSON + text) under the output directory. */
CF2N_API cf2n_status cf2n_ablate(const cf2n_config* cfg, char** out_table_json);

/* Gradient checks, metric oracles and the overfit smoke test. Returns
 * CF2N_OK with a report even when individual checks fail; the report's
 * "passed" field carries the verdict. */
CF2N_API cf2n_status cf2n_selftest(const cf2n_config* cfg, char** out_report_json);

/* Renders a metrics report (JSON text) as the human-readable table. */
CF2N_API cf2n_status cf2n_report_render_table(const char* report_json, char** out_text);

/* ------------------------------------------------------------------ */
/* Inference                                                           */
/* ------------------------------------------------------------------ */

CF2N_API cf2n_status cf2n_model_open(const char* checkpoint_path, cf2n_model** out);

/* Canonical input side length S of the loaded model, or -1 on error. */
CF2N_API int cf2n_model_input_size(const cf2n_model* model);

/* Model configuration as JSON. */
CF2N_API cf2n_status cf2n_model_config(const cf2n_model* model, char** out_json);

/* Inference-time option override (e.g. "use_superpixel", "false").
 * Overrides that contradict the checkpoint configuration fail with
 * CF2N_ERR_CONFIG. */
CF2N_API cf2n_status cf2n_model_override(cf2n_model* model, const char* key,
                                         const char* value);

/* Reads a grayscale PNG, applies the checkpoint's preprocessing, and writes
 * mask.png, mask_prob.png, overlay.png (and edge.png when the model has an
 * edge head) into out_dir. */
CF2N_API cf2n_status cf2n_model_predict_file(cf2n_model* model, const char* image_png,
                                             const char* out_dir);

/* In-memory prediction: image is h*w floats in [0,1], row-major. mask_probs
 * and edge_probs (each S*S floats, S = cf2n_model_input_size) receive the
 * fusion and edge probability maps; edge_probs may be NULL and is left
 * untouched when the model has no edge head. */
CF2N_API cf2n_status cf2n_model_predict(cf2n_model* model, const float* image, int h, int w,
                                        float* mask_probs, float* edge_probs);

CF2N_API void cf2n_model_close(cf2n_model* model);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* CF2NET_CF2NET_H */
