/* SPDX-License-Identifier: Apache-2.0 */
#ifndef TFORMER_TFORMER_H
#define TFORMER_TFORMER_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define TFK_API __declspec(dllexport)
#else
#define TFK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. The first three double as CLI exit codes. */
typedef enum tfk_status {
    TFK_OK = 0,
    TFK_E_CONFIG = 1,
    TFK_E_DATA = 2,
    TFK_E_NUMERIC = 3,
    TFK_E_IO = 4,
    TFK_E_CONTRACT = 5,
    TFK_E_DIMENSION = 6,
    TFK_E_WINDOW = 7,
    TFK_E_FUSION = 8,
    TFK_E_LABEL = 9,
    TFK_E_SCHEMA = 10,
    TFK_E_ARGUMENT = 11,
    TFK_E_INTERNAL = 12
} tfk_status;

/* Message of the last failing call on this thread; "" after success. */
TFK_API const char* tfk_last_error(void);
TFK_API const char* tfk_status_name(tfk_status status);

typedef struct tfk_config tfk_config;
typedef struct tfk_dataset tfk_dataset;
typedef struct tfk_model tfk_model;

/* ---- configuration ---------------------------------------------------- */

TFK_API tfk_status tfk_config_default(tfk_config** out);
TFK_API tfk_status tfk_config_load(const char* path, tfk_config** out);
TFK_API tfk_status tfk_config_parse(const char* text, tfk_config** out);
/* One `section.key` assignment; no validation until tfk_config_resolve. */
TFK_API tfk_status tfk_config_set(tfk_config* config, const char* key, const char* value);
/* Applies TFK_SEED when set, derives the init seed, validates. */
TFK_API tfk_status tfk_config_resolve(tfk_config* config);
/* Canonical text. Copies at most `capacity` bytes including the NUL;
 * `needed` (optional) receives the full size including the NUL. */
TFK_API tfk_status tfk_config_text(const tfk_config* config, char* buffer, size_t capacity, size_t* needed);
TFK_API tfk_status tfk_config_write(const tfk_config* config, const char* path);
TFK_API void tfk_config_free(tfk_config* config);

/* ---- data ------------------------------------------------------------- */

/* Synthetic generation or manifest loading, as the config says. */
TFK_API tfk_status tfk_dataset_open(const tfk_config* config, tfk_dataset** out);
TFK_API tfk_status tfk_dataset_counts(const tfk_dataset* data, size_t* train, size_t* val, size_t* test);
/* Bayes accuracy of DIAG for a modality subset such as "derm+meta";
 * synthetic datasets only. */
TFK_API tfk_status tfk_dataset_bayes(const tfk_dataset* data, const char* subset, double* out);
/* Images as PNG plus manifest.csv (and bayes.csv for synthetic data). */
TFK_API tfk_status tfk_dataset_write(const tfk_dataset* data, const char* dir);
TFK_API void tfk_dataset_free(tfk_dataset* data);

/* ---- model ------------------------------------------------------------ */

typedef struct tfk_epoch {
    size_t epoch;
    double lr;
    double train_loss;
    double val_avg;
} tfk_epoch;

typedef void (*tfk_epoch_fn)(const tfk_epoch* row, void* user);

typedef struct tfk_train_summary {
    size_t epochs;
    size_t best_epoch;
    double best_val_avg;
} tfk_train_summary;

typedef struct tfk_eval_summary {
    size_t cases;
    double loss;
    double avg;
    double diag_accuracy;
    double ave_sen;
    double ave_spe;
    double ave_pre;
    double ave_f1;
    int degenerate;
} tfk_eval_summary;

/* Builds a model in the precision the config names (32 or 64 bit). */
TFK_API tfk_status tfk_model_create(const tfk_config* config, tfk_model** out);
/* Rebuilds the model from the config text stored in the checkpoint. */
TFK_API tfk_status tfk_model_load(const char* path, tfk_model** out);
TFK_API tfk_status tfk_model_save(const tfk_model* model, const char* path);
/* Copy of the config the model was built from. */
TFK_API tfk_status tfk_model_config(const tfk_model* model, tfk_config** out);
TFK_API void tfk_model_free(tfk_model* model);

/* Trains with the model's train.* settings. `log_csv`, `on_epoch` and
 * `summary` may be NULL. */
TFK_API tfk_status tfk_model_train(tfk_model* model, const tfk_dataset* data, const char* log_csv,
                                   tfk_epoch_fn on_epoch, void* user, tfk_train_summary* summary);
/* Evaluates one split ("train", "val", "test"). When `report_dir` is set,
 * writes per_label.csv, per_class.csv, summary.csv and predictions.csv. */
TFK_API tfk_status tfk_model_evaluate(const tfk_model* model, const tfk_dataset* data, const char* split,
                                      const char* report_dir, tfk_eval_summary* summary);

typedef void (*tfk_group_fn)(const char* group, size_t count, void* user);

TFK_API tfk_status tfk_model_param_count(const tfk_model* model, size_t* total);
TFK_API tfk_status tfk_model_param_groups(const tfk_model* model, tfk_group_fn fn, void* user);
TFK_API tfk_status tfk_model_hmt_blocks(const tfk_model* model, size_t* count);

/* Recording forward on one case; one CSV ("head,query,key,weight") per
 * attention record and one 8-bit PGM per head, named
 * stage<s>_block<b>_<branch>[_head<h>] (the MTP record is mtp_meta). */
TFK_API tfk_status tfk_model_export_attention(const tfk_model* model, const tfk_dataset* data, const char* case_id,
                                              const char* out_dir, size_t* records);

/* ---- analysis --------------------------------------------------------- */

TFK_API uint64_t tfk_wmsa_flops(uint64_t h_tokens, uint64_t w_tokens, uint64_t channels, uint64_t window);
/* Per-stage WMSA FLOP table for the config's backbone as CSV. */
TFK_API tfk_status tfk_flops_csv(const tfk_config* config, const char* path);

typedef struct tfk_grad_row {
    char module[32];
    double max_rel_error;
    size_t coordinates;
    int pass;
} tfk_grad_row;

/* Runs the 64-bit gradient suite at the config's widths. Fills up to
 * `capacity` rows; `count` receives the number of rows produced. */
TFK_API tfk_status tfk_gradcheck(const tfk_config* config, uint64_t seed, double tolerance, tfk_grad_row* rows,
                                 size_t capacity, size_t* count);

/* Test hook: scales the backward of every tape op named `op` by 1.5.
 * NULL or "" disables it. */
TFK_API void tfk_debug_corrupt_backward(const char* op);

#ifdef __cplusplus
}
#endif

#endif
