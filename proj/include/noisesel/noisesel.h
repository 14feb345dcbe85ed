/* C interface to the noisesel engine. Every call returns an nsl_status; on
 * failure nsl_last_error() describes the problem (thread-local). Strings
 * returned through char** must be released with nsl_string_free. */
#ifndef NOISESEL_H
#define NOISESEL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NSL_API __declspec(dllexport)
#else
#define NSL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nsl_status {
    NSL_OK = 0,
    NSL_ERR_VALIDATION = 1, /* bad configuration or input */
    NSL_ERR_SHAPE = 2,      /* dimension mismatch */
    NSL_ERR_INDEX = 3,      /* class or sample index out of range */
    NSL_ERR_IO = 4,         /* file could not be read or written */
    NSL_ERR_ABORT = 5,      /* run aborted, e.g. class collapse */
    NSL_ERR_NULL = 6,       /* required pointer argument was NULL */
    NSL_ERR_INTERNAL = 7
} nsl_status;

typedef struct nsl_config nsl_config;
typedef struct nsl_dataset nsl_dataset;
typedef struct nsl_knowledge nsl_knowledge;

NSL_API const char* nsl_last_error(void);
NSL_API const char* nsl_version(void);
NSL_API void nsl_string_free(char* s);

/* Experiment configuration (JSON, version 1). overrides holds "dotted.key=value"
 * strings applied after parsing; it may be NULL when count is 0. */
NSL_API nsl_status nsl_config_parse(const char* json_text, const char* const* overrides, size_t count,
                                    nsl_config** out);
NSL_API nsl_status nsl_config_load(const char* path, const char* const* overrides, size_t count, nsl_config** out);
NSL_API nsl_status nsl_config_to_json(const nsl_config* cfg, char** out);
NSL_API nsl_status nsl_config_set_seed(nsl_config* cfg, uint64_t seed);
NSL_API nsl_status nsl_config_set_output_dir(nsl_config* cfg, const char* dir);
NSL_API nsl_status nsl_config_set_dump_selection(nsl_config* cfg, int enabled);
NSL_API void nsl_config_free(nsl_config* cfg);

/* Datasets in the id,noisy_label,true_label,f0.. CSV layout. */
NSL_API nsl_status nsl_dataset_load(const char* path, nsl_dataset** out);
NSL_API size_t nsl_dataset_size(const nsl_dataset* ds);
NSL_API size_t nsl_dataset_dim(const nsl_dataset* ds);
NSL_API size_t nsl_dataset_num_classes(const nsl_dataset* ds);
NSL_API void nsl_dataset_free(nsl_dataset* ds);

/* Noise-source knowledge. pairs holds count (i, j) entries, flattened:
 * samples of class i are likely labeled j. */
NSL_API nsl_status nsl_knowledge_load(const char* path, nsl_knowledge** out);
NSL_API nsl_status nsl_knowledge_from_pairs(size_t num_classes, const uint32_t* pairs, size_t count,
                                            nsl_knowledge** out);
NSL_API nsl_status nsl_knowledge_to_json(const nsl_knowledge* kn, char** out);
NSL_API void nsl_knowledge_free(nsl_knowledge* kn);

/* Writes dataset.csv, test.csv and knowledge.json for the given seed into out_dir. */
NSL_API nsl_status nsl_synth(const nsl_config* cfg, uint64_t seed, const char* out_dir);
/* Full experiment into the config's output_dir, seeds run on up to jobs threads. */
NSL_API nsl_status nsl_run(const nsl_config* cfg, size_t jobs);
/* Warm-up training on ds, then one detector pass. kn may be NULL. Writes
 * id,prob_clean,selected to out_csv. */
NSL_API nsl_status nsl_select(const nsl_config* cfg, const nsl_dataset* ds, const nsl_knowledge* kn, uint64_t seed,
                              const char* out_csv);
/* Warm-up training on ds, then a transition estimate. Writes transition.json
 * and the derived knowledge.json into out_dir. */
NSL_API nsl_status nsl_estimate_t(const nsl_config* cfg, const nsl_dataset* ds, uint64_t seed, const char* out_dir);
/* Knowledge-quality sweep over the product of the missing and noisy
 * fractions. Writes sweep.csv / sweep.json / sweep.txt into the config's
 * output_dir; *table_out (may be NULL) receives the rendered table. */
NSL_API nsl_status nsl_sweep(const nsl_config* cfg, const double* missing, size_t n_missing, const double* noisy,
                             size_t n_noisy, size_t jobs, char** table_out);
NSL_API nsl_status nsl_render_report(const char* run_dir, char** out);

/* prob: n x k row-major; labels: n entries. Fills prob_out (n) and selected_out (n). */
NSL_API nsl_status nsl_integrate_knowledge(const double* prob, size_t n, size_t k, const uint32_t* labels,
                                           const nsl_knowledge* kn, double* prob_out, uint8_t* selected_out);

#ifdef __cplusplus
}
#endif

#endif
