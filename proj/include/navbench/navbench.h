#ifndef NAVBENCH_NAVBENCH_H
#define NAVBENCH_NAVBENCH_H

#include <stddef.h>
#include <stdint.h>

#if defined(NAVBENCH_BUILDING)
#define NB_API __attribute__((visibility("default")))
#else
#define NB_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every call returning nb_status stores a message for the
 * calling thread, readable with nb_last_error(). */
typedef enum nb_status {
    NB_OK = 0,
    NB_ERR_INVALID_ARGUMENT = 1,
    NB_ERR_PARSE = 2,
    NB_ERR_MISMATCH = 3,
    NB_ERR_IO = 4,
    NB_ERR_CONTRACT = 5,
    NB_ERR_NUMERIC = 6,
    NB_ERR_RUNTIME = 7
} nb_status;

NB_API const char* nb_last_error(void);
NB_API const char* nb_version(void);
NB_API const char* nb_status_name(nb_status status);

/* Owned byte buffer returned by text-producing calls. */
typedef struct nb_buffer nb_buffer;
NB_API const char* nb_buffer_data(const nb_buffer* buf);
NB_API size_t nb_buffer_size(const nb_buffer* buf);
NB_API void nb_buffer_free(nb_buffer* buf);

/* ---- configuration ---------------------------------------------------- */

typedef struct nb_config nb_config;

/* paper_scale != 0 selects the 84x84 / 256-64 network preset. */
NB_API nb_status nb_config_new(int paper_scale, nb_config** out);
NB_API void nb_config_free(nb_config* cfg);
NB_API nb_status nb_config_load_file(nb_config* cfg, const char* path);
/* Applies NAVBENCH_<SECTION>_<KEY> variables from the process environment. */
NB_API nb_status nb_config_apply_environment(nb_config* cfg);
/* "section.key=value". */
NB_API nb_status nb_config_set(nb_config* cfg, const char* assignment);
/* Validates; must be called before the config is used. */
NB_API nb_status nb_config_finalize(nb_config* cfg);
NB_API nb_status nb_config_text(const nb_config* cfg, nb_buffer** out);
NB_API uint64_t nb_config_hash(const nb_config* cfg);
/* Newline-separated list of every section.key. */
NB_API nb_status nb_config_keys(nb_buffer** out);

/* ---- map pool ---------------------------------------------------------- */

typedef struct nb_pool nb_pool;

/* Uses the [pool] section of cfg for sizes. */
NB_API nb_status nb_pool_build(const nb_config* cfg, uint64_t pool_seed, nb_pool** out);
NB_API nb_status nb_pool_load(const char* manifest_path, nb_pool** out);
/* Writes manifest.tsv and one <id>.map file per map into dir. */
NB_API nb_status nb_pool_save(const nb_pool* pool, const char* dir);
NB_API void nb_pool_free(nb_pool* pool);
NB_API size_t nb_pool_size(const nb_pool* pool);
NB_API uint64_t nb_pool_hash(const nb_pool* pool);

/* ---- training ------------------------------------------------------------ */

typedef struct nb_train_progress {
    uint64_t global_step;
    int worker;
    int has_episode;
    double episode_reward;
    int goal_hits;
    double wall_time_s;
} nb_train_progress;

typedef void (*nb_progress_fn)(const nb_train_progress* progress, void* user);

typedef struct nb_train_summary {
    uint64_t global_step;
    uint64_t updates;
    int failed_workers;
    uint64_t checkpoint_hash;
} nb_train_summary;

/* Trains the configured stage. Writes <out_dir>/train.csv,
 * periodic <out_dir>/ckpt_<step>.bin and <out_dir>/final.bin. init_checkpoint
 * may be NULL for fresh parameters. progress may be NULL. */
NB_API nb_status nb_train(const nb_config* cfg, const nb_pool* pool, uint64_t seed, const char* init_checkpoint,
                          const char* out_dir, nb_progress_fn progress, void* user, nb_train_summary* summary);

/* ---- evaluation ---------------------------------------------------------- */

typedef struct nb_eval_summary {
    int episodes;
    double reward_mean;
    double reward_std;
    double goal_hits_mean;
    double latency_mean;
    int latency_count;
    double dist_ineff_mean;
    int dist_ineff_count;
} nb_eval_summary;

/* Evaluates a checkpoint on the configured stage. Writes
 * <out_dir>/report.csv, summary.json, manifest.txt and logs/<map>_<ep>.jsonl.
 * map_ids is a comma-separated override of the evaluation maps, or NULL.
 * Fails with NB_ERR_MISMATCH before any episode when the checkpoint does
 * not fit the config. */
NB_API nb_status nb_eval(const nb_config* cfg, const nb_pool* pool, const char* checkpoint, uint64_t eval_seed,
                         const char* map_ids, const char* out_dir, nb_eval_summary* summary);
/* Re-runs an evaluation from its manifest.txt into out_dir. The stage,
 * variant, flags, episode count, action mode, maps and eval seed come from
 * the manifest; cfg must reproduce the recorded config hash and the pool
 * and checkpoint must match the recorded hashes. */
NB_API nb_status nb_eval_replay(const nb_config* cfg, const char* manifest_path, const nb_pool* pool,
                                const char* checkpoint, const char* out_dir, nb_eval_summary* summary);
/* Uniform-random policy on the configured stage; same outputs as nb_eval. */
NB_API nb_status nb_baseline(const nb_config* cfg, const nb_pool* pool, uint64_t eval_seed, const char* map_ids,
                             const char* out_dir, nb_eval_summary* summary);
/* Apples x textures grid; one subdirectory per cell plus ablation.csv. */
NB_API nb_status nb_ablate(const nb_config* cfg, const nb_pool* pool, const char* checkpoint, uint64_t eval_seed,
                           const char* out_dir);
/* All five stages: trains each (train.max_steps) unless checkpoint_dir
 * holds stage<k>.bin, then evaluates; writes bench.csv and bench.svg. */
NB_API nb_status nb_bench(const nb_config* cfg, const nb_pool* pool, uint64_t seed, const char* checkpoint_dir,
                          const char* out_dir);

/* ---- analysis ------------------------------------------------------------ */

typedef struct nb_saliency_summary {
    int frames;
    int zero_frames;
    int central_majority_frames;
    double mean_central_mass;
    double mask_min;
    /* smallest per-frame maximum over frames with nonzero gradient */
    double min_frame_max;
    double max_frame_max;
} nb_saliency_summary;

/* Saliency masks and top-down frames for one evaluated episode log, which
 * must come from an evaluation with the same config (stage included).
 * Writes saliency.csv (per-frame central mass), saliency.json, view, mask
 * and masked-view PPMs every frame_stride steps, and topdown.ppm.
 * summary may be NULL. */
NB_API nb_status nb_analyze_episode(const nb_config* cfg, const nb_pool* pool, const char* checkpoint,
                                    const char* log_path, int frame_stride, const char* out_dir,
                                    nb_saliency_summary* summary);
/* Reward curves from training CSVs (kind "reward") or metric bars from
 * report CSVs (kind "metric", column chosen by metric). paths is a
 * comma-separated list. */
NB_API nb_status nb_plot(const char* kind, const char* paths, const char* metric, const char* out_svg);

/* ---- self test ----------------------------------------------------------- */

/* Runs the property suites; *passed receives 1 when all pass. The report
 * lists one line per suite. */
NB_API nb_status nb_selftest(int quick, int* passed, nb_buffer** report);

#ifdef __cplusplus
}
#endif

#endif
