/* Public C API of the noise-classification-aided attention denoiser.
 *
 * All functions return an nca_status; NCA_OK on success. On failure a
 * thread-local message is available via nca_last_error(). Handles are
 * opaque; free them with the matching *_close function.
 */
#ifndef NCA_DENOISER_H
#define NCA_DENOISER_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum nca_status {
    NCA_OK = 0,
    NCA_ERR_CONFIG = 1,  /* invalid configuration or API misuse */
    NCA_ERR_DATA = 2,    /* missing/malformed files or inputs */
    NCA_ERR_NUMERIC = 3  /* NaN/Inf escaped a computation */
} nca_status;

/* Message describing the most recent failure on this thread. */
const char* nca_last_error(void);

/* ---- corpus synthesis ------------------------------------------------- */

typedef struct nca_synth_options {
    /* procedural generator (used when clean_dir is NULL) */
    size_t classes;
    size_t train_per_class;
    size_t valid_per_class;
    size_t test_per_class;
    int sample_rate;
    double duration_s;
    /* directory-based synthesis (used when clean_dir is non-NULL) */
    const char* clean_dir;   /* *.wav */
    const char* noise_root;  /* noise_root/<class_name>/*.wav */
    size_t train_count;
    size_t valid_count;
    size_t test_count;
    /* shared */
    double snr_min_db;
    double snr_max_db;
    uint64_t seed;
} nca_synth_options;

void nca_synth_options_init(nca_synth_options* opts);

/* Writes WAVs (procedural mode) and the manifest under out_dir. The manifest
 * path is copied into manifest_path_out (truncated to cap). row_count_out may
 * be NULL. */
nca_status nca_synth(const nca_synth_options* opts, const char* out_dir,
                     char* manifest_path_out, size_t cap, size_t* row_count_out);

/* ---- training ----------------------------------------------------------- */

typedef struct nca_train_options {
    const char* variant;  /* pure-lstm | att-lstm | ca-att-lstm1 | ca-att-lstm2 */
    /* model sizes */
    size_t filters;          /* N */
    size_t filter_length;    /* L, samples */
    size_t hop;              /* segmentation hop, samples */
    size_t spec_hidden;      /* H */
    size_t noise_hidden;     /* Hn */
    size_t speech_hidden;    /* Hs */
    size_t enhance_size;     /* Es */
    size_t classes;          /* C */
    size_t window;           /* causal attention window w */
    /* optimization */
    double alpha;            /* classification loss weight */
    double lr_start;
    double lr_end;
    size_t max_epochs;
    size_t patience;
    size_t accum;            /* utterances per optimizer step */
    double grad_clip;        /* global norm; <= 0 disables */
    uint64_t seed;
    const char* resume_from; /* NULL, or a last.state file */
} nca_train_options;

void nca_train_options_init(nca_train_options* opts);

/* Trains on the manifest's train/valid splits; writes best.ckpt, last.state
 * and metrics.log under out_dir. best_epoch_out/best_valid_loss_out may be
 * NULL. */
nca_status nca_train(const nca_train_options* opts, const char* manifest_path,
                     const char* out_dir, size_t* best_epoch_out,
                     double* best_valid_loss_out);

/* ---- inference and evaluation ------------------------------------------ */

typedef struct nca_model nca_model;

nca_status nca_model_open(const char* checkpoint_path, nca_model** model_out);
void nca_model_close(nca_model* model);

/* Learnable scalar count of the loaded model. */
nca_status nca_model_param_count(const nca_model* model, uint64_t* count_out);

/* Key=value description (variant and sizes), one entry per line. */
nca_status nca_model_describe(const nca_model* model, char* buf, size_t cap);

/* Denoises a mono waveform in place of out (same length as in). */
nca_status nca_denoise_buffer(const nca_model* model, const double* in, size_t length,
                              double* out);

/* Reads in_wav, denoises, writes a same-length same-rate WAV to out_wav. */
nca_status nca_denoise_wav(const nca_model* model, const char* in_wav, const char* out_wav);

/* Evaluates the model on the named split of each manifest (in argument
 * order) and writes a human-readable table plus machine-readable lines to
 * report_path. spectrogram_dir may be NULL; when set, per-utterance noisy
 * and masked spectrograms are dumped there as plain-text arrays. */
nca_status nca_eval(const nca_model* model, const char* const* manifest_paths,
                    size_t manifest_count, const char* split, const char* report_path,
                    const char* spectrogram_dir);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* NCA_DENOISER_H */
