#include "nca_denoiser.h"

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>

#include "eval.hpp"
#include "train.hpp"

namespace fs = std::filesystem;

namespace {

thread_local std::string g_last_error;

nca_status fail(nca_status code, const std::string& msg) {
    g_last_error = msg;
    return code;
}

// Translates the library's exception taxonomy onto the C status codes.
template <typename Fn>
nca_status guarded(Fn&& fn) {
    try {
        fn();
        return NCA_OK;
    } catch (const nca::DataError& e) {
        return fail(NCA_ERR_DATA, e.what());
    } catch (const nca::NumericError& e) {
        return fail(NCA_ERR_NUMERIC, e.what());
    } catch (const nca::ConfigError& e) {
        return fail(NCA_ERR_CONFIG, e.what());
    } catch (const nca::ContractError& e) {
        return fail(NCA_ERR_CONFIG, e.what());
    } catch (const nca::DimensionError& e) {
        return fail(NCA_ERR_CONFIG, e.what());
    } catch (const std::exception& e) {
        return fail(NCA_ERR_CONFIG, e.what());
    }
}

void copy_out(const std::string& s, char* buf, size_t cap) {
    if (!buf || cap == 0) return;
    const size_t n = std::min(s.size(), cap - 1);
    std::memcpy(buf, s.data(), n);
    buf[n] = '\0';
}

}  // namespace

struct nca_model {
    nca::ModelParams params;
};

extern "C" {

const char* nca_last_error(void) { return g_last_error.c_str(); }

void nca_synth_options_init(nca_synth_options* opts) {
    std::memset(opts, 0, sizeof(*opts));
    opts->classes = 4;
    opts->train_per_class = 25;
    opts->valid_per_class = 5;
    opts->test_per_class = 5;
    opts->sample_rate = 16000;
    opts->duration_s = 1.0;
    opts->snr_min_db = 0.0;
    opts->snr_max_db = 20.0;
}

nca_status nca_synth(const nca_synth_options* opts, const char* out_dir,
                     char* manifest_path_out, size_t cap, size_t* row_count_out) {
    if (!opts || !out_dir) return fail(NCA_ERR_CONFIG, "nca_synth: null argument");
    return guarded([&]() {
        nca::MixtureManifest manifest;
        std::string manifest_path;
        if (opts->clean_dir) {
            if (!opts->noise_root) throw nca::ConfigError("nca_synth: noise_root required");
            fs::create_directories(out_dir);
            manifest_path = (fs::path(out_dir) / "manifest.txt").string();
            nca::SynthSpec spec;
            spec.train_count = opts->train_count;
            spec.valid_count = opts->valid_count;
            spec.test_count = opts->test_count;
            spec.snr_min = opts->snr_min_db;
            spec.snr_max = opts->snr_max_db;
            spec.seed = opts->seed;
            manifest = nca::synthesize_corpus(opts->clean_dir, opts->noise_root, spec,
                                              manifest_path);
        } else {
            nca::ProceduralSpec spec;
            spec.classes = opts->classes;
            spec.train_per_class = opts->train_per_class;
            spec.valid_per_class = opts->valid_per_class;
            spec.test_per_class = opts->test_per_class;
            spec.sample_rate = opts->sample_rate;
            spec.duration_s = opts->duration_s;
            spec.snr_min = opts->snr_min_db;
            spec.snr_max = opts->snr_max_db;
            spec.seed = opts->seed;
            manifest = nca::procedural_testset(out_dir, spec);
            manifest_path = (fs::path(out_dir) / "manifest.txt").string();
        }
        copy_out(manifest_path, manifest_path_out, cap);
        if (row_count_out) *row_count_out = manifest.rows.size();
    });
}

void nca_train_options_init(nca_train_options* opts) {
    std::memset(opts, 0, sizeof(*opts));
    opts->variant = "ca-att-lstm2";
    opts->filters = 512;
    opts->filter_length = 160;
    opts->hop = 80;
    opts->spec_hidden = 256;
    opts->noise_hidden = 112;
    opts->speech_hidden = 112;
    opts->enhance_size = 256;
    opts->classes = 20;
    opts->window = 5;
    opts->alpha = 0.1;
    opts->lr_start = 1e-4;
    opts->lr_end = 1e-8;
    opts->max_epochs = 200;
    opts->patience = 10;
    opts->accum = 1;
    opts->grad_clip = 5.0;
}

nca_status nca_train(const nca_train_options* opts, const char* manifest_path,
                     const char* out_dir, size_t* best_epoch_out,
                     double* best_valid_loss_out) {
    if (!opts || !manifest_path || !out_dir) {
        return fail(NCA_ERR_CONFIG, "nca_train: null argument");
    }
    return guarded([&]() {
        nca::ModelConfig mc;
        mc.variant = nca::variant_from_name(opts->variant ? opts->variant : "");
        mc.N = opts->filters;
        mc.L = opts->filter_length;
        mc.hop = opts->hop;
        mc.H = opts->spec_hidden;
        mc.Hn = opts->noise_hidden;
        mc.Hs = opts->speech_hidden;
        mc.Es = opts->enhance_size;
        mc.C = opts->classes;
        mc.window = opts->window;

        nca::TrainConfig tc;
        tc.alpha = opts->alpha;
        tc.lr_start = opts->lr_start;
        tc.lr_end = opts->lr_end;
        tc.max_epochs = opts->max_epochs;
        tc.patience = opts->patience;
        tc.accum = opts->accum;
        tc.grad_clip = opts->grad_clip;
        tc.seed = opts->seed;

        nca::MixtureManifest manifest = nca::load_manifest(manifest_path);
        nca::TrainResult res = nca::train_loop(manifest, mc, tc, out_dir,
                                               opts->resume_from ? opts->resume_from : "");
        if (best_epoch_out) *best_epoch_out = res.best_epoch;
        if (best_valid_loss_out) *best_valid_loss_out = res.best_valid_loss;
    });
}

nca_status nca_model_open(const char* checkpoint_path, nca_model** model_out) {
    if (!checkpoint_path || !model_out) {
        return fail(NCA_ERR_CONFIG, "nca_model_open: null argument");
    }
    *model_out = nullptr;
    return guarded([&]() {
        auto loaded = nca::load_checkpoint(checkpoint_path);
        *model_out = new nca_model{std::move(loaded.params)};
    });
}

void nca_model_close(nca_model* model) { delete model; }

nca_status nca_model_param_count(const nca_model* model, uint64_t* count_out) {
    if (!model || !count_out) return fail(NCA_ERR_CONFIG, "nca_model_param_count: null argument");
    return guarded([&]() { *count_out = nca::count_params(model->params); });
}

nca_status nca_model_describe(const nca_model* model, char* buf, size_t cap) {
    if (!model) return fail(NCA_ERR_CONFIG, "nca_model_describe: null argument");
    return guarded([&]() {
        const nca::ModelConfig& c = model->params.cfg;
        char line[512];
        std::snprintf(line, sizeof(line),
                      "variant=%s\nfilters=%zu\nfilter_length=%zu\nhop=%zu\nspec_hidden=%zu\n"
                      "noise_hidden=%zu\nspeech_hidden=%zu\nenhance_size=%zu\nclasses=%zu\n"
                      "window=%zu\n",
                      nca::variant_name(c.variant), c.N, c.L, c.hop, c.H, c.Hn, c.Hs, c.Es,
                      c.C, c.window);
        copy_out(line, buf, cap);
    });
}

nca_status nca_denoise_buffer(const nca_model* model, const double* in, size_t length,
                              double* out) {
    if (!model || !in || !out) return fail(NCA_ERR_CONFIG, "nca_denoise_buffer: null argument");
    return guarded([&]() {
        std::vector<nca::real> samples(in, in + length);
        nca::ForwardOutput fw = nca::forward(samples, model->params);
        for (size_t i = 0; i < length; ++i) out[i] = double(fw.denoised.data()[i]);
    });
}

nca_status nca_denoise_wav(const nca_model* model, const char* in_wav, const char* out_wav) {
    if (!model || !in_wav || !out_wav) {
        return fail(NCA_ERR_CONFIG, "nca_denoise_wav: null argument");
    }
    return guarded([&]() {
        nca::Utterance utt = nca::read_wav(in_wav);
        nca::ForwardOutput fw = nca::forward(utt.samples, model->params);
        nca::Utterance out;
        out.sample_rate = utt.sample_rate;
        out.samples = fw.denoised.data();
        nca::write_wav(out, out_wav);
    });
}

nca_status nca_eval(const nca_model* model, const char* const* manifest_paths,
                    size_t manifest_count, const char* split, const char* report_path,
                    const char* spectrogram_dir) {
    if (!model || !manifest_paths || !report_path) {
        return fail(NCA_ERR_CONFIG, "nca_eval: null argument");
    }
    return guarded([&]() {
        std::vector<std::string> paths(manifest_paths, manifest_paths + manifest_count);
        nca::EvalOptions opts;
        if (split) opts.split = split;
        if (spectrogram_dir) opts.spectrogram_dir = spectrogram_dir;
        nca::EvalReport report = nca::evaluate(model->params, paths, opts);
        std::ofstream os(report_path, std::ios::binary);
        if (!os) throw nca::DataError("nca_eval: cannot open report path");
        os << report.table() << "\n" << report.machine_lines();
    });
}

}  // extern "C"
