// Command-line front end. Talks to the core exclusively through the public
// C API in nca_denoiser.h.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nca_denoiser.h"

namespace fs = std::filesystem;

namespace {

// Relative output paths land under $NCA_OUT_ROOT when it is set.
std::string resolve_out(const std::string& path) {
    const char* root = std::getenv("NCA_OUT_ROOT");
    if (!root || *root == '\0' || path.empty() || fs::path(path).is_absolute()) return path;
    return (fs::path(root) / path).string();
}

int report_status(nca_status st) {
    if (st != NCA_OK) std::fprintf(stderr, "error: %s\n", nca_last_error());
    return static_cast<int>(st);
}

// Serialized copy of the resolved options, written next to the outputs so a
// run can be reproduced from its output directory alone.
void write_run_config(CLI::App& app, const std::string& out_dir) {
    fs::create_directories(out_dir);
    std::ofstream os(fs::path(out_dir) / "run.config");
    os << app.config_to_str(true, false);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"noise-classification-aided attention denoiser"};
    app.require_subcommand(1);

    // ---- synth -------------------------------------------------------------
    nca_synth_options synth;
    nca_synth_options_init(&synth);
    std::string synth_out, clean_dir, noise_root;
    std::size_t per_class = 0;
    bool procedural = false;

    CLI::App* cmd_synth = app.add_subcommand("synth", "synthesize a mixture corpus");
    cmd_synth->set_config("--config");
    cmd_synth->add_flag("--procedural", procedural, "use the built-in tone/noise generator");
    cmd_synth->add_option("--classes", synth.classes, "noise class count");
    cmd_synth->add_option("--per-class", per_class,
                          "total procedural utterances per class (split 70/15/15)");
    cmd_synth->add_option("--per-class-train", synth.train_per_class);
    cmd_synth->add_option("--per-class-valid", synth.valid_per_class);
    cmd_synth->add_option("--per-class-test", synth.test_per_class);
    cmd_synth->add_option("--sample-rate", synth.sample_rate);
    cmd_synth->add_option("--duration", synth.duration_s, "procedural utterance length, seconds");
    cmd_synth->add_option("--clean-dir", clean_dir, "directory of clean wav files");
    cmd_synth->add_option("--noise-root", noise_root, "noise/<class_name>/*.wav root");
    cmd_synth->add_option("--count-train", synth.train_count);
    cmd_synth->add_option("--count-valid", synth.valid_count);
    cmd_synth->add_option("--count-test", synth.test_count);
    cmd_synth->add_option("--snr-min", synth.snr_min_db);
    cmd_synth->add_option("--snr-max", synth.snr_max_db);
    cmd_synth->add_option("--seed", synth.seed);
    cmd_synth->add_option("--out", synth_out, "output directory")->required();

    // ---- train -------------------------------------------------------------
    nca_train_options train;
    nca_train_options_init(&train);
    std::string train_manifest, train_out, variant = train.variant, resume;

    CLI::App* cmd_train = app.add_subcommand("train", "train a model on a manifest");
    cmd_train->set_config("--config");
    cmd_train->add_option("--manifest", train_manifest)->required();
    cmd_train->add_option("--out", train_out, "output directory")->required();
    cmd_train->add_option("--variant", variant,
                          "pure-lstm | att-lstm | ca-att-lstm1 | ca-att-lstm2");
    cmd_train->add_option("--filters", train.filters, "encoder/decoder filter count N");
    cmd_train->add_option("--filter-length", train.filter_length, "filter length L, samples");
    cmd_train->add_option("--hop", train.hop, "segmentation hop, samples");
    cmd_train->add_option("--spec-hidden", train.spec_hidden);
    cmd_train->add_option("--noise-hidden", train.noise_hidden);
    cmd_train->add_option("--speech-hidden", train.speech_hidden);
    cmd_train->add_option("--enhance-size", train.enhance_size);
    cmd_train->add_option("--classes", train.classes);
    cmd_train->add_option("--window", train.window, "causal attention window w");
    cmd_train->add_option("--alpha", train.alpha, "classification loss weight");
    cmd_train->add_option("--lr-start", train.lr_start);
    cmd_train->add_option("--lr-end", train.lr_end);
    cmd_train->add_option("--max-epochs", train.max_epochs);
    cmd_train->add_option("--patience", train.patience);
    cmd_train->add_option("--accum", train.accum, "utterances per optimizer step");
    cmd_train->add_option("--grad-clip", train.grad_clip);
    cmd_train->add_option("--seed", train.seed);
    cmd_train->add_option("--resume", resume, "last.state file to resume from");

    // ---- eval --------------------------------------------------------------
    std::string eval_ckpt, eval_split = "test", eval_out, spec_dir;
    std::vector<std::string> eval_manifests;
    bool dump_specs = false;

    CLI::App* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint on manifests");
    cmd_eval->set_config("--config");
    cmd_eval->add_option("--checkpoint", eval_ckpt)->required();
    cmd_eval->add_option("manifests", eval_manifests, "manifest files")->required();
    cmd_eval->add_option("--split", eval_split);
    cmd_eval->add_option("--out", eval_out, "output directory")->required();
    cmd_eval->add_flag("--dump-spectrograms", dump_specs,
                       "write per-utterance noisy/masked spectrogram arrays");

    // ---- denoise -----------------------------------------------------------
    std::string dn_ckpt, dn_in, dn_out;
    CLI::App* cmd_denoise = app.add_subcommand("denoise", "denoise a single wav file");
    cmd_denoise->add_option("--checkpoint", dn_ckpt)->required();
    cmd_denoise->add_option("input", dn_in, "input wav")->required();
    cmd_denoise->add_option("output", dn_out, "output wav")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (cmd_synth->parsed()) {
        if (per_class > 0) {
            std::size_t side = std::max<std::size_t>(1, per_class * 15 / 100);
            if (2 * side >= per_class) side = 0;
            synth.valid_per_class = side;
            synth.test_per_class = side;
            synth.train_per_class = per_class - 2 * side;
        }
        if (!procedural) {
            if (clean_dir.empty() || noise_root.empty()) {
                std::fprintf(stderr,
                             "error: need --procedural, or --clean-dir with --noise-root\n");
                return 1;
            }
            synth.clean_dir = clean_dir.c_str();
            synth.noise_root = noise_root.c_str();
        }
        synth_out = resolve_out(synth_out);
        write_run_config(*cmd_synth, synth_out);
        char manifest_path[4096];
        std::size_t rows = 0;
        nca_status st = nca_synth(&synth, synth_out.c_str(), manifest_path,
                                  sizeof(manifest_path), &rows);
        if (st == NCA_OK) std::printf("manifest: %s\nrows: %zu\n", manifest_path, rows);
        return report_status(st);
    }

    if (cmd_train->parsed()) {
        train.variant = variant.c_str();
        if (!resume.empty()) train.resume_from = resume.c_str();
        train_out = resolve_out(train_out);
        write_run_config(*cmd_train, train_out);
        std::size_t best_epoch = 0;
        double best_valid = 0;
        nca_status st = nca_train(&train, train_manifest.c_str(), train_out.c_str(),
                                  &best_epoch, &best_valid);
        if (st == NCA_OK) {
            std::printf("best epoch: %zu\nbest valid loss: %.17g\ncheckpoint: %s\n",
                        best_epoch, best_valid,
                        (fs::path(train_out) / "best.ckpt").string().c_str());
        }
        return report_status(st);
    }

    if (cmd_eval->parsed()) {
        eval_out = resolve_out(eval_out);
        write_run_config(*cmd_eval, eval_out);
        nca_model* model = nullptr;
        nca_status st = nca_model_open(eval_ckpt.c_str(), &model);
        if (st != NCA_OK) return report_status(st);
        std::vector<const char*> paths;
        for (const auto& m : eval_manifests) paths.push_back(m.c_str());
        const std::string report = (fs::path(eval_out) / "report.txt").string();
        if (dump_specs) spec_dir = (fs::path(eval_out) / "spectrograms").string();
        st = nca_eval(model, paths.data(), paths.size(), eval_split.c_str(), report.c_str(),
                      dump_specs ? spec_dir.c_str() : nullptr);
        nca_model_close(model);
        if (st == NCA_OK) {
            std::ifstream is(report);
            std::printf("%s", std::string(std::istreambuf_iterator<char>(is),
                                          std::istreambuf_iterator<char>()).c_str());
            std::printf("report: %s\n", report.c_str());
        }
        return report_status(st);
    }

    if (cmd_denoise->parsed()) {
        nca_model* model = nullptr;
        nca_status st = nca_model_open(dn_ckpt.c_str(), &model);
        if (st != NCA_OK) return report_status(st);
        st = nca_denoise_wav(model, dn_in.c_str(), resolve_out(dn_out).c_str());
        nca_model_close(model);
        return report_status(st);
    }
    return 0;
}
