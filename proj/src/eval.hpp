#pragma once

#include <string>
#include <vector>

#include "data.hpp"
#include "model.hpp"

namespace nca {

// Scale-invariant SDR in dB; exact matches are capped at +100 dB.
inline constexpr double kSiSdrCapDb = 100.0;
double si_sdr(const std::vector<real>& estimate, const std::vector<real>& reference);

// Mean of per-frame SNRs clamped to [floor_db, ceil_db]; frames with
// near-silent reference are skipped.
double segmental_snr(const std::vector<real>& estimate, const std::vector<real>& reference,
                     std::size_t frame_len = 256, double floor_db = -10.0,
                     double ceil_db = 35.0);

struct EvalRow {
    std::string set_name;
    double noisy_si_sdr = 0;      // mean over utterances
    double denoised_si_sdr = 0;
    double seg_snr_improvement = 0;
    double class_accuracy = -1;   // -1 when the variant has no classifier
    std::size_t count = 0;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    std::string table() const;            // aligned human-readable table
    std::string machine_lines() const;    // one key=value record per row
};

// Fraction of utterances in the named split whose majority-vote prediction
// matches the manifest label.
double classify_accuracy(const ModelParams& params, const MixtureManifest& manifest,
                         const std::string& split = "test");

struct EvalOptions {
    std::string split = "test";
    std::string spectrogram_dir;  // when nonempty, dump per-utterance w and y
};

// One report row per manifest, in argument order. Spectrogram dumps are
// plain-text arrays: header "T N", then T rows of N values.
EvalReport evaluate(const ModelParams& params, const std::vector<std::string>& manifest_paths,
                    const EvalOptions& opts = {});

void write_spectrogram(const Tensor& spec, const std::string& path);

}  // namespace nca
