#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;

namespace nca {

double si_sdr(const std::vector<real>& estimate, const std::vector<real>& reference) {
    if (estimate.size() != reference.size()) {
        throw ContractError("si_sdr: length mismatch");
    }
    double ref_energy = 0, dot = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        ref_energy += double(reference[i]) * double(reference[i]);
        dot += double(estimate[i]) * double(reference[i]);
    }
    if (ref_energy <= 0) throw DataError("si_sdr: zero reference");
    const double a = dot / ref_energy;  // projection of estimate onto reference
    double target = 0, err = 0;
    for (std::size_t i = 0; i < reference.size(); ++i) {
        const double t = a * double(reference[i]);
        const double e = double(estimate[i]) - t;
        target += t * t;
        err += e * e;
    }
    if (err <= 0 || target / err > std::pow(10.0, kSiSdrCapDb / 10.0)) return kSiSdrCapDb;
    return 10.0 * std::log10(target / err);
}

double segmental_snr(const std::vector<real>& estimate, const std::vector<real>& reference,
                     std::size_t frame_len, double floor_db, double ceil_db) {
    if (estimate.size() != reference.size()) {
        throw ContractError("segmental_snr: length mismatch");
    }
    if (frame_len == 0) throw ConfigError("segmental_snr: frame_len must be positive");
    constexpr double kSilence = 1e-10;  // mean-square threshold
    double total = 0;
    std::size_t frames = 0;
    for (std::size_t base = 0; base + frame_len <= reference.size(); base += frame_len) {
        double sig = 0, err = 0;
        for (std::size_t i = 0; i < frame_len; ++i) {
            const double s = reference[base + i];
            const double d = double(estimate[base + i]) - s;
            sig += s * s;
            err += d * d;
        }
        if (sig / double(frame_len) < kSilence) continue;
        double snr = err <= 0 ? ceil_db : 10.0 * std::log10(sig / err);
        total += std::clamp(snr, floor_db, ceil_db);
        ++frames;
    }
    if (frames == 0) throw DataError("segmental_snr: reference is silent in every frame");
    return total / double(frames);
}

double classify_accuracy(const ModelParams& params, const MixtureManifest& manifest,
                         const std::string& split) {
    if (!has_noise_branch(params.cfg.variant)) {
        throw ConfigError("classify_accuracy: variant has no classifier");
    }
    auto rows = manifest.split(split);
    if (rows.empty()) throw DataError("classify_accuracy: empty split " + split);
    std::size_t correct = 0;
    for (const auto* r : rows) {
        Utterance u = load_mixture(manifest, *r);
        ForwardOutput out = forward(u.samples, params);
        if (predict_class(out.logits) == r->class_id) ++correct;
    }
    return double(correct) / double(rows.size());
}

void write_spectrogram(const Tensor& spec, const std::string& path) {
    if (spec.rank() != 2) throw DimensionError("write_spectrogram: need a matrix");
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("write_spectrogram: cannot open " + path);
    os << spec.dim(0) << " " << spec.dim(1) << "\n";
    char buf[40];
    for (std::size_t t = 0; t < spec.dim(0); ++t) {
        for (std::size_t c = 0; c < spec.dim(1); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", double(spec.at(t, c)));
            os << buf << (c + 1 == spec.dim(1) ? "\n" : " ");
        }
    }
}

std::string EvalReport::table() const {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof(line), "%-16s %10s %10s %10s %8s %6s\n", "set",
                  "noisy SDR", "denoi SDR", "dsegSNR", "acc", "n");
    os << line;
    for (const auto& r : rows) {
        char acc[16];
        if (r.class_accuracy < 0) {
            std::snprintf(acc, sizeof(acc), "%8s", "-");
        } else {
            std::snprintf(acc, sizeof(acc), "%8.3f", r.class_accuracy);
        }
        std::snprintf(line, sizeof(line), "%-16s %10.3f %10.3f %10.3f %s %6zu\n",
                      r.set_name.c_str(), r.noisy_si_sdr, r.denoised_si_sdr,
                      r.seg_snr_improvement, acc, r.count);
        os << line;
    }
    return os.str();
}

std::string EvalReport::machine_lines() const {
    std::ostringstream os;
    char line[512];
    for (const auto& r : rows) {
        std::snprintf(line, sizeof(line),
                      "set=%s noisy_si_sdr=%.17g denoised_si_sdr=%.17g "
                      "seg_snr_improvement=%.17g class_accuracy=%.17g count=%zu\n",
                      r.set_name.c_str(), r.noisy_si_sdr, r.denoised_si_sdr,
                      r.seg_snr_improvement, r.class_accuracy, r.count);
        os << line;
    }
    return os.str();
}

EvalReport evaluate(const ModelParams& params, const std::vector<std::string>& manifest_paths,
                    const EvalOptions& opts) {
    EvalReport report;
    if (!opts.spectrogram_dir.empty()) fs::create_directories(opts.spectrogram_dir);
    for (const std::string& path : manifest_paths) {
        MixtureManifest manifest = load_manifest(path);
        auto rows = manifest.split(opts.split);
        if (rows.empty()) throw DataError("evaluate: empty split '" + opts.split + "' in " + path);

        EvalRow out_row;
        out_row.set_name = fs::path(path).parent_path().filename().string();
        if (out_row.set_name.empty()) out_row.set_name = fs::path(path).stem().string();
        out_row.count = rows.size();
        std::size_t correct = 0, utt_index = 0;
        for (const auto* r : rows) {
            Utterance u = load_mixture(manifest, *r);
            ForwardOutput out = forward(u.samples, params);
            std::vector<real> denoised = out.denoised.data();
            out_row.noisy_si_sdr += si_sdr(u.samples, u.clean_ref);
            out_row.denoised_si_sdr += si_sdr(denoised, u.clean_ref);
            out_row.seg_snr_improvement +=
                segmental_snr(denoised, u.clean_ref) - segmental_snr(u.samples, u.clean_ref);
            if (out.logits.defined() && predict_class(out.logits) == r->class_id) ++correct;
            if (!opts.spectrogram_dir.empty()) {
                char name[128];
                std::snprintf(name, sizeof(name), "%s_%04zu_noisy.txt",
                              out_row.set_name.c_str(), utt_index);
                write_spectrogram(out.spec, (fs::path(opts.spectrogram_dir) / name).string());
                std::snprintf(name, sizeof(name), "%s_%04zu_masked.txt",
                              out_row.set_name.c_str(), utt_index);
                write_spectrogram(out.masked, (fs::path(opts.spectrogram_dir) / name).string());
            }
            ++utt_index;
        }
        const double n = double(rows.size());
        out_row.noisy_si_sdr /= n;
        out_row.denoised_si_sdr /= n;
        out_row.seg_snr_improvement /= n;
        out_row.class_accuracy =
            has_noise_branch(params.cfg.variant) ? double(correct) / n : -1.0;
        report.rows.push_back(std::move(out_row));
    }
    return report;
}

}  // namespace nca
