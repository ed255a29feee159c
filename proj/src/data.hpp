#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "wav.hpp"

namespace nca {

struct ManifestRow {
    std::string split;        // train | valid | test
    std::string clean_path;   // relative to manifest directory
    std::string noise_path;
    int class_id = 0;
    double snr_db = 0;
    std::uint64_t seed = 0;
};

struct MixtureManifest {
    int sample_rate = 16000;
    std::vector<std::string> class_names;
    std::vector<ManifestRow> rows;
    std::string base_dir;  // set on load/save; resolves relative paths

    std::vector<const ManifestRow*> split(const std::string& name) const;
};

void save_manifest(const MixtureManifest& manifest, const std::string& path);
MixtureManifest load_manifest(const std::string& path, bool check_files = true);

// Scales the noise to hit the requested SNR over the overlapped region, adds,
// then peak-normalizes to <= 0.99 with the same scalar applied to the clean
// reference. Noise is tiled if shorter than clean and cropped at a seeded
// random offset.
Utterance mix_at_snr(const Utterance& clean, const Utterance& noise, double snr_db,
                     std::uint64_t seed);

// Reads the row's source files and materializes the labeled noisy utterance.
Utterance load_mixture(const MixtureManifest& manifest, const ManifestRow& row);

struct SynthSpec {
    std::size_t train_count = 0;
    std::size_t valid_count = 0;
    std::size_t test_count = 0;
    double snr_min = 0;
    double snr_max = 20;
    std::uint64_t seed = 0;
};

// Pairs user-supplied clean WAVs with class-labeled noise WAVs
// (noise_root/<class_name>/*.wav). Writes the manifest to manifest_path.
MixtureManifest synthesize_corpus(const std::string& clean_dir, const std::string& noise_root,
                                  const SynthSpec& spec, const std::string& manifest_path);

std::size_t procedural_recipe_count();
const char* procedural_recipe_name(std::size_t class_id);

struct ProceduralSpec {
    std::size_t classes = 4;
    std::size_t train_per_class = 0;
    std::size_t valid_per_class = 0;
    std::size_t test_per_class = 0;
    int sample_rate = 16000;
    double duration_s = 1.0;
    double snr_min = 0;
    double snr_max = 20;
    std::uint64_t seed = 0;
};

// Generates harmonic pseudo-speech cleans and per-class synthetic noises under
// out_dir (clean/, noise/<class>/), plus out_dir/manifest.txt.
MixtureManifest procedural_testset(const std::string& out_dir, const ProceduralSpec& spec);

}  // namespace nca
