#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "layers.hpp"

namespace nca {

enum class Variant { PureLstm, AttLstm, CaAttLstm1, CaAttLstm2 };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // throws ConfigError

inline bool has_noise_branch(Variant v) {
    return v == Variant::CaAttLstm1 || v == Variant::CaAttLstm2;
}
inline bool has_speech_attention(Variant v) { return v != Variant::PureLstm; }

struct ModelConfig {
    std::size_t N = 512;        // encoder/decoder filter count
    std::size_t L = 160;        // filter length in samples
    std::size_t hop = 80;       // segmentation hop
    std::size_t H = 256;        // spectrogram LSTM hidden size
    std::size_t Hn = 112;       // noise LSTM hidden size
    std::size_t Hs = 112;       // speech LSTM hidden size
    std::size_t Es = 256;       // enhancement vector size
    std::size_t C = 20;         // noise class count
    std::size_t window = 5;     // causal attention window
    Variant variant = Variant::CaAttLstm2;

    void validate() const;  // throws ConfigError
};

struct ModelParams {
    ModelConfig cfg;
    Conv1dEncoder encoder;
    Conv1dDecoder decoder;
    LstmLayer spec_lstm;
    LstmLayer noise_lstm;   // classification variants only
    LstmLayer speech_lstm;
    CausalLocalAttention noise_attn;
    CausalLocalAttention speech_attn;
    LinearLayer classifier;   // classification variants only
    LinearLayer enhance;
    LinearLayer mask_head;

    // Every learnable tensor of the active variant, in a fixed order shared
    // by checkpointing and the optimizer.
    std::vector<std::pair<std::string, Tensor>> named() const;
};

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);
std::size_t count_params(const ModelParams& params);

struct ForwardOutput {
    Tensor spec;      // w, noisy spectrogram [T×N]
    Tensor mask;      // sigmoid mask [T×N]
    Tensor masked;    // y = w ⊙ mask [T×N]
    Tensor logits;    // [T×C], classification variants only (undefined otherwise)
    Tensor denoised;  // reconstructed waveform [len]
    std::size_t frames = 0;
};

struct ForwardOptions {
    // Zeroes the noise context dⁿ before it reaches the speech branch and
    // heads. Used by the variant-nesting equivalence test.
    bool zero_noise_context = false;
};

ForwardOutput forward(const std::vector<real>& samples, const ModelParams& params,
                      const ForwardOptions& opts = {});

// Utterance-level class prediction: per-frame argmax, then majority vote.
// Ties (both per frame and across frames) break toward the lower class id.
int predict_class(const Tensor& logits);

// ---- checkpoint I/O ------------------------------------------------------
// Binary container: magic "NCAD", u32 version, config block, then named
// tensors (u32 name length, name, u32 rank, u64 extents, float64 LE data).
// Little-endian throughout; round-trips bit-exactly.

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::vector<std::pair<std::string, Tensor>>& extra = {});

struct LoadedCheckpoint {
    ModelParams params;
    std::vector<std::pair<std::string, Tensor>> extra;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace nca
