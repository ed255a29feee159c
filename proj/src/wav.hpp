#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"

namespace nca {

// Mono waveform plus optional supervision attached by the data pipeline.
struct Utterance {
    std::vector<real> samples;              // in [-1, 1]
    int sample_rate = 16000;
    std::optional<int> label;               // noise class id
    std::vector<real> clean_ref;            // same length as samples when present
};

enum class WavEncoding { Pcm16, Float32 };

// Mono RIFF/WAVE only; PCM16 and IEEE float32. Anything else is a DataError.
Utterance read_wav(const std::string& path);
void write_wav(const Utterance& utt, const std::string& path,
               WavEncoding encoding = WavEncoding::Float32);

}  // namespace nca
