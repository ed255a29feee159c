#pragma once

#include <cstddef>
#include <random>
#include <vector>

#include "tensor.hpp"

namespace nca {

// Framed view of a waveform: T overlapping segments of length L taken at the
// given hop, zero-padded at the tail so every segment is full length.
struct SegmentBatch {
    Tensor segments;          // [T×L], constant (no grad)
    std::size_t hop = 0;
    std::size_t original_length = 0;
};

SegmentBatch segment_waveform(const std::vector<real>& samples, std::size_t L, std::size_t hop);

// Learned analysis basis; encode produces the nonnegative T×N "spectrogram".
struct Conv1dEncoder {
    Tensor basis;  // U [N×L]
};

struct Conv1dDecoder {
    Tensor basis;  // V [N×L]
};

Tensor encode_waveform(const SegmentBatch& segments, const Conv1dEncoder& enc);
Tensor decode_waveform(const Tensor& masked, const Conv1dDecoder& dec, std::size_t hop,
                       std::size_t original_length);

struct LstmLayer {
    // gate order: input, forget, cell candidate, output
    Tensor Wi, Wf, Wg, Wo;  // [H×D_in]
    Tensor Ri, Rf, Rg, Ro;  // [H×H]
    Tensor bi, bf, bg, bo;  // [H]
    std::size_t input_size() const { return Wi.dim(1); }
    std::size_t hidden_size() const { return Wi.dim(0); }
};

// Standard LSTM recurrence, zero initial state, returns hidden sequence [T×H].
Tensor lstm_forward(const Tensor& seq, const LstmLayer& layer);

struct CausalLocalAttention {
    Tensor W;             // bilinear score matrix [D_key×D_query]
    std::size_t window;   // w; frame t attends to max(0,t-w)..t
};

struct AttentionResult {
    Tensor context;                  // [T×D_value]
    std::vector<real> weights;       // dense T×T row-major, zero outside the band
    std::size_t frames = 0;
    real weight_at(std::size_t t, std::size_t k) const { return weights[t * frames + k]; }
};

// score(k, q) = keys[k]ᵀ · W · queries[t]; softmax over the causal window;
// context[t] = Σ_k α[t,k]·values[k]. Keys and values are aligned by frame.
AttentionResult attend(const Tensor& keys, const Tensor& queries, const Tensor& values,
                       const CausalLocalAttention& attn);

struct LinearLayer {
    Tensor W;  // [D_out×D_in]
    Tensor b;  // [D_out]
};

// rows of x [T×D_in] through W·x+b → [T×D_out]
Tensor linear_forward(const Tensor& x, const LinearLayer& layer);

// ---- initialization ----------------------------------------------------

real glorot_limit(std::size_t fan_in, std::size_t fan_out);
Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                      std::mt19937_64& rng);
LstmLayer make_lstm(std::size_t input_size, std::size_t hidden_size, std::mt19937_64& rng);
LinearLayer make_linear(std::size_t in, std::size_t out, std::mt19937_64& rng);

}  // namespace nca
