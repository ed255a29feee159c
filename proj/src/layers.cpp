#include "layers.hpp"

#include <algorithm>
#include <cmath>

namespace nca {

SegmentBatch segment_waveform(const std::vector<real>& samples, std::size_t L, std::size_t hop) {
    if (L == 0 || hop == 0) throw ConfigError("segment_waveform: L and hop must be positive");
    if (samples.size() < L) throw DataError("segment_waveform: waveform shorter than one segment");
    const std::size_t T = (samples.size() - L) / hop + ((samples.size() - L) % hop ? 2 : 1);
    std::vector<real> framed(T * L, real(0));
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t base = t * hop;
        const std::size_t n = std::min(L, samples.size() - base);
        std::copy_n(samples.data() + base, n, framed.data() + t * L);
    }
    SegmentBatch out;
    out.segments = Tensor::from_vector(std::move(framed), {T, L});
    out.hop = hop;
    out.original_length = samples.size();
    return out;
}

Tensor encode_waveform(const SegmentBatch& segments, const Conv1dEncoder& enc) {
    if (segments.segments.dim(1) != enc.basis.dim(1)) {
        throw DimensionError("encode_waveform: segment length does not match basis length");
    }
    return relu(matmul_nt(segments.segments, enc.basis));
}

Tensor decode_waveform(const Tensor& masked, const Conv1dDecoder& dec, std::size_t hop,
                       std::size_t original_length) {
    if (masked.rank() != 2 || masked.dim(1) != dec.basis.dim(0)) {
        throw DimensionError("decode_waveform: masked spectrogram width must equal filter count");
    }
    Tensor segs = matmul(masked, dec.basis);  // [T×L]
    return overlap_add(segs, hop, original_length);
}

Tensor lstm_forward(const Tensor& seq, const LstmLayer& layer) {
    if (seq.rank() != 2 || seq.dim(1) != layer.input_size()) {
        throw DimensionError("lstm_forward: input width does not match layer input size");
    }
    const std::size_t T = seq.dim(0);
    const std::size_t H = layer.hidden_size();
    Tensor h = Tensor::zeros({1, H});
    Tensor c = Tensor::zeros({1, H});
    std::vector<Tensor> outputs;
    outputs.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        Tensor x = row(seq, t);
        Tensor gi = sigmoid(add_rowvec(add(matmul_nt(x, layer.Wi), matmul_nt(h, layer.Ri)), layer.bi));
        Tensor gf = sigmoid(add_rowvec(add(matmul_nt(x, layer.Wf), matmul_nt(h, layer.Rf)), layer.bf));
        Tensor gg = tanh_op(add_rowvec(add(matmul_nt(x, layer.Wg), matmul_nt(h, layer.Rg)), layer.bg));
        Tensor go = sigmoid(add_rowvec(add(matmul_nt(x, layer.Wo), matmul_nt(h, layer.Ro)), layer.bo));
        c = add(mul(gf, c), mul(gi, gg));
        h = mul(go, tanh_op(c));
        outputs.push_back(h);
    }
    return concat_rows(outputs);
}

AttentionResult attend(const Tensor& keys, const Tensor& queries, const Tensor& values,
                       const CausalLocalAttention& attn) {
    if (keys.rank() != 2 || queries.rank() != 2 || values.rank() != 2) {
        throw DimensionError("attend: all inputs must be matrices");
    }
    const std::size_t T = keys.dim(0);
    if (queries.dim(0) != T || values.dim(0) != T) {
        throw DimensionError("attend: keys/queries/values must have the same frame count");
    }
    if (attn.W.dim(0) != keys.dim(1) || attn.W.dim(1) != queries.dim(1)) {
        throw DimensionError("attend: bilinear matrix shape does not match key/query widths");
    }
    if (attn.window == 0) throw ConfigError("attend: window must be >= 1");

    AttentionResult res;
    res.frames = T;
    res.weights.assign(T * T, real(0));
    std::vector<Tensor> contexts;
    contexts.reserve(T);
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t lo = t >= attn.window ? t - attn.window : 0;
        const std::size_t n = t - lo + 1;
        Tensor K = slice_rows(keys, lo, n);
        Tensor V = slice_rows(values, lo, n);
        Tensor q = row(queries, t);
        Tensor wq = matmul_nt(attn.W, q);        // [D_k×1]
        Tensor scores = matmul(K, wq);           // [n×1]
        Tensor alpha = softmax(scores);          // [n×1]
        for (std::size_t j = 0; j < n; ++j) res.weights[t * T + lo + j] = alpha.data()[j];
        contexts.push_back(matmul_tn(alpha, V)); // [1×D_v]
    }
    res.context = concat_rows(contexts);
    return res;
}

Tensor linear_forward(const Tensor& x, const LinearLayer& layer) {
    if (x.rank() != 2 || x.dim(1) != layer.W.dim(1)) {
        throw DimensionError("linear_forward: input width does not match weight");
    }
    return add_rowvec(matmul_nt(x, layer.W), layer.b);
}

real glorot_limit(std::size_t fan_in, std::size_t fan_out) {
    return std::sqrt(real(6) / real(fan_in + fan_out));
}

Tensor glorot_uniform(std::vector<std::size_t> shape, std::size_t fan_in, std::size_t fan_out,
                      std::mt19937_64& rng) {
    const real limit = glorot_limit(fan_in, fan_out);
    std::uniform_real_distribution<real> dist(-limit, limit);
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (real& v : t.data()) v = dist(rng);
    return t;
}

LstmLayer make_lstm(std::size_t input_size, std::size_t hidden_size, std::mt19937_64& rng) {
    LstmLayer l;
    auto w = [&]() { return glorot_uniform({hidden_size, input_size}, input_size, hidden_size, rng); };
    auto r = [&]() { return glorot_uniform({hidden_size, hidden_size}, hidden_size, hidden_size, rng); };
    l.Wi = w(); l.Wf = w(); l.Wg = w(); l.Wo = w();
    l.Ri = r(); l.Rf = r(); l.Rg = r(); l.Ro = r();
    l.bi = Tensor::zeros({hidden_size}, true);
    l.bf = Tensor::full({hidden_size}, real(1), true);  // forget gate bias
    l.bg = Tensor::zeros({hidden_size}, true);
    l.bo = Tensor::zeros({hidden_size}, true);
    return l;
}

LinearLayer make_linear(std::size_t in, std::size_t out, std::mt19937_64& rng) {
    LinearLayer l;
    l.W = glorot_uniform({out, in}, in, out, rng);
    l.b = Tensor::zeros({out}, true);
    return l;
}

}  // namespace nca
