#include "model.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>

namespace nca {

const char* variant_name(Variant v) {
    switch (v) {
        case Variant::PureLstm: return "pure-lstm";
        case Variant::AttLstm: return "att-lstm";
        case Variant::CaAttLstm1: return "ca-att-lstm1";
        case Variant::CaAttLstm2: return "ca-att-lstm2";
    }
    throw ConfigError("unknown variant");
}

Variant variant_from_name(const std::string& name) {
    if (name == "pure-lstm") return Variant::PureLstm;
    if (name == "att-lstm") return Variant::AttLstm;
    if (name == "ca-att-lstm1") return Variant::CaAttLstm1;
    if (name == "ca-att-lstm2") return Variant::CaAttLstm2;
    throw ConfigError("unknown variant name: " + name);
}

void ModelConfig::validate() const {
    if (N == 0 || L == 0 || hop == 0 || H == 0 || Hs == 0 || Es == 0 || window == 0) {
        throw ConfigError("model config: all sizes must be positive");
    }
    if (has_noise_branch(variant)) {
        if (Hn == 0) throw ConfigError("model config: Hn must be positive");
        if (C < 2) throw ConfigError("model config: C must be >= 2 for classification variants");
    }
    if (hop > L) throw ConfigError("model config: hop must not exceed L");
}

std::vector<std::pair<std::string, Tensor>> ModelParams::named() const {
    std::vector<std::pair<std::string, Tensor>> out;
    auto lstm = [&out](const char* prefix, const LstmLayer& l) {
        const char* names[] = {"Wi", "Wf", "Wg", "Wo", "Ri", "Rf", "Rg", "Ro",
                               "bi", "bf", "bg", "bo"};
        const Tensor* ts[] = {&l.Wi, &l.Wf, &l.Wg, &l.Wo, &l.Ri, &l.Rf, &l.Rg, &l.Ro,
                              &l.bi, &l.bf, &l.bg, &l.bo};
        for (int i = 0; i < 12; ++i) out.emplace_back(std::string(prefix) + "." + names[i], *ts[i]);
    };
    out.emplace_back("enc.U", encoder.basis);
    out.emplace_back("dec.V", decoder.basis);
    lstm("spec_lstm", spec_lstm);
    if (has_noise_branch(cfg.variant)) {
        lstm("noise_lstm", noise_lstm);
        out.emplace_back("noise_attn.W", noise_attn.W);
        out.emplace_back("cls.W", classifier.W);
        out.emplace_back("cls.b", classifier.b);
    }
    lstm("speech_lstm", speech_lstm);
    if (has_speech_attention(cfg.variant)) out.emplace_back("speech_attn.W", speech_attn.W);
    out.emplace_back("enh.W", enhance.W);
    out.emplace_back("enh.b", enhance.b);
    out.emplace_back("mask.W", mask_head.W);
    out.emplace_back("mask.b", mask_head.b);
    return out;
}

namespace {

std::size_t enhance_input_size(const ModelConfig& cfg) {
    switch (cfg.variant) {
        case Variant::PureLstm: return cfg.Hs;
        case Variant::AttLstm: return cfg.H + cfg.Hs;
        case Variant::CaAttLstm1:
        case Variant::CaAttLstm2: return cfg.H + cfg.Hs + cfg.H + cfg.Hn;
    }
    throw ConfigError("unknown variant");
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    ModelParams p;
    p.cfg = cfg;
    p.encoder.basis = glorot_uniform({cfg.N, cfg.L}, cfg.L, cfg.N, rng);
    p.decoder.basis = glorot_uniform({cfg.N, cfg.L}, cfg.N, cfg.L, rng);
    p.spec_lstm = make_lstm(cfg.N, cfg.H, rng);
    if (has_noise_branch(cfg.variant)) {
        p.noise_lstm = make_lstm(cfg.H, cfg.Hn, rng);
        p.noise_attn.W = glorot_uniform({cfg.H, cfg.Hn}, cfg.Hn, cfg.H, rng);
        p.noise_attn.window = cfg.window;
        p.classifier = make_linear(cfg.H + cfg.Hn, cfg.C, rng);
    }
    p.speech_lstm = make_lstm(cfg.H, cfg.Hs, rng);
    if (has_speech_attention(cfg.variant)) {
        std::size_t dk = cfg.H, dq = cfg.Hs;
        if (cfg.variant == Variant::CaAttLstm2) {
            dk = cfg.H + cfg.Hn + cfg.H;
            dq = cfg.H + cfg.Hn + cfg.Hs;
        }
        p.speech_attn.W = glorot_uniform({dk, dq}, dq, dk, rng);
        p.speech_attn.window = cfg.window;
    }
    p.enhance = make_linear(enhance_input_size(cfg), cfg.Es, rng);
    p.mask_head = make_linear(cfg.Es, cfg.N, rng);
    return p;
}

std::size_t count_params(const ModelParams& params) {
    std::size_t n = 0;
    for (const auto& [name, t] : params.named()) n += t.size();
    return n;
}

ForwardOutput forward(const std::vector<real>& samples, const ModelParams& params,
                      const ForwardOptions& opts) {
    const ModelConfig& cfg = params.cfg;
    cfg.validate();
    if (samples.size() < cfg.L) {
        throw DataError("forward: waveform shorter than one segment");
    }

    SegmentBatch batch = segment_waveform(samples, cfg.L, cfg.hop);
    ForwardOutput out;
    out.frames = batch.segments.dim(0);

    out.spec = encode_waveform(batch, params.encoder);          // w [T×N]
    Tensor h = lstm_forward(out.spec, params.spec_lstm);        // [T×H]

    Tensor dn;  // noise context [T×(H+Hn)]
    if (has_noise_branch(cfg.variant)) {
        Tensor hn = lstm_forward(h, params.noise_lstm);
        AttentionResult na = attend(h, hn, h, params.noise_attn);
        dn = concat_cols(na.context, hn);
        out.logits = linear_forward(dn, params.classifier);
        if (opts.zero_noise_context) dn = scale(dn, real(0));
    }

    Tensor hs = lstm_forward(h, params.speech_lstm);            // [T×Hs]
    Tensor feat;
    switch (cfg.variant) {
        case Variant::PureLstm:
            feat = hs;
            break;
        case Variant::AttLstm: {
            AttentionResult sa = attend(h, hs, h, params.speech_attn);
            feat = concat_cols(sa.context, hs);
            break;
        }
        case Variant::CaAttLstm1: {
            AttentionResult sa = attend(h, hs, h, params.speech_attn);
            feat = concat_cols(concat_cols(sa.context, hs), dn);
            break;
        }
        case Variant::CaAttLstm2: {
            Tensor fk = concat_cols(dn, h);
            Tensor fq = concat_cols(dn, hs);
            AttentionResult sa = attend(fk, fq, h, params.speech_attn);
            feat = concat_cols(concat_cols(sa.context, hs), dn);
            break;
        }
    }

    Tensor e = tanh_op(linear_forward(feat, params.enhance));
    out.mask = sigmoid(linear_forward(e, params.mask_head));
    out.masked = mul(out.spec, out.mask);
    out.denoised = decode_waveform(out.masked, params.decoder, batch.hop, batch.original_length);
    return out;
}

int predict_class(const Tensor& logits) {
    if (logits.rank() != 2) throw DimensionError("predict_class: logits must be [T×C]");
    const std::size_t T = logits.dim(0), C = logits.dim(1);
    std::vector<std::size_t> votes(C, 0);
    for (std::size_t t = 0; t < T; ++t) {
        std::size_t best = 0;
        for (std::size_t c = 1; c < C; ++c) {
            if (logits.at(t, c) > logits.at(t, best)) best = c;
        }
        ++votes[best];
    }
    std::size_t winner = 0;
    for (std::size_t c = 1; c < C; ++c) {
        if (votes[c] > votes[winner]) winner = c;
    }
    return static_cast<int>(winner);
}

// ---- checkpoint ------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'N', 'C', 'A', 'D'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<char*>(&v), 4); }
void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<char*>(&v), 8); }

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v;
    is.read(reinterpret_cast<char*>(&v), 4);
    if (!is) throw DataError("checkpoint: truncated file");
    return v;
}

std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v;
    is.read(reinterpret_cast<char*>(&v), 8);
    if (!is) throw DataError("checkpoint: truncated file");
    return v;
}

void write_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
    write_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<std::uint32_t>(t.rank()));
    for (std::size_t e : t.shape()) write_u64(os, e);
    for (real v : t.data()) {
        double d = static_cast<double>(v);
        os.write(reinterpret_cast<char*>(&d), 8);
    }
}

std::pair<std::string, Tensor> read_tensor(std::istream& is) {
    std::uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    std::uint32_t rank = read_u32(is);
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& e : shape) {
        e = static_cast<std::size_t>(read_u64(is));
        n *= e;
    }
    std::vector<real> data(n);
    for (std::size_t i = 0; i < n; ++i) {
        double d;
        is.read(reinterpret_cast<char*>(&d), 8);
        data[i] = static_cast<real>(d);
    }
    if (!is) throw DataError("checkpoint: truncated tensor payload");
    return {std::move(name), Tensor::from_vector(std::move(data), std::move(shape))};
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::vector<std::pair<std::string, Tensor>>& extra) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, 4);
    write_u32(os, kVersion);
    const ModelConfig& c = params.cfg;
    write_u32(os, static_cast<std::uint32_t>(c.variant));
    for (std::size_t v : {c.N, c.L, c.hop, c.H, c.Hn, c.Hs, c.Es, c.C, c.window}) {
        write_u64(os, v);
    }
    auto tensors = params.named();
    write_u32(os, static_cast<std::uint32_t>(tensors.size() + extra.size()));
    for (const auto& [name, t] : tensors) write_tensor(os, name, t);
    for (const auto& [name, t] : extra) write_tensor(os, name, t);
    if (!os) throw DataError("checkpoint: write failed: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw DataError("checkpoint: bad magic in " + path);
    }
    std::uint32_t version = read_u32(is);
    if (version != kVersion) throw DataError("checkpoint: unsupported version");
    ModelConfig c;
    c.variant = static_cast<Variant>(read_u32(is));
    c.N = read_u64(is);
    c.L = read_u64(is);
    c.hop = read_u64(is);
    c.H = read_u64(is);
    c.Hn = read_u64(is);
    c.Hs = read_u64(is);
    c.Es = read_u64(is);
    c.C = read_u64(is);
    c.window = read_u64(is);

    LoadedCheckpoint out;
    out.params = init_params(c, 0);
    std::map<std::string, Tensor> expected;
    for (auto& [name, t] : out.params.named()) expected.emplace(name, t);

    std::uint32_t count = read_u32(is);
    std::size_t matched = 0;
    for (std::uint32_t i = 0; i < count; ++i) {
        auto [name, t] = read_tensor(is);
        auto it = expected.find(name);
        if (it != expected.end()) {
            if (it->second.shape() != t.shape()) {
                throw DataError("checkpoint: shape mismatch for tensor " + name);
            }
            it->second.data() = t.data();
            ++matched;
        } else {
            out.extra.emplace_back(std::move(name), std::move(t));
        }
    }
    if (matched != expected.size()) {
        throw DataError("checkpoint: missing parameters for variant " +
                        std::string(variant_name(c.variant)));
    }
    return out;
}

}  // namespace nca
