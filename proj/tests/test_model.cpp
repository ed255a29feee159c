#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "model.hpp"
#include "oracles.hpp"

using namespace nca;

namespace {

ModelConfig tiny_config(Variant v = Variant::CaAttLstm2) {
    ModelConfig cfg;
    cfg.N = 8;
    cfg.L = 4;
    cfg.hop = 2;
    cfg.H = cfg.Hn = cfg.Hs = 3;
    cfg.Es = 3;
    cfg.C = 2;
    cfg.window = 5;
    cfg.variant = v;
    return cfg;
}

std::vector<real> random_wave(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<real> dist(-0.9, 0.9);
    std::vector<real> x(n);
    for (real& v : x) v = dist(rng);
    return x;
}

std::vector<double> vec(const Tensor& t) {
    return std::vector<double>(t.data().begin(), t.data().end());
}

// Straight-line scripted forward pass for CaAttLstm2, composed purely from
// the scalar test oracles.
struct OracleForward {
    std::vector<std::vector<double>> spec, mask, masked, logits;
    std::vector<double> denoised;
};

OracleForward oracle_forward_ca2(const std::vector<real>& wave, const ModelParams& p) {
    const ModelConfig& cfg = p.cfg;
    const std::size_t T = (wave.size() - cfg.L) / cfg.hop +
                          ((wave.size() - cfg.L) % cfg.hop ? 2 : 1);
    OracleForward out;

    // segment + encode
    std::vector<std::vector<double>> segs(T, std::vector<double>(cfg.L, 0.0));
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t j = 0; j < cfg.L && t * cfg.hop + j < wave.size(); ++j)
            segs[t][j] = wave[t * cfg.hop + j];
    out.spec.assign(T, std::vector<double>(cfg.N, 0.0));
    for (std::size_t t = 0; t < T; ++t)
        for (std::size_t f = 0; f < cfg.N; ++f) {
            double dot = 0;
            for (std::size_t j = 0; j < cfg.L; ++j) dot += segs[t][j] * p.encoder.basis.at(f, j);
            out.spec[t][f] = std::max(0.0, dot);
        }

    auto run_lstm = [](const std::vector<std::vector<double>>& in, const LstmLayer& l) {
        const std::size_t D = l.input_size(), H = l.hidden_size();
        oracle::LstmStepState st;
        st.h.assign(H, 0);
        st.c.assign(H, 0);
        std::vector<std::vector<double>> out_seq;
        for (const auto& x : in) {
            st = oracle::lstm_step(x, st, D, H, vec(l.Wi), vec(l.Wf), vec(l.Wg), vec(l.Wo),
                                   vec(l.Ri), vec(l.Rf), vec(l.Rg), vec(l.Ro), vec(l.bi),
                                   vec(l.bf), vec(l.bg), vec(l.bo));
            out_seq.push_back(st.h);
        }
        return out_seq;
    };
    auto concat = [](const std::vector<double>& a, const std::vector<double>& b) {
        std::vector<double> r = a;
        r.insert(r.end(), b.begin(), b.end());
        return r;
    };
    auto affine = [](const LinearLayer& l, const std::vector<double>& x) {
        std::vector<double> r(l.W.dim(0));
        for (std::size_t o = 0; o < r.size(); ++o) {
            r[o] = l.b.data()[o];
            for (std::size_t i = 0; i < x.size(); ++i) r[o] += double(l.W.at(o, i)) * x[i];
        }
        return r;
    };

    auto h = run_lstm(out.spec, p.spec_lstm);
    auto hn = run_lstm(h, p.noise_lstm);
    std::vector<std::vector<double>> dn(T);
    out.logits.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t lo = t >= cfg.window ? t - cfg.window : 0;
        auto cn = oracle::attention_frame(h, h, hn[t], vec(p.noise_attn.W), cfg.H, cfg.Hn, lo, t);
        dn[t] = concat(cn, hn[t]);
        out.logits[t] = affine(p.classifier, dn[t]);
    }
    auto hs = run_lstm(h, p.speech_lstm);
    std::vector<std::vector<double>> fk(T);
    for (std::size_t t = 0; t < T; ++t) fk[t] = concat(dn[t], h[t]);
    out.mask.assign(T, {});
    out.masked.assign(T, std::vector<double>(cfg.N));
    std::vector<std::vector<double>> rec(T, std::vector<double>(cfg.L, 0.0));
    for (std::size_t t = 0; t < T; ++t) {
        const std::size_t lo = t >= cfg.window ? t - cfg.window : 0;
        auto fq = concat(dn[t], hs[t]);
        auto cs = oracle::attention_frame(fk, h, fq, vec(p.speech_attn.W), cfg.H + cfg.Hn + cfg.H,
                                          cfg.H + cfg.Hn + cfg.Hs, lo, t);
        auto e = affine(p.enhance, concat(concat(cs, hs[t]), dn[t]));
        for (double& v : e) v = std::tanh(v);
        auto m = affine(p.mask_head, e);
        for (double& v : m) v = oracle::sigmoid(v);
        out.mask[t] = m;
        for (std::size_t f = 0; f < cfg.N; ++f) out.masked[t][f] = out.spec[t][f] * m[f];
        for (std::size_t j = 0; j < cfg.L; ++j)
            for (std::size_t f = 0; f < cfg.N; ++f)
                rec[t][j] += out.masked[t][f] * double(p.decoder.basis.at(f, j));
    }
    out.denoised = oracle::overlap_add(rec, cfg.hop, wave.size());
    return out;
}

}  // namespace

TEST_CASE("pure-lstm with zero parameters yields the 0.5 mask") {
    ModelConfig cfg = tiny_config(Variant::PureLstm);
    ModelParams p = init_params(cfg, 0);
    for (auto& [name, t] : p.named()) std::fill(t.data().begin(), t.data().end(), real(0));
    std::vector<real> wave = random_wave(12, 7);
    ForwardOutput out = forward(wave, p);
    for (std::size_t i = 0; i < out.mask.size(); ++i) {
        CHECK(out.mask.data()[i] == real(0.5));
        CHECK(out.masked.data()[i] == doctest::Approx(0.5 * out.spec.data()[i]));
    }
    CHECK(!out.logits.defined());
}

TEST_CASE("ca-att-lstm2 single-frame input works and is in range") {
    ModelConfig cfg = tiny_config();
    ModelParams p = init_params(cfg, 3);
    std::vector<real> wave = random_wave(cfg.L, 8);  // exactly one segment
    ForwardOutput out = forward(wave, p);
    CHECK(out.frames == 1);
    CHECK(out.logits.dim(0) == 1);
    for (real v : out.mask.data()) {
        CHECK(v > real(0));
        CHECK(v < real(1));
    }
}

TEST_CASE("ca-att-lstm2 forward matches the composed layer-oracle script") {
    ModelConfig cfg = tiny_config();
    ModelParams p = init_params(cfg, 5);
    std::vector<real> wave = random_wave(cfg.L + 2 * cfg.hop, 9);  // T = 3
    ForwardOutput out = forward(wave, p);
    OracleForward expect = oracle_forward_ca2(wave, p);
    REQUIRE(out.frames == 3);
    for (std::size_t t = 0; t < 3; ++t) {
        for (std::size_t f = 0; f < cfg.N; ++f) {
            CHECK(out.spec.at(t, f) == doctest::Approx(expect.spec[t][f]).epsilon(1e-10));
            CHECK(out.mask.at(t, f) == doctest::Approx(expect.mask[t][f]).epsilon(1e-10));
            CHECK(out.masked.at(t, f) == doctest::Approx(expect.masked[t][f]).epsilon(1e-10));
        }
        for (std::size_t c = 0; c < cfg.C; ++c) {
            CHECK(out.logits.at(t, c) == doctest::Approx(expect.logits[t][c]).epsilon(1e-10));
        }
    }
    for (std::size_t i = 0; i < wave.size(); ++i) {
        CHECK(out.denoised.data()[i] == doctest::Approx(expect.denoised[i]).epsilon(1e-10));
    }
}

TEST_CASE("init_params determinism and glorot bound") {
    ModelConfig cfg = tiny_config();
    ModelParams a = init_params(cfg, 123);
    ModelParams b = init_params(cfg, 123);
    ModelParams c = init_params(cfg, 124);
    auto an = a.named(), bn = b.named(), cn = c.named();
    bool any_diff = false;
    for (std::size_t i = 0; i < an.size(); ++i) {
        CHECK(an[i].second.data() == bn[i].second.data());
        if (an[i].second.data() != cn[i].second.data()) any_diff = true;
    }
    CHECK(any_diff);
    const real bound = glorot_limit(cfg.L, cfg.N);
    for (real v : a.encoder.basis.data()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("count_params on a single linear layer is 15 for 4->3") {
    std::mt19937_64 rng(1);
    LinearLayer l = make_linear(4, 3, rng);
    CHECK(l.W.size() + l.b.size() == 15);
}

TEST_CASE("count_params equals an independent shape walker") {
    ModelConfig cfg = tiny_config();
    ModelParams p = init_params(cfg, 1);
    // walk the expected shapes straight from the config
    auto lstm = [](std::size_t d, std::size_t h) { return 4 * (h * d + h * h + h); };
    std::size_t expect = 0;
    expect += cfg.N * cfg.L * 2;                       // encoder + decoder bases
    expect += lstm(cfg.N, cfg.H);                      // spectrogram lstm
    expect += lstm(cfg.H, cfg.Hn);                     // noise lstm
    expect += cfg.H * cfg.Hn;                          // noise attention bilinear
    expect += cfg.C * (cfg.H + cfg.Hn) + cfg.C;        // classifier
    expect += lstm(cfg.H, cfg.Hs);                     // speech lstm
    expect += (cfg.H + cfg.Hn + cfg.H) * (cfg.H + cfg.Hn + cfg.Hs);  // speech attention
    const std::size_t enh_in = cfg.H + cfg.Hs + cfg.H + cfg.Hn;
    expect += cfg.Es * enh_in + cfg.Es;                // enhancement head
    expect += cfg.N * cfg.Es + cfg.N;                  // mask head
    CHECK(count_params(p) == expect);
}

TEST_CASE("mask stays in (0,1) and masked spectrogram never exceeds the spec") {
    ModelConfig cfg = tiny_config();
    ModelParams p = init_params(cfg, 6);
    std::vector<real> wave = random_wave(30, 10);
    ForwardOutput out = forward(wave, p);
    for (std::size_t i = 0; i < out.mask.size(); ++i) {
        CHECK(out.mask.data()[i] > real(0));
        CHECK(out.mask.data()[i] < real(1));
        CHECK(out.masked.data()[i] <= out.spec.data()[i]);
    }
}

TEST_CASE("ca-att-lstm1 with zeroed noise context equals att-lstm") {
    ModelConfig cfg1 = tiny_config(Variant::CaAttLstm1);
    ModelParams p1 = init_params(cfg1, 77);
    ModelConfig cfg2 = tiny_config(Variant::AttLstm);
    ModelParams p2 = init_params(cfg2, 77);
    // share every parameter the two variants have in common
    p2.encoder.basis.data() = p1.encoder.basis.data();
    p2.decoder.basis.data() = p1.decoder.basis.data();
    auto copy_lstm = [](LstmLayer& dst, const LstmLayer& src) {
        dst.Wi.data() = src.Wi.data(); dst.Wf.data() = src.Wf.data();
        dst.Wg.data() = src.Wg.data(); dst.Wo.data() = src.Wo.data();
        dst.Ri.data() = src.Ri.data(); dst.Rf.data() = src.Rf.data();
        dst.Rg.data() = src.Rg.data(); dst.Ro.data() = src.Ro.data();
        dst.bi.data() = src.bi.data(); dst.bf.data() = src.bf.data();
        dst.bg.data() = src.bg.data(); dst.bo.data() = src.bo.data();
    };
    copy_lstm(p2.spec_lstm, p1.spec_lstm);
    copy_lstm(p2.speech_lstm, p1.speech_lstm);
    p2.speech_attn.W.data() = p1.speech_attn.W.data();
    p2.mask_head.W.data() = p1.mask_head.W.data();
    p2.mask_head.b.data() = p1.mask_head.b.data();
    // att-lstm enhancement weight = left block (cs;hs columns) of ca1's
    const std::size_t in1 = cfg1.H + cfg1.Hs + cfg1.H + cfg1.Hn;
    const std::size_t in2 = cfg2.H + cfg2.Hs;
    for (std::size_t o = 0; o < cfg2.Es; ++o)
        for (std::size_t i = 0; i < in2; ++i)
            p2.enhance.W.data()[o * in2 + i] = p1.enhance.W.data()[o * in1 + i];
    p2.enhance.b.data() = p1.enhance.b.data();

    std::vector<real> wave = random_wave(20, 11);
    ForwardOptions opts;
    opts.zero_noise_context = true;
    ForwardOutput out1 = forward(wave, p1, opts);
    ForwardOutput out2 = forward(wave, p2);
    for (std::size_t i = 0; i < out1.mask.size(); ++i) {
        CHECK(out1.mask.data()[i] == doctest::Approx(out2.mask.data()[i]).epsilon(1e-12));
    }
    for (std::size_t i = 0; i < wave.size(); ++i) {
        CHECK(out1.denoised.data()[i] == doctest::Approx(out2.denoised.data()[i]).epsilon(1e-12));
    }
}

TEST_CASE("streaming consistency: prefix forward equals forward prefix") {
    ModelConfig cfg = tiny_config();
    ModelParams p = init_params(cfg, 13);
    const std::size_t T = 6;
    std::vector<real> wave = random_wave((T - 1) * cfg.hop + cfg.L, 12);
    ForwardOutput full = forward(wave, p);
    REQUIRE(full.frames == T);
    for (std::size_t k = 1; k < T; ++k) {
        std::vector<real> prefix(wave.begin(), wave.begin() + (k - 1) * cfg.hop + cfg.L);
        ForwardOutput part = forward(prefix, p);
        REQUIRE(part.frames == k);
        for (std::size_t t = 0; t < k; ++t) {
            for (std::size_t f = 0; f < cfg.N; ++f) {
                CHECK(part.mask.at(t, f) == doctest::Approx(full.mask.at(t, f)).epsilon(1e-12));
            }
            for (std::size_t c = 0; c < cfg.C; ++c) {
                CHECK(part.logits.at(t, c) ==
                      doctest::Approx(full.logits.at(t, c)).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("forward is deterministic") {
    ModelConfig cfg = tiny_config();
    ModelParams p = init_params(cfg, 14);
    std::vector<real> wave = random_wave(25, 15);
    ForwardOutput a = forward(wave, p);
    ForwardOutput b = forward(wave, p);
    CHECK(a.denoised.data() == b.denoised.data());
    CHECK(a.mask.data() == b.mask.data());
}

TEST_CASE("forward rejects too-short waveforms") {
    ModelConfig cfg = tiny_config();
    ModelParams p = init_params(cfg, 16);
    CHECK_THROWS_AS(forward(std::vector<real>(cfg.L - 1, 0.1), p), DataError);
}

TEST_CASE("invalid configs are rejected") {
    ModelConfig cfg = tiny_config();
    cfg.C = 1;
    CHECK_THROWS_AS(init_params(cfg, 0), ConfigError);
    ModelConfig cfg2 = tiny_config();
    cfg2.hop = cfg2.L + 1;
    CHECK_THROWS_AS(init_params(cfg2, 0), ConfigError);
    CHECK_THROWS_AS(variant_from_name("bogus"), ConfigError);
}

TEST_CASE("predict_class majority vote with tie toward lower id") {
    Tensor logits = Tensor::from_vector({0.9, 0.1,   // frame 0 → class 0
                                         0.1, 0.9,   // frame 1 → class 1
                                         0.5, 0.5},  // frame 2 tie → class 0
                                        {3, 2});
    CHECK(predict_class(logits) == 0);
}

TEST_CASE("checkpoint round-trip is bit-exact") {
    namespace fs = std::filesystem;
    ModelConfig cfg = tiny_config();
    ModelParams p = init_params(cfg, 99);
    const std::string path1 = (fs::temp_directory_path() / "nca_test_a.ckpt").string();
    const std::string path2 = (fs::temp_directory_path() / "nca_test_b.ckpt").string();
    save_checkpoint(path1, p);
    LoadedCheckpoint loaded = load_checkpoint(path1);
    auto pn = p.named(), ln = loaded.params.named();
    REQUIRE(pn.size() == ln.size());
    for (std::size_t i = 0; i < pn.size(); ++i) {
        CHECK(pn[i].first == ln[i].first);
        CHECK(pn[i].second.data() == ln[i].second.data());
    }
    save_checkpoint(path2, loaded.params);
    std::ifstream f1(path1, std::ios::binary), f2(path2, std::ios::binary);
    std::string b1((std::istreambuf_iterator<char>(f1)), std::istreambuf_iterator<char>());
    std::string b2((std::istreambuf_iterator<char>(f2)), std::istreambuf_iterator<char>());
    CHECK(b1 == b2);
    fs::remove(path1);
    fs::remove(path2);
}

TEST_CASE("checkpoint loader rejects garbage") {
    namespace fs = std::filesystem;
    const std::string path = (fs::temp_directory_path() / "nca_garbage.ckpt").string();
    std::ofstream(path) << "not a checkpoint";
    CHECK_THROWS_AS(load_checkpoint(path), DataError);
    fs::remove(path);
}
