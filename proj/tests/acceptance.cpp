// Integration gate: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Thresholds are pinned here, not configurable.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "data.hpp"
#include "eval.hpp"
#include "model.hpp"
#include "oracles.hpp"
#include "train.hpp"

using namespace nca;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

int g_failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", id, name,
                detail.empty() ? "" : " — ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

fs::path work_dir() {
    fs::path p = fs::temp_directory_path() / "nca_acceptance";
    return p;
}

fs::path fresh(const std::string& tag) {
    fs::path p = work_dir() / tag;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

std::vector<real> random_wave(std::size_t n, std::uint64_t seed, double amp = 0.8) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-amp, amp);
    std::vector<real> x(n);
    for (real& v : x) v = real(dist(rng));
    return x;
}

ModelConfig tiny_grad_config() {
    ModelConfig cfg;
    cfg.N = 8;
    cfg.L = 4;
    cfg.hop = 2;
    cfg.H = cfg.Hn = cfg.Hs = 3;
    cfg.Es = 3;
    cfg.C = 2;
    cfg.window = 5;
    cfg.variant = Variant::CaAttLstm2;
    return cfg;
}

// ---- criterion 1: analytic gradients match finite differences --------------

double layer_fd_worst() {
    std::mt19937_64 rng(101);
    double worst = 0;
    auto check = [&](const std::vector<Tensor>& params, const std::function<Tensor()>& make) {
        Graph g;
        double loss_cached = 0;
        auto value = [&]() {
            Tensor t = make();  // forward-only outside a scope
            return double(t.item());
        };
        auto backward = [&]() {
            Graph::Scope scope(g);
            Tensor t = make();
            loss_cached = t.item();
            g.backward(t);
        };
        worst = std::max(worst, oracle::max_grad_rel_error(params, value, backward, 1e-5));
    };

    // conv encoder
    Conv1dEncoder enc;
    enc.basis = Tensor::from_vector(random_wave(8 * 4, 1, 0.5), {8, 4}, true);
    SegmentBatch seg;
    seg.segments = Tensor::from_vector(random_wave(3 * 4, 2, 0.5), {3, 4}, true);
    seg.hop = 2;
    seg.original_length = 8;
    check({enc.basis, seg.segments},
          [&]() { return sum(square(encode_waveform(seg, enc))); });

    // lstm
    std::mt19937_64 lstm_rng(3);
    LstmLayer lstm = make_lstm(4, 3, lstm_rng);
    Tensor xs = Tensor::from_vector(random_wave(3 * 4, 4, 0.5), {3, 4}, true);
    std::vector<Tensor> lstm_params = {lstm.Wi, lstm.Wf, lstm.Wg, lstm.Wo, lstm.Ri, lstm.Rf,
                                       lstm.Rg, lstm.Ro, lstm.bi, lstm.bf, lstm.bg, lstm.bo,
                                       xs};
    check(lstm_params, [&]() { return sum(square(lstm_forward(xs, lstm))); });

    // causal local attention
    CausalLocalAttention attn;
    attn.W = Tensor::from_vector(random_wave(3 * 3, 5, 0.5), {3, 3}, true);
    attn.window = 2;
    Tensor keys = Tensor::from_vector(random_wave(4 * 3, 6, 0.5), {4, 3}, true);
    Tensor queries = Tensor::from_vector(random_wave(4 * 3, 7, 0.5), {4, 3}, true);
    Tensor values = Tensor::from_vector(random_wave(4 * 3, 8, 0.5), {4, 3}, true);
    check({attn.W, keys, queries, values},
          [&]() { return sum(square(attend(keys, queries, values, attn).context)); });

    // linear head
    std::mt19937_64 lin_rng(9);
    LinearLayer lin = make_linear(4, 3, lin_rng);
    Tensor lx = Tensor::from_vector(random_wave(2 * 4, 10, 0.5), {2, 4}, true);
    check({lin.W, lin.b, lx},
          [&]() { return sum(square(add_rowvec(matmul_nt(lx, lin.W), lin.b))); });

    // conv decoder with overlap-add
    Conv1dDecoder dec;
    dec.basis = Tensor::from_vector(random_wave(8 * 4, 11, 0.5), {8, 4}, true);
    Tensor feats = Tensor::from_vector(random_wave(3 * 8, 12, 0.5), {3, 8}, true);
    check({dec.basis, feats},
          [&]() { return sum(square(decode_waveform(feats, dec, 2, 8))); });

    return worst;
}

double model_fd_worst() {
    ModelConfig cfg = tiny_grad_config();
    ModelParams params = init_params(cfg, 55);
    std::vector<real> wave = random_wave(cfg.L + 2 * cfg.hop, 56, 0.5);  // T = 3
    std::vector<real> clean = random_wave(wave.size(), 57, 0.5);
    std::vector<Tensor> tensors;
    for (auto& [name, t] : params.named()) tensors.push_back(t);

    Graph g;
    auto make = [&]() {
        ForwardOutput out = forward(wave, params);
        return joint_loss(out, clean, 1, 0.5);
    };
    auto value = [&]() { return double(make().item()); };
    auto backward = [&]() {
        Graph::Scope scope(g);
        Tensor loss = make();
        g.backward(loss);
    };
    return oracle::max_grad_rel_error(tensors, value, backward, 1e-5);
}

void criterion_1() {
    const auto t0 = clock_type::now();
    const double layer_worst = layer_fd_worst();
    const double model_worst = model_fd_worst();
    const double secs =
        std::chrono::duration<double>(clock_type::now() - t0).count();
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "worst rel err: layers %.3g, full model %.3g (tol 1e-4), %.1fs",
                  layer_worst, model_worst, secs);
    report(1, "finite-difference gradient check", layer_worst < 1e-4 && model_worst < 1e-4
                                                      && secs < 60.0, detail);
}

// ---- criterion 2: attention invariants and end-to-end causality ------------

void criterion_2() {
    std::mt19937_64 rng(202);
    ModelConfig cfg = tiny_grad_config();
    bool ok = true;
    std::string why;

    for (int trial = 0; trial < 100 && ok; ++trial) {
        // attention invariants on random inputs
        const std::size_t T = 1 + rng() % 8;
        const std::size_t w = 1 + rng() % 5;
        CausalLocalAttention attn;
        attn.W = Tensor::from_vector(random_wave(9, rng()), {3, 3});
        attn.window = w;
        Tensor keys = Tensor::from_vector(random_wave(T * 3, rng()), {T, 3});
        Tensor queries = Tensor::from_vector(random_wave(T * 3, rng()), {T, 3});
        Tensor values = Tensor::from_vector(random_wave(T * 3, rng()), {T, 3});
        AttentionResult res = attend(keys, queries, values, attn);
        for (std::size_t t = 0; t < T; ++t) {
            double total = 0;
            for (std::size_t k = 0; k < T; ++k) {
                const double a = res.weight_at(t, k);
                if (a < 0) { ok = false; why = "negative attention weight"; }
                if (k > t && a != 0) { ok = false; why = "future frame attended"; }
                if (t > w && k + w < t && a != 0) {
                    ok = false;
                    why = "weight outside the local window";
                }
                total += a;
            }
            if (std::abs(total - 1.0) > 1e-9) { ok = false; why = "weights do not sum to 1"; }
        }

        // end-to-end causality: perturbing the tail leaves earlier frames
        // bit-identical
        ModelParams params = init_params(cfg, 300 + trial);
        const std::size_t frames = 3 + rng() % 3;
        std::vector<real> wave = random_wave((frames - 1) * cfg.hop + cfg.L, rng());
        ForwardOutput base = forward(wave, params);
        const std::size_t t_keep = rng() % (frames - 1);
        std::vector<real> bumped = wave;
        for (std::size_t i = t_keep * cfg.hop + cfg.L; i < bumped.size(); ++i) {
            bumped[i] += real(0.25);
        }
        ForwardOutput moved = forward(bumped, params);
        for (std::size_t t = 0; t <= t_keep && ok; ++t) {
            for (std::size_t f = 0; f < cfg.N; ++f) {
                if (base.mask.at(t, f) != moved.mask.at(t, f)) {
                    ok = false;
                    why = "future samples leaked into an earlier mask frame";
                }
            }
            for (std::size_t c = 0; c < cfg.C; ++c) {
                if (base.logits.at(t, c) != moved.logits.at(t, c)) {
                    ok = false;
                    why = "future samples leaked into earlier logits";
                }
            }
        }
    }
    report(2, "attention invariants and causality (100 random inputs)", ok, why);
}

// ---- criterion 3: mixing fidelity ------------------------------------------

void criterion_3() {
    std::mt19937_64 rng(303);
    std::uniform_real_distribution<double> snr_dist(-10.0, 30.0);
    std::uniform_int_distribution<std::size_t> len(500, 3000);
    double worst = 0;
    for (int i = 0; i < 1000; ++i) {
        const double snr = snr_dist(rng);
        Utterance clean, noise;
        clean.samples = random_wave(len(rng), rng(), 0.4);
        noise.samples = random_wave(len(rng), rng(), 0.6);
        Utterance mix = mix_at_snr(clean, noise, snr, rng());
        std::vector<real> residual(mix.samples.size());
        for (std::size_t j = 0; j < residual.size(); ++j) {
            residual[j] = mix.samples[j] - mix.clean_ref[j];
        }
        worst = std::max(worst, std::abs(oracle::achieved_snr_db(mix.clean_ref, residual) - snr));
    }
    char detail[96];
    std::snprintf(detail, sizeof(detail), "worst |achieved-requested| = %.3g dB (tol 1e-6)",
                  worst);
    report(3, "snr mixing fidelity over 1000 random cases", worst < 1e-6, detail);
}

// ---- criterion 4: learning-rate schedule endpoints --------------------------

void criterion_4() {
    TrainConfig cfg;
    cfg.lr_start = 1e-4;
    cfg.lr_end = 1e-8;
    cfg.max_epochs = 200;
    const bool ok = lr_schedule(0, cfg) == 1e-4 && lr_schedule(199, cfg) == 1e-8;
    char detail[96];
    std::snprintf(detail, sizeof(detail), "lr(0)=%.17g lr(199)=%.17g", lr_schedule(0, cfg),
                  lr_schedule(199, cfg));
    report(4, "lr schedule endpoints are exact", ok, detail);
}

// ---- criteria 5 and 6: desk-scale learning and ablation ordering ------------

struct RunScore {
    double si_sdr_gain = 0;
    double accuracy = -1;
};

ModelConfig desk_config(Variant v) {
    ModelConfig cfg;
    cfg.N = 64;
    cfg.L = 256;
    cfg.hop = 128;
    cfg.H = 32;
    cfg.Hn = 16;
    cfg.Hs = 16;
    cfg.Es = 32;
    cfg.C = 4;
    cfg.window = 5;
    cfg.variant = v;
    return cfg;
}

RunScore train_and_score(const MixtureManifest& manifest, const std::string& manifest_path,
                         Variant v, std::uint64_t seed, std::size_t max_epochs, double alpha,
                         const fs::path& out_dir) {
    TrainConfig tc;
    tc.alpha = has_noise_branch(v) ? alpha : 0.0;
    tc.lr_start = 3e-3;
    tc.lr_end = 3e-4;
    tc.max_epochs = max_epochs;
    tc.patience = 15;
    tc.seed = seed;
    TrainResult tr = train_loop(manifest, desk_config(v), tc, out_dir.string());
    ModelParams best = load_checkpoint(tr.best_checkpoint_path).params;
    EvalReport rep = evaluate(best, {manifest_path});
    RunScore score;
    score.si_sdr_gain = rep.rows[0].denoised_si_sdr - rep.rows[0].noisy_si_sdr;
    score.accuracy = rep.rows[0].class_accuracy;
    return score;
}

MixtureManifest desk_corpus(fs::path& dir_out, std::string& manifest_path_out) {
    dir_out = fresh("desk_corpus");
    ProceduralSpec spec;
    spec.classes = 4;
    spec.train_per_class = 25;   // 100 train / 20 valid / 20 test in total
    spec.valid_per_class = 5;
    spec.test_per_class = 5;
    spec.sample_rate = 16000;
    spec.duration_s = 1.0;
    spec.snr_min = -5;  // audible noise keeps both the mask and the classifier honest
    spec.snr_max = 10;
    spec.seed = 11;
    MixtureManifest m = procedural_testset(dir_out.string(), spec);
    manifest_path_out = (dir_out / "manifest.txt").string();
    return m;
}

void criterion_5(const MixtureManifest& manifest, const std::string& manifest_path) {
    const auto t0 = clock_type::now();
    RunScore s = train_and_score(manifest, manifest_path, Variant::CaAttLstm2, 1, 40, 0.3,
                                 fresh("desk_ca2"));
    const double mins = std::chrono::duration<double>(clock_type::now() - t0).count() / 60.0;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "si-sdr gain %.2f dB (need >= 3), accuracy %.2f (need >= 0.45), %.1f min",
                  s.si_sdr_gain, s.accuracy, mins);
    report(5, "desk-scale training reaches useful quality",
           s.si_sdr_gain >= 3.0 && s.accuracy >= 0.45 && mins < 30.0, detail);
}

void criterion_6(const MixtureManifest& manifest, const std::string& manifest_path) {
    const Variant order[3] = {Variant::PureLstm, Variant::AttLstm, Variant::CaAttLstm2};
    double mean_gain[3] = {0, 0, 0};
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        for (int v = 0; v < 3; ++v) {
            const std::string tag =
                "abl_" + std::string(variant_name(order[v])) + "_s" + std::to_string(seed);
            // modest classification weight: this criterion compares
            // enhancement quality, not classification
            RunScore s = train_and_score(manifest, manifest_path, order[v], seed, 25, 0.1,
                                         fresh(tag));
            mean_gain[v] += s.si_sdr_gain / 3.0;
        }
    }
    const double slack = 0.25;  // allow small inversions from run noise
    const bool ok = mean_gain[1] >= mean_gain[0] - slack &&
                    mean_gain[2] >= mean_gain[1] - slack &&
                    mean_gain[2] >= mean_gain[0] - slack;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "mean si-sdr gain over 3 seeds: pure %.2f <= att %.2f <= ca2 %.2f dB "
                  "(slack %.2f)",
                  mean_gain[0], mean_gain[1], mean_gain[2], slack);
    report(6, "ablation ordering of the variants", ok, detail);
}

// ---- criterion 7: determinism -----------------------------------------------

void criterion_7() {
    bool ok = true;
    std::string why;

    // corpus synthesis
    ProceduralSpec spec;
    spec.classes = 2;
    spec.train_per_class = 2;
    spec.valid_per_class = 1;
    spec.test_per_class = 1;
    spec.sample_rate = 8000;
    spec.duration_s = 0.1;
    spec.seed = 7;
    fs::path c1 = fresh("det_c1"), c2 = fresh("det_c2");
    MixtureManifest m1 = procedural_testset(c1.string(), spec);
    procedural_testset(c2.string(), spec);
    if (slurp(c1 / "manifest.txt") != slurp(c2 / "manifest.txt")) {
        ok = false;
        why = "manifests differ";
    }
    for (const ManifestRow& r : m1.rows) {
        if (slurp(c1 / r.clean_path) != slurp(c2 / r.clean_path) ||
            slurp(c1 / r.noise_path) != slurp(c2 / r.noise_path)) {
            ok = false;
            why = "generated wavs differ";
        }
    }

    // training artifacts
    ModelConfig mc;
    mc.N = 16;
    mc.L = 16;
    mc.hop = 8;
    mc.H = 8;
    mc.Hn = 4;
    mc.Hs = 4;
    mc.Es = 8;
    mc.C = 2;
    mc.window = 3;
    TrainConfig tc;
    tc.alpha = 0.1;
    tc.lr_start = 1e-3;
    tc.lr_end = 1e-4;
    tc.max_epochs = 2;
    tc.patience = 10;
    tc.seed = 9;
    fs::path r1 = fresh("det_r1"), r2 = fresh("det_r2");
    train_loop(m1, mc, tc, r1.string());
    train_loop(m1, mc, tc, r2.string());
    if (slurp(r1 / "metrics.log") != slurp(r2 / "metrics.log")) {
        ok = false;
        why = "metrics logs differ";
    }
    if (slurp(r1 / "best.ckpt") != slurp(r2 / "best.ckpt")) {
        ok = false;
        why = "checkpoints differ";
    }
    report(7, "same seed reproduces manifests, logs and checkpoints byte-for-byte", ok, why);
}

// ---- criterion 8: round-trips ------------------------------------------------

void criterion_8() {
    bool ok = true;
    std::string why;
    fs::path dir = fresh("roundtrip");

    // checkpoint: save -> load -> save is bit-exact
    ModelParams p = init_params(tiny_grad_config(), 88);
    save_checkpoint((dir / "a.ckpt").string(), p);
    LoadedCheckpoint lc = load_checkpoint((dir / "a.ckpt").string());
    save_checkpoint((dir / "b.ckpt").string(), lc.params);
    if (slurp(dir / "a.ckpt") != slurp(dir / "b.ckpt")) {
        ok = false;
        why = "checkpoint bytes changed across a load/save cycle";
    }

    // float wav: float-precision samples survive exactly
    Utterance u;
    u.samples = random_wave(999, 5);
    for (real& v : u.samples) v = real(float(v));
    write_wav(u, (dir / "f.wav").string(), WavEncoding::Float32);
    Utterance back = read_wav((dir / "f.wav").string());
    if (back.samples.size() != u.samples.size()) {
        ok = false;
        why = "wav length changed";
    } else {
        for (std::size_t i = 0; i < u.samples.size(); ++i) {
            if (float(back.samples[i]) != float(u.samples[i])) {
                ok = false;
                why = "wav samples changed";
            }
        }
    }

    // encoder/decoder pair built for exact identity: U = [I; -I] splits the
    // signal into positive and negative parts, V = [I; -I] recombines them.
    // With hop == L the overlap-add tiles the frames exactly.
    const std::size_t L = 4, N = 8;
    std::vector<real> basis(N * L, real(0));
    for (std::size_t j = 0; j < L; ++j) {
        basis[j * L + j] = real(1);
        basis[(L + j) * L + j] = real(-1);
    }
    Conv1dEncoder enc;
    enc.basis = Tensor::from_vector(basis, {N, L});
    Conv1dDecoder dec;
    dec.basis = Tensor::from_vector(basis, {N, L});
    std::vector<real> wave = random_wave(24, 6);  // multiple of L
    SegmentBatch segs = segment_waveform(wave, L, L);
    Tensor spec = encode_waveform(segs, enc);
    Tensor rec = decode_waveform(spec, dec, L, wave.size());
    double worst = 0;
    for (std::size_t i = 0; i < wave.size(); ++i) {
        worst = std::max(worst, std::abs(double(rec.data()[i] - wave[i])));
    }
    if (worst > 1e-12) {
        ok = false;
        why = "identity encoder/decoder failed to reconstruct";
    }
    report(8, "checkpoint, wav and encoder/decoder round-trips", ok, why);
}

}  // namespace

int main() {
    fs::create_directories(work_dir());
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    fs::path corpus_dir;
    std::string manifest_path;
    MixtureManifest manifest = desk_corpus(corpus_dir, manifest_path);
    criterion_5(manifest, manifest_path);
    criterion_6(manifest, manifest_path);
    criterion_7();
    criterion_8();
    fs::remove_all(work_dir());
    if (g_failures) std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures ? 1 : 0;
}
