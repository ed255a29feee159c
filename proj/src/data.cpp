#include "data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace fs = std::filesystem;

namespace nca {

std::vector<const ManifestRow*> MixtureManifest::split(const std::string& name) const {
    std::vector<const ManifestRow*> out;
    for (const auto& r : rows) {
        if (r.split == name) out.push_back(&r);
    }
    return out;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string join_names(const std::vector<std::string>& names) {
    std::string out;
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (i) out += ',';
        out += names[i];
    }
    return out;
}

double mean_power(const std::vector<real>& x) {
    double p = 0;
    for (real v : x) p += double(v) * double(v);
    return x.empty() ? 0 : p / double(x.size());
}

}  // namespace

void save_manifest(const MixtureManifest& manifest, const std::string& path) {
    std::ofstream os(path, std::ios::binary);  // binary keeps line endings stable
    if (!os) throw DataError("save_manifest: cannot open " + path);
    os << "# nca-manifest v1\n";
    os << "# fields: split\tclean_path\tnoise_path\tclass_id\tsnr_db\tseed\n";
    os << "sample_rate=" << manifest.sample_rate << "\n";
    os << "classes=" << join_names(manifest.class_names) << "\n";
    for (const auto& r : manifest.rows) {
        os << r.split << '\t' << r.clean_path << '\t' << r.noise_path << '\t' << r.class_id
           << '\t' << fmt_double(r.snr_db) << '\t' << r.seed << '\n';
    }
    if (!os) throw DataError("save_manifest: write failed: " + path);
}

MixtureManifest load_manifest(const std::string& path, bool check_files) {
    std::ifstream is(path);
    if (!is) throw DataError("load_manifest: cannot open " + path);
    MixtureManifest m;
    m.base_dir = fs::path(path).parent_path().string();
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (line.rfind("sample_rate=", 0) == 0) {
            m.sample_rate = std::stoi(line.substr(12));
            continue;
        }
        if (line.rfind("classes=", 0) == 0) {
            std::stringstream ss(line.substr(8));
            std::string name;
            while (std::getline(ss, name, ',')) m.class_names.push_back(name);
            continue;
        }
        std::stringstream ss(line);
        ManifestRow r;
        std::string class_id, snr, seed;
        if (!std::getline(ss, r.split, '\t') || !std::getline(ss, r.clean_path, '\t') ||
            !std::getline(ss, r.noise_path, '\t') || !std::getline(ss, class_id, '\t') ||
            !std::getline(ss, snr, '\t') || !std::getline(ss, seed, '\t')) {
            throw DataError("load_manifest: malformed row: " + line);
        }
        r.class_id = std::stoi(class_id);
        r.snr_db = std::stod(snr);
        r.seed = std::stoull(seed);
        if (r.class_id < 0 || static_cast<std::size_t>(r.class_id) >= m.class_names.size()) {
            throw DataError("load_manifest: class id out of range in row: " + line);
        }
        m.rows.push_back(std::move(r));
    }
    if (check_files) {
        for (const auto& r : m.rows) {
            for (const std::string* p : {&r.clean_path, &r.noise_path}) {
                fs::path full = fs::path(m.base_dir) / *p;
                if (!fs::exists(full)) {
                    throw DataError("load_manifest: referenced file missing: " + full.string());
                }
            }
        }
    }
    return m;
}

namespace {

std::size_t crop_offset(std::uint64_t seed, std::size_t slack) {
    if (slack == 0) return 0;
    return static_cast<std::size_t>(mix_seed(seed) % (slack + 1));
}

}  // namespace

Utterance mix_at_snr(const Utterance& clean, const Utterance& noise, double snr_db,
                     std::uint64_t seed) {
    if (clean.sample_rate != noise.sample_rate) {
        throw DataError("mix_at_snr: sample rates differ");
    }
    if (clean.samples.empty()) throw DataError("mix_at_snr: empty clean signal");

    std::vector<real> n = noise.samples;
    if (n.empty()) throw DataError("mix_at_snr: empty noise signal");
    while (n.size() < clean.samples.size()) {  // tile short noise end-to-end
        n.insert(n.end(), noise.samples.begin(), noise.samples.end());
    }
    const std::size_t off = crop_offset(seed, n.size() - clean.samples.size());
    std::vector<real> crop(n.begin() + off, n.begin() + off + clean.samples.size());

    const double p_clean = mean_power(clean.samples);
    const double p_noise = mean_power(crop);
    if (p_clean <= 0) throw DataError("mix_at_snr: silent clean signal");
    if (p_noise <= 0) throw DataError("mix_at_snr: silent noise crop");

    const double gain = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));

    Utterance out;
    out.sample_rate = clean.sample_rate;
    out.samples.resize(clean.samples.size());
    real peak = 0;
    for (std::size_t i = 0; i < out.samples.size(); ++i) {
        out.samples[i] = clean.samples[i] + static_cast<real>(gain) * crop[i];
        peak = std::max(peak, std::abs(out.samples[i]));
    }
    out.clean_ref = clean.samples;
    if (peak > real(0.99)) {
        const real s = real(0.99) / peak;
        for (real& v : out.samples) v *= s;
        for (real& v : out.clean_ref) v *= s;
    }
    return out;
}

Utterance load_mixture(const MixtureManifest& manifest, const ManifestRow& row) {
    const fs::path base(manifest.base_dir);
    Utterance clean = read_wav((base / row.clean_path).string());
    Utterance noise = read_wav((base / row.noise_path).string());
    Utterance out = mix_at_snr(clean, noise, row.snr_db, row.seed);
    out.label = row.class_id;
    return out;
}

namespace {

std::vector<std::string> list_wavs(const std::string& dir) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.is_regular_file() && e.path().extension() == ".wav") {
            out.push_back(e.path().string());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

// Sample count of a mono wav without reading the payload.
std::size_t wav_sample_count(const std::string& path) {
    Utterance u = read_wav(path);  // desk-scale files; a full read is fine
    return u.samples.size();
}

struct TripleKey {
    std::string clean, noise;
    std::size_t offset;
    bool operator<(const TripleKey& o) const {
        return std::tie(clean, noise, offset) < std::tie(o.clean, o.noise, o.offset);
    }
};

}  // namespace

MixtureManifest synthesize_corpus(const std::string& clean_dir, const std::string& noise_root,
                                  const SynthSpec& spec, const std::string& manifest_path) {
    std::vector<std::string> cleans = list_wavs(clean_dir);
    if (cleans.empty()) throw DataError("synthesize_corpus: no clean wav files in " + clean_dir);

    std::vector<std::string> class_names;
    std::vector<std::vector<std::string>> noises;
    if (!fs::is_directory(noise_root)) throw DataError("not a directory: " + noise_root);
    std::vector<fs::path> class_dirs;
    for (const auto& e : fs::directory_iterator(noise_root)) {
        if (e.is_directory()) class_dirs.push_back(e.path());
    }
    std::sort(class_dirs.begin(), class_dirs.end());
    for (const auto& d : class_dirs) {
        auto files = list_wavs(d.string());
        if (files.empty()) continue;
        class_names.push_back(d.filename().string());
        noises.push_back(std::move(files));
    }
    if (class_names.empty()) {
        throw DataError("synthesize_corpus: no noise class directories with wav files");
    }

    MixtureManifest m;
    m.class_names = class_names;
    m.base_dir = fs::path(manifest_path).parent_path().string();
    m.sample_rate = read_wav(cleans[0]).sample_rate;

    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> snr_dist(spec.snr_min, spec.snr_max);
    std::set<TripleKey> used;
    std::size_t row_index = 0;

    auto emit = [&](const std::string& split, std::size_t count) {
        for (std::size_t i = 0; i < count; ++i, ++row_index) {
            ManifestRow r;
            r.split = split;
            r.snr_db = snr_dist(rng);
            r.seed = mix_seed(spec.seed, row_index);

            // Keep (clean, noise, crop offset) unique across the corpus so
            // no mixture can appear in two splits. A collision redraws the
            // pair as well as the seed: with equal-length files the crop
            // offset is pinned at 0 and a new seed alone can never help.
            for (int attempt = 0;; ++attempt) {
                const std::string& clean = cleans[rng() % cleans.size()];
                const std::size_t cls = rng() % class_names.size();
                const std::string& noise = noises[cls][rng() % noises[cls].size()];
                const std::size_t clen = wav_sample_count(clean);
                std::size_t nlen = wav_sample_count(noise);
                while (nlen < clen) nlen += wav_sample_count(noise);
                TripleKey key{clean, noise, crop_offset(r.seed, nlen - clen)};
                if (used.insert(key).second) {
                    r.class_id = static_cast<int>(cls);
                    r.clean_path = fs::relative(clean, m.base_dir).string();
                    r.noise_path = fs::relative(noise, m.base_dir).string();
                    break;
                }
                if (attempt > 1000) {
                    throw DataError("synthesize_corpus: cannot find unique mixture triple");
                }
                r.seed = mix_seed(r.seed, 0x5eedULL + attempt);
            }
            m.rows.push_back(std::move(r));
        }
    };
    emit("train", spec.train_count);
    emit("valid", spec.valid_count);
    emit("test", spec.test_count);

    save_manifest(m, manifest_path);
    return m;
}

// ---- procedural generator ---------------------------------------------------

namespace {

constexpr const char* kRecipeNames[] = {"white", "lowpass", "amtone", "chirp", "bursts", "ringmod"};
constexpr std::size_t kRecipeCount = sizeof(kRecipeNames) / sizeof(kRecipeNames[0]);

// Harmonic stack with slow amplitude envelope and vibrato; never silent.
std::vector<real> gen_clean(std::size_t n, int rate, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uf(0.0, 1.0);
    const double f0 = 110.0 + 140.0 * uf(rng);
    const double vibrato_hz = 4.0 + 2.0 * uf(rng);
    const double env_hz = 1.5 + 2.5 * uf(rng);
    const double phase0 = 2.0 * std::numbers::pi * uf(rng);
    std::vector<real> x(n);
    double peak = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = double(i) / rate;
        const double f = f0 * (1.0 + 0.01 * std::sin(2.0 * std::numbers::pi * vibrato_hz * t));
        double v = 0;
        for (int h = 1; h <= 5; ++h) {
            v += std::sin(2.0 * std::numbers::pi * h * f * t + phase0 * h) / h;
        }
        v *= 0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * env_hz * t);
        x[i] = static_cast<real>(v);
        peak = std::max(peak, std::abs(v));
    }
    for (real& v : x) v = static_cast<real>(0.7 * v / peak);
    return x;
}

std::vector<real> gen_noise(std::size_t class_id, std::size_t n, int rate, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uf(-1.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::vector<real> x(n);
    switch (class_id) {
        case 0:  // white
            for (auto& v : x) v = static_cast<real>(uf(rng));
            break;
        case 1: {  // one-pole lowpassed white
            double y = 0;
            for (auto& v : x) {
                y = 0.95 * y + 0.05 * uf(rng);
                v = static_cast<real>(8.0 * y);
            }
            break;
        }
        case 2: {  // amplitude-modulated tone
            const double fc = 2000.0 + 2000.0 * u01(rng);
            const double fm = 2.0 + 6.0 * u01(rng);
            for (std::size_t i = 0; i < n; ++i) {
                const double t = double(i) / rate;
                x[i] = static_cast<real>(std::sin(2.0 * std::numbers::pi * fc * t) *
                                         (0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * fm * t)));
            }
            break;
        }
        case 3: {  // repeating linear chirp
            const double sweep_s = 0.25;
            const double f_lo = 500.0, f_hi = 6000.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double t = std::fmod(double(i) / rate, sweep_s);
                const double f = f_lo + (f_hi - f_lo) * t / sweep_s;
                x[i] = static_cast<real>(std::sin(2.0 * std::numbers::pi * f * t));
            }
            break;
        }
        case 4: {  // sparse impulsive bursts over a low noise floor
            for (auto& v : x) v = static_cast<real>(0.02 * uf(rng));
            const std::size_t burst_len = static_cast<std::size_t>(0.01 * rate);
            for (std::size_t pos = 0; pos + burst_len < n;
                 pos += static_cast<std::size_t>((0.05 + 0.1 * u01(rng)) * rate)) {
                for (std::size_t j = 0; j < burst_len; ++j) {
                    x[pos + j] = static_cast<real>(uf(rng));
                }
            }
            break;
        }
        case 5: {  // ring-modulated white (band-shifted spectrum)
            const double fc = 3000.0 + 3000.0 * u01(rng);
            for (std::size_t i = 0; i < n; ++i) {
                const double t = double(i) / rate;
                x[i] = static_cast<real>(uf(rng) * std::sin(2.0 * std::numbers::pi * fc * t));
            }
            break;
        }
        default:
            throw ConfigError("procedural noise recipe out of range");
    }
    return x;
}

}  // namespace

std::size_t procedural_recipe_count() { return kRecipeCount; }

const char* procedural_recipe_name(std::size_t class_id) {
    if (class_id >= kRecipeCount) throw ConfigError("procedural recipe id out of range");
    return kRecipeNames[class_id];
}

MixtureManifest procedural_testset(const std::string& out_dir, const ProceduralSpec& spec) {
    if (spec.classes < 2) throw ConfigError("procedural_testset: need at least 2 classes");
    if (spec.classes > kRecipeCount) {
        throw ConfigError("procedural_testset: only " + std::to_string(kRecipeCount) +
                          " noise recipes available");
    }
    fs::create_directories(fs::path(out_dir) / "clean");
    const std::size_t n_samples = static_cast<std::size_t>(spec.duration_s * spec.sample_rate);

    MixtureManifest m;
    m.sample_rate = spec.sample_rate;
    m.base_dir = out_dir;
    for (std::size_t c = 0; c < spec.classes; ++c) {
        m.class_names.emplace_back(kRecipeNames[c]);
        fs::create_directories(fs::path(out_dir) / "noise" / kRecipeNames[c]);
    }

    std::size_t row_index = 0;
    const struct { const char* name; std::size_t per_class; } splits[] = {
        {"train", spec.train_per_class}, {"valid", spec.valid_per_class},
        {"test", spec.test_per_class}};

    for (const auto& sp : splits) {
        for (std::size_t i = 0; i < sp.per_class; ++i) {
            for (std::size_t c = 0; c < spec.classes; ++c, ++row_index) {
                std::mt19937_64 rng(mix_seed(spec.seed, row_index));
                char name[64];

                Utterance clean;
                clean.sample_rate = spec.sample_rate;
                clean.samples = gen_clean(n_samples, spec.sample_rate, rng);
                std::snprintf(name, sizeof(name), "clean/%s_%04zu.wav", sp.name, row_index);
                write_wav(clean, (fs::path(out_dir) / name).string());

                ManifestRow r;
                r.split = sp.name;
                r.clean_path = name;

                Utterance noise;
                noise.sample_rate = spec.sample_rate;
                // noise longer than clean so offset cropping has slack
                noise.samples = gen_noise(c, n_samples + n_samples / 2, spec.sample_rate, rng);
                std::snprintf(name, sizeof(name), "noise/%s/%s_%04zu.wav", kRecipeNames[c],
                              sp.name, row_index);
                write_wav(noise, (fs::path(out_dir) / name).string());
                r.noise_path = name;

                r.class_id = static_cast<int>(c);
                std::uniform_real_distribution<double> snr_dist(spec.snr_min, spec.snr_max);
                r.snr_db = snr_dist(rng);
                r.seed = mix_seed(spec.seed, 0xa11ceULL + row_index);
                m.rows.push_back(std::move(r));
            }
        }
    }
    save_manifest(m, (fs::path(out_dir) / "manifest.txt").string());
    return m;
}

}  // namespace nca
