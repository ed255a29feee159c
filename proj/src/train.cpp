#include "train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

namespace fs = std::filesystem;

namespace nca {

void TrainConfig::validate(const ModelConfig& model_cfg) const {
    if (!(alpha >= 0 && alpha <= 1)) throw ConfigError("train config: alpha must be in [0,1]");
    if (!(lr_start >= lr_end && lr_end > 0)) {
        throw ConfigError("train config: need lr_start >= lr_end > 0");
    }
    if (max_epochs == 0) throw ConfigError("train config: max_epochs must be positive");
    if (patience == 0) throw ConfigError("train config: patience must be >= 1");
    if (accum == 0) throw ConfigError("train config: accum must be >= 1");
    if (!has_noise_branch(model_cfg.variant) && alpha != 0) {
        throw ConfigError("train config: alpha must be 0 for variants without a classifier");
    }
}

Tensor joint_loss(const ForwardOutput& out, const std::vector<real>& clean, int label,
                  double alpha) {
    if (out.denoised.size() != clean.size()) {
        throw ContractError("joint_loss: denoised and clean lengths differ");
    }
    Tensor ref = Tensor::from_vector(clean, {clean.size()});
    Tensor mse = sum(square(sub(out.denoised, ref)));
    if (!out.logits.defined()) return mse;  // alpha forced to 0 without a classifier
    if (label < 0 || static_cast<std::size_t>(label) >= out.logits.dim(1)) {
        throw ContractError("joint_loss: label out of range");
    }
    Tensor ce = cross_entropy_with_logits(out.logits, static_cast<std::size_t>(label));
    return add(scale(mse, static_cast<real>(1.0 - alpha)), scale(ce, static_cast<real>(alpha)));
}

AdamState make_adam_state(const ModelParams& params) {
    AdamState s;
    for (const auto& [name, t] : params.named()) {
        s.m.push_back(Tensor::zeros(t.shape()));
        s.v.push_back(Tensor::zeros(t.shape()));
    }
    return s;
}

void adam_step(ModelParams& params, AdamState& state, double lr) {
    auto named = params.named();
    if (named.size() != state.m.size()) {
        throw ContractError("adam_step: state does not match parameter set");
    }
    ++state.step;
    const double bc1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, double(state.step));
    for (std::size_t p = 0; p < named.size(); ++p) {
        auto& [name, t] = named[p];
        if (!t.requires_grad() || !t.has_grad()) {
            throw ContractError("adam_step: missing gradient for parameter " + name);
        }
        const auto& g = t.grad();
        auto& m = state.m[p].data();
        auto& v = state.v[p].data();
        auto& x = t.data();
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (!std::isfinite(g[i])) {
                throw NumericError("adam_step: non-finite gradient in parameter " + name);
            }
            m[i] = real(state.beta1) * m[i] + real(1.0 - state.beta1) * g[i];
            v[i] = real(state.beta2) * v[i] + real(1.0 - state.beta2) * g[i] * g[i];
            const double mhat = double(m[i]) / bc1;
            const double vhat = double(v[i]) / bc2;
            x[i] -= static_cast<real>(lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

double lr_schedule(std::size_t epoch, const TrainConfig& cfg) {
    if (epoch >= cfg.max_epochs) throw ContractError("lr_schedule: epoch out of range");
    if (cfg.max_epochs == 1) return cfg.lr_start;
    const double frac = double(epoch) / double(cfg.max_epochs - 1);
    return cfg.lr_start * std::pow(cfg.lr_end / cfg.lr_start, frac);
}

namespace {

void clip_gradients(ModelParams& params, double clip) {
    if (clip <= 0) return;
    double norm_sq = 0;
    auto named = params.named();
    for (auto& [name, t] : named) {
        for (real g : t.grad()) norm_sq += double(g) * double(g);
    }
    const double norm = std::sqrt(norm_sq);
    if (norm <= clip) return;
    const real s = static_cast<real>(clip / norm);
    for (auto& [name, t] : named) {
        for (real& g : t.grad()) g *= s;
    }
}

void zero_gradients(ModelParams& params) {
    for (auto& [name, t] : params.named()) t.zero_grad();
}

struct TrainerState {
    std::size_t next_epoch = 0;   // 0-based
    std::size_t stagnant = 0;
    std::size_t best_epoch = 0;
    double best_valid = std::numeric_limits<double>::infinity();
};

Tensor scalar_tensor(double v) { return Tensor::from_vector({static_cast<real>(v)}, {1}); }

void save_training_state(const std::string& path, const ModelParams& params,
                         const AdamState& adam, const TrainerState& ts) {
    std::vector<std::pair<std::string, Tensor>> extra;
    auto named = params.named();
    for (std::size_t p = 0; p < named.size(); ++p) {
        extra.emplace_back("adam.m." + named[p].first, adam.m[p]);
        extra.emplace_back("adam.v." + named[p].first, adam.v[p]);
    }
    extra.emplace_back("state.step", scalar_tensor(double(adam.step)));
    extra.emplace_back("state.next_epoch", scalar_tensor(double(ts.next_epoch)));
    extra.emplace_back("state.stagnant", scalar_tensor(double(ts.stagnant)));
    extra.emplace_back("state.best_epoch", scalar_tensor(double(ts.best_epoch)));
    extra.emplace_back("state.best_valid", scalar_tensor(ts.best_valid));
    save_checkpoint(path, params, extra);
}

void restore_training_state(const std::string& path, ModelParams& params, AdamState& adam,
                            TrainerState& ts) {
    LoadedCheckpoint ck = load_checkpoint(path);
    params = std::move(ck.params);
    adam = make_adam_state(params);
    auto named = params.named();
    std::size_t found = 0;
    for (auto& [name, t] : ck.extra) {
        for (std::size_t p = 0; p < named.size(); ++p) {
            if (name == "adam.m." + named[p].first) { adam.m[p].data() = t.data(); ++found; }
            else if (name == "adam.v." + named[p].first) { adam.v[p].data() = t.data(); ++found; }
        }
        if (name == "state.step") adam.step = static_cast<std::size_t>(t.item());
        if (name == "state.next_epoch") ts.next_epoch = static_cast<std::size_t>(t.item());
        if (name == "state.stagnant") ts.stagnant = static_cast<std::size_t>(t.item());
        if (name == "state.best_epoch") ts.best_epoch = static_cast<std::size_t>(t.item());
        if (name == "state.best_valid") ts.best_valid = t.item();
    }
    if (found != 2 * named.size()) {
        throw DataError("resume: checkpoint lacks optimizer state: " + path);
    }
}

std::string fmt_metrics(const EpochMetrics& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "epoch=%zu train_loss=%.17g valid_loss=%.17g valid_acc=%.17g lr=%.17g",
                  m.epoch, m.train_loss, m.valid_loss, m.valid_accuracy, m.lr);
    return buf;
}

}  // namespace

TrainResult train_loop(const MixtureManifest& manifest, const ModelConfig& model_cfg,
                       const TrainConfig& cfg, const std::string& out_dir,
                       const std::string& resume_from) {
    model_cfg.validate();
    cfg.validate(model_cfg);
    auto train_rows = manifest.split("train");
    auto valid_rows = manifest.split("valid");
    if (train_rows.empty()) throw DataError("train_loop: empty train split");
    if (valid_rows.empty()) throw DataError("train_loop: empty valid split");

    std::vector<Utterance> train_set, valid_set;
    train_set.reserve(train_rows.size());
    for (const auto* r : train_rows) train_set.push_back(load_mixture(manifest, *r));
    for (const auto* r : valid_rows) valid_set.push_back(load_mixture(manifest, *r));

    fs::create_directories(out_dir);
    const std::string best_path = (fs::path(out_dir) / "best.ckpt").string();
    const std::string state_path = (fs::path(out_dir) / "last.state").string();
    const std::string log_path = (fs::path(out_dir) / "metrics.log").string();

    ModelParams params = init_params(model_cfg, cfg.seed);
    AdamState adam = make_adam_state(params);
    TrainerState ts;
    if (!resume_from.empty()) restore_training_state(resume_from, params, adam, ts);

    std::ofstream log(log_path, ts.next_epoch == 0 ? std::ios::trunc : std::ios::app);
    if (!log) throw DataError("train_loop: cannot open metrics log " + log_path);

    const double effective_alpha = has_noise_branch(model_cfg.variant) ? cfg.alpha : 0.0;
    TrainResult result;
    result.best_checkpoint_path = best_path;

    auto eval_valid = [&](double& loss_out, double& acc_out) {
        double total = 0;
        std::size_t correct = 0;
        for (const Utterance& u : valid_set) {
            ForwardOutput out = forward(u.samples, params);
            total += joint_loss(out, u.clean_ref, u.label.value_or(0), effective_alpha).item();
            if (out.logits.defined() && u.label && predict_class(out.logits) == *u.label) {
                ++correct;
            }
        }
        loss_out = total / double(valid_set.size());
        acc_out = has_noise_branch(model_cfg.variant)
                      ? double(correct) / double(valid_set.size())
                      : -1.0;
    };

    for (std::size_t epoch = ts.next_epoch; epoch < cfg.max_epochs; ++epoch) {
        const double lr = lr_schedule(epoch, cfg);

        std::vector<std::size_t> order(train_set.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0xe60c0ULL + epoch));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double train_total = 0;
        std::size_t pending = 0;
        zero_gradients(params);
        for (std::size_t idx : order) {
            const Utterance& u = train_set[idx];
            Graph graph;
            Graph::Scope scope(graph);
            ForwardOutput out = forward(u.samples, params);
            Tensor loss = joint_loss(out, u.clean_ref, u.label.value_or(0), effective_alpha);
            if (!std::isfinite(loss.item())) {
                throw NumericError("train_loop: non-finite loss at epoch " +
                                   std::to_string(epoch + 1));
            }
            train_total += loss.item();
            graph.backward(loss);
            if (++pending == cfg.accum) {
                clip_gradients(params, cfg.grad_clip);
                adam_step(params, adam, lr);
                zero_gradients(params);
                pending = 0;
            }
        }
        if (pending) {
            clip_gradients(params, cfg.grad_clip);
            adam_step(params, adam, lr);
            zero_gradients(params);
        }

        EpochMetrics m;
        m.epoch = epoch + 1;
        m.train_loss = train_total / double(train_set.size());
        m.lr = lr;
        eval_valid(m.valid_loss, m.valid_accuracy);
        result.log.push_back(m);
        log << fmt_metrics(m) << "\n";
        log.flush();

        if (m.valid_loss < ts.best_valid) {
            ts.best_valid = m.valid_loss;
            ts.best_epoch = epoch + 1;
            ts.stagnant = 0;
            save_checkpoint(best_path, params);
        } else {
            ++ts.stagnant;
        }
        ts.next_epoch = epoch + 1;
        save_training_state(state_path, params, adam, ts);
        if (ts.stagnant >= cfg.patience) break;
    }

    result.best_epoch = ts.best_epoch;
    result.best_valid_loss = ts.best_valid;
    return result;
}

}  // namespace nca
