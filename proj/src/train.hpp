#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "data.hpp"
#include "model.hpp"

namespace nca {

struct TrainConfig {
    double alpha = 0.1;           // classification loss weight in [0,1]
    double lr_start = 1e-4;
    double lr_end = 1e-8;
    std::size_t max_epochs = 200;
    std::size_t patience = 10;    // early-stop after this many stagnant epochs
    std::size_t accum = 1;        // utterances per optimizer step
    double grad_clip = 5.0;       // global-norm clip; <= 0 disables
    std::uint64_t seed = 0;

    void validate(const ModelConfig& model_cfg) const;  // throws ConfigError
};

// Eq-style joint objective: (1-alpha)·Σ(ŝ-s)² + alpha·Σ_t CE(logits_t, label).
// Variants without a classifier use the MSE term only.
Tensor joint_loss(const ForwardOutput& out, const std::vector<real>& clean, int label,
                  double alpha);

struct AdamState {
    std::vector<Tensor> m;  // first moments, parallel to params.named()
    std::vector<Tensor> v;  // second moments
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

AdamState make_adam_state(const ModelParams& params);

// Bias-corrected Adam update over every named parameter, in place. Gradients
// must already be populated; they are not cleared here.
void adam_step(ModelParams& params, AdamState& state, double lr);

// lr(e) = lr_start·(lr_end/lr_start)^(e/(max_epochs-1))
double lr_schedule(std::size_t epoch, const TrainConfig& cfg);

struct EpochMetrics {
    std::size_t epoch = 0;
    double train_loss = 0;
    double valid_loss = 0;
    double valid_accuracy = 0;  // -1 for variants without a classifier
    double lr = 0;
};

struct TrainResult {
    std::vector<EpochMetrics> log;
    std::size_t best_epoch = 0;
    double best_valid_loss = 0;
    std::string best_checkpoint_path;
};

// One pass over the training recipe: seeded per-epoch shuffle, per-utterance
// forward/backward/Adam, validation after each epoch, best-checkpoint saving,
// early stopping. Writes <out_dir>/best.ckpt, <out_dir>/last.state and
// <out_dir>/metrics.log. resume_from, when nonempty, restores a last.state.
TrainResult train_loop(const MixtureManifest& manifest, const ModelConfig& model_cfg,
                       const TrainConfig& cfg, const std::string& out_dir,
                       const std::string& resume_from = "");

}  // namespace nca
