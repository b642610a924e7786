#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <utility>
#include <vector>

#include "ripple/dsp.hpp"
#include "ripple/model.hpp"
#include "ripple/targets.hpp"

namespace ripple::train {

/// Warm-up schedule: lr(n) = d_model^-0.5 * min(n^-0.5, n * wup^-1.5).
/// Rises linearly to its peak at n = warmup_steps, then decays as n^-0.5.
struct LrSchedule {
    int d_model = 256;
    int warmup_steps = 40000;
};

double lr_at(const LrSchedule& schedule, std::int64_t n);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.98;
    double eps = 1e-9;
    double clip = 1.0;  // elementwise bound on gradient values
};

/// Optimizer state: step counter plus first/second moment buffers shaped
/// exactly like the parameters.
struct OptState {
    std::int64_t step = 0;
    model::ModelParams m;
    model::ModelParams v;

    static OptState init(const model::ModelParams& params);
};

/// Elementwise clamp of every gradient value to [-bound, bound].
/// NaN anywhere is a divergence signal and throws.
void clip_gradients(model::ModelParams& grads, double bound);

/// One bias-corrected Adam update, in place.
void adam_step(model::ModelParams& params, const model::ModelParams& grads, OptState& opt,
               double lr, const AdamConfig& cfg);

/// Deterministic desk-scale data: clean = 3-8 amplitude-modulated harmonics
/// with energy concentrated below 4 kHz; noise = one-pole-filtered white
/// noise, returned already scaled so that SNR(clean, noise) == snr_db.
std::pair<dsp::Waveform, dsp::Waveform> make_synthetic_pair(std::uint64_t seed,
                                                            double duration_s, double snr_db);

struct TrainConfig {
    targets::MaskObjective objective = targets::MaskObjective::Irm;
    int snr_lo_db = -10;  // integer SNR grid, inclusive
    int snr_hi_db = 20;
    int utterances_per_step = 10;
    int total_steps = 500;
    std::uint64_t seed = 1;
    int warmup_steps = 40000;
    double utterance_duration_s = 0.5;

    void validate() const;
};

struct StepLog {
    int step = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    std::vector<StepLog> history;
    model::ModelParams params;
};

/// Runs the full loop: synthesize batch, compute targets, forward, MSE,
/// backward with deterministic accumulation, clip, Adam with the warm-up
/// schedule. Optionally streams "step,lr,loss" CSV rows to loss_csv_path.
TrainResult train_loop(const model::ModelConfig& model_cfg, const TrainConfig& train_cfg,
                       const std::optional<std::filesystem::path>& loss_csv_path = std::nullopt);

/// key=value overrides for TrainConfig ("objective", "snr_lo", "snr_hi",
/// "batch", "steps", "seed", "warmup", "duration"); '#' starts a comment.
TrainConfig parse_train_config_file(const std::filesystem::path& path, TrainConfig base = {});

}  // namespace ripple::train
