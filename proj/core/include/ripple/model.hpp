#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "ripple/kernel.hpp"
#include "ripple/matrix.hpp"
#include "ripple/pattern.hpp"

namespace ripple::model {

inline constexpr double kLayerNormEps = 1e-5;

struct ModelConfig {
    int blocks = 4;
    int heads = 8;
    int d_model = 256;
    int d_ff = 1024;
    int bins = 257;
    pattern::PatternSpec attn_pattern = pattern::PatternSpec::full();

    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct LayerNormParams {
    Vec gain;  // initialized to 1
    Vec bias;  // initialized to 0
};

struct BlockParams {
    kernel::MhaParams mha;
    LayerNormParams ln_attn;
    Matrix ffn_w1;  // d_model x d_ff
    Vec ffn_b1;
    Matrix ffn_w2;  // d_ff x d_model
    Vec ffn_b2;
    LayerNormParams ln_ffn;
};

/// All learned weights. Also reused as the container for gradients and for
/// Adam moment buffers (identical shapes by construction).
struct ModelParams {
    ModelConfig config;
    Matrix w_in;  // bins x d_model
    Vec b_in;
    LayerNormParams ln_in;
    std::vector<BlockParams> blocks;
    Matrix w_out;  // d_model x bins
    Vec b_out;
};

/// Deterministic Glorot-uniform init; layer-norm gains 1, all biases 0.
ModelParams init(const ModelConfig& cfg, std::uint64_t seed);

/// Same shapes as `p`, every value zero.
ModelParams zeros_like(const ModelParams& p);

/// Flat views over every tensor in the fixed canonical order used by the
/// checkpoint format, the optimizer, and gradient clipping.
std::vector<std::span<double>> tensor_views(ModelParams& p);
std::vector<std::span<const double>> tensor_views(const ModelParams& p);

/// Total scalar parameter count.
std::size_t parameter_count(const ModelParams& p);

struct LnCache {
    Matrix xhat;  // normalized activations, before gain/bias
    Vec inv_std;  // per row, 1/sqrt(var + eps)
};

struct BlockCache {
    kernel::AttentionCache attn;
    LnCache ln_attn;
    Matrix after_attn_ln;  // input to the FFN
    Matrix ffn_act;        // ReLU(x W1 + b1), L x d_ff
    LnCache ln_ffn;
    Matrix out;            // block output
};

struct ForwardCache {
    bool valid = false;
    Matrix input;  // magnitude, L x bins
    LnCache ln_in;
    Matrix hidden0;  // after input projection + LN + ReLU
    std::vector<BlockCache> blocks;
    Matrix prediction;  // sigmoid output, L x bins
};

/// Oracle hook: Dense routes every attention call through the reference
/// kernel with a materialized mask instead of the packed sparse kernel.
enum class KernelRoute { Sparse, Dense };

/// Magnitude spectrogram in, estimated mask in (0, 1) out.
Matrix forward(const ModelParams& params, const Matrix& magnitude, ForwardCache* cache = nullptr,
               kernel::MacCounter* macs = nullptr, KernelRoute route = KernelRoute::Sparse);

struct BackwardResult {
    ModelParams grads;
    Matrix input_grad;
    double loss = 0.0;
};

/// MSE loss over all L*K entries and exact gradients for every parameter and
/// the input.
BackwardResult backward(const ModelParams& params, const ForwardCache& cache,
                        const Matrix& target);

double mse_loss(const Matrix& prediction, const Matrix& target);

/// Checkpoint format: "RSAE" magic, u32 version (=1), u64 config-blob length,
/// canonical config text, little-endian f64 tensors in canonical order, and a
/// trailing FNV-1a 64 checksum of all preceding bytes.
void save(const ModelParams& params, const std::filesystem::path& path);
ModelParams load(const std::filesystem::path& path);

}  // namespace ripple::model
