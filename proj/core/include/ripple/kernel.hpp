#pragma once

#include <cstdint>
#include <vector>

#include "ripple/matrix.hpp"
#include "ripple/pattern.hpp"
#include "ripple/rng.hpp"

namespace ripple::kernel {

/// Multi-head projection weights. No biases: the attention map is a pure
/// composition of matrix products.
struct MhaParams {
    int d_model = 0;
    int heads = 0;
    int d_k = 0;                   // d_model / heads
    std::vector<Matrix> wq;        // per head, d_model x d_k
    std::vector<Matrix> wk;
    std::vector<Matrix> wv;
    Matrix wo;                     // d_model x d_model

    static MhaParams init(int d_model, int heads, Rng& rng);
    void validate() const;
};

/// Multiply-accumulate counter for the attention kernels. Pass one to a
/// forward call to enable instrumentation; counts are exact, not sampled.
/// Dense calls charge scores/context for all L^2 pairs (that is what they
/// compute); sparse calls charge only the unmasked pairs.
struct MacCounter {
    std::uint64_t projections = 0;
    std::uint64_t scores = 0;
    std::uint64_t context = 0;

    std::uint64_t total() const { return projections + scores + context; }
    void reset() { projections = scores = context = 0; }
};

/// Forward activations kept for the backward pass.
struct AttentionCache {
    bool valid = false;
    bool is_sparse = false;
    Matrix q_in, k_in, v_in;
    std::vector<Matrix> qh, kh, vh;                   // per-head projections, L x d_k
    pattern::PackedMask packed;                       // sparse path
    std::vector<std::vector<double>> sparse_weights;  // per head, aligned to packed.cols
    pattern::BoolMask mask;                           // dense path
    std::vector<Matrix> dense_weights;                // per head, L x L, zero where masked
    Matrix concat;                                    // L x d_model, before the output projection
};

/// Reference kernel: computes every score, then zeroes masked positions after
/// a softmax restricted to the unmasked columns. Masked columns get exactly
/// zero weight.
Matrix attend_dense(const Matrix& q, const Matrix& k, const Matrix& v, const MhaParams& params,
                    const pattern::BoolMask& mask, AttentionCache* cache = nullptr,
                    MacCounter* macs = nullptr);

/// Structured kernel: walks only the unmasked (i, j) pairs of the pattern.
/// Numerically equal to attend_dense on build_mask(spec, L).
Matrix attend_sparse(const Matrix& q, const Matrix& k, const Matrix& v, const MhaParams& params,
                     const pattern::PackedMask& mask, AttentionCache* cache = nullptr,
                     MacCounter* macs = nullptr);
Matrix attend_sparse(const Matrix& q, const Matrix& k, const Matrix& v, const MhaParams& params,
                     const pattern::PatternSpec& spec, AttentionCache* cache = nullptr,
                     MacCounter* macs = nullptr);

struct MhaGrads {
    std::vector<Matrix> wq, wk, wv;
    Matrix wo;
    Matrix q, k, v;  // gradients w.r.t. the inputs
};

/// Exact gradients of the forward map. Requires the cache filled by a
/// forward call with `cache` set.
MhaGrads attend_backward(const MhaParams& params, const AttentionCache& cache,
                         const Matrix& upstream);

}  // namespace ripple::kernel
