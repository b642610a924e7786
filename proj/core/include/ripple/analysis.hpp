#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <variant>
#include <vector>

#include "ripple/model.hpp"
#include "ripple/pattern.hpp"

namespace ripple::analysis {

/// Dual-path chunked baseline, modeled analytically only: chunk size C with
/// 50% overlap gives S = max(1, ceil(2L/C) - 1) chunks; the first half of the
/// layers attend within chunks (nnz = S*C^2), the rest across chunks
/// (nnz = C*S^2), both at effective sequence length S*C.
struct SepformerSpec {
    int chunk = 50;

    std::string id() const { return "sepformer_c" + std::to_string(chunk); }
    void validate() const;
};

using MacSpec = std::variant<pattern::PatternSpec, SepformerSpec>;

std::string spec_id(const MacSpec& spec);

/// Multiply-accumulate counts for one configuration at one sequence length,
/// summed over the model's layer schedule.
struct MacReport {
    std::string pattern_id;
    int length = 0;
    std::uint64_t scores = 0;       // nnz * d_model per layer
    std::uint64_t context = 0;      // nnz * d_model per layer
    std::uint64_t projections = 0;  // 4 * L * d_model^2 per layer
    std::uint64_t ffn = 0;          // 2 * L * d_model * d_ff per layer
    std::uint64_t total = 0;        // sum of the four components
};

MacReport macs_attention(const MacSpec& spec, int L, const model::ModelConfig& cfg);

/// One report per (spec, L), ordered by (spec, L).
std::vector<MacReport> macs_sweep(const std::vector<MacSpec>& specs,
                                  const std::vector<int>& lengths,
                                  const model::ModelConfig& cfg);

/// Header: pattern,L,macs_scores,macs_context,macs_proj,macs_ffn,macs_total
void write_macs_csv(const std::vector<MacReport>& reports, std::ostream& out);

struct BenchRow {
    std::string pattern_id;
    int length = 0;
    double median_ns = 0.0;
};

/// Median wall-clock per forward call, attend_dense(Full) vs
/// attend_sparse(spec), one warm-up call excluded, single-threaded (pinned to
/// one logical CPU where the platform allows).
std::vector<BenchRow> bench_kernels(const pattern::PatternSpec& spec,
                                    const std::vector<int>& lengths,
                                    const model::ModelConfig& cfg, int repetitions);

/// Header: pattern,L,median_ns
void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out);

}  // namespace ripple::analysis
