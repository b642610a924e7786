#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ripple::pattern {

enum class PatternKind { Full, Band, Ripple, Blockwise };

std::string kind_name(PatternKind k);

/// Declarative attention-mask description.
///
/// Band/Ripple use the window length w (even; each frame attends to w/2
/// neighbors per side). Ripple additionally connects frames at offsets
/// w/2 + m*d for m >= 1 (dilated global links). Blockwise splits the sequence
/// into non-overlapping blocks attended independently.
struct PatternSpec {
    PatternKind kind = PatternKind::Full;
    int w = 0;      // window length in frames, even, >= 0
    int d = 1;      // dilation stride, >= 1
    int block = 1;  // block size, >= 1

    static PatternSpec full();
    static PatternSpec band(int w);
    static PatternSpec ripple(int w, int d);
    static PatternSpec blockwise(int block);

    void validate() const;
    int half_window() const { return w / 2; }

    /// Stable identifier used in CSV output, e.g. "ripple_w12_d24".
    std::string id() const;

    friend bool operator==(const PatternSpec&, const PatternSpec&) = default;
};

/// Materialized L x L boolean mask. Always symmetric with an all-true
/// diagonal, so every softmax row is well defined.
struct BoolMask {
    int L = 0;
    std::vector<std::uint8_t> m;  // row-major L x L
    PatternSpec spec;

    bool at(int i, int j) const { return m[static_cast<std::size_t>(i) * L + j] != 0; }
    std::uint64_t popcount() const;
};

/// Per-row packed column indices (CSR layout), ascending within each row.
/// This is the layout the sparse kernel walks.
struct PackedMask {
    int L = 0;
    std::vector<std::size_t> row_ptr;  // L + 1 entries
    std::vector<int> cols;             // nnz entries
    PatternSpec spec;

    std::size_t nnz() const { return cols.size(); }
    std::size_t row_begin(int i) const { return row_ptr[i]; }
    std::size_t row_end(int i) const { return row_ptr[i + 1]; }
};

bool mask_entry(const PatternSpec& spec, int i, int j);

BoolMask build_mask(const PatternSpec& spec, int L);
PackedMask pack_mask(const PatternSpec& spec, int L);

/// Closed-form count of true entries in build_mask(spec, L). Matches the
/// enumeration exactly for every spec and L.
std::uint64_t nnz(const PatternSpec& spec, int L);

/// Per-layer pattern assignment. Ripple requests run Band(w) on the first
/// floor(B/2) layers and Ripple(w, d) on the rest; every other kind uses its
/// own spec at every layer.
std::vector<PatternSpec> layer_schedule(int num_blocks, const PatternSpec& spec);

/// PBM "P1" text dump, 1 = attend; one digit row per mask row.
void write_pbm(const BoolMask& mask, std::ostream& out);

/// CSV "row,degree" with one line per row (plus header).
void write_row_degrees_csv(const BoolMask& mask, std::ostream& out);

}  // namespace ripple::pattern
