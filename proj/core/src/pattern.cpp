#include "ripple/pattern.hpp"

#include <algorithm>
#include <cstdlib>
#include <ostream>
#include <stdexcept>

namespace ripple::pattern {

std::string kind_name(PatternKind k) {
    switch (k) {
        case PatternKind::Full: return "full";
        case PatternKind::Band: return "band";
        case PatternKind::Ripple: return "ripple";
        case PatternKind::Blockwise: return "blockwise";
    }
    return "?";
}

PatternSpec PatternSpec::full() { return {PatternKind::Full, 0, 1, 1}; }
PatternSpec PatternSpec::band(int w) { return {PatternKind::Band, w, 1, 1}; }
PatternSpec PatternSpec::ripple(int w, int d) { return {PatternKind::Ripple, w, d, 1}; }
PatternSpec PatternSpec::blockwise(int block) { return {PatternKind::Blockwise, 0, 1, block}; }

void PatternSpec::validate() const {
    if ((kind == PatternKind::Band || kind == PatternKind::Ripple)) {
        if (w < 0) throw std::invalid_argument("PatternSpec: w must be >= 0");
        if (w % 2 != 0) throw std::invalid_argument("PatternSpec: w must be even");
    }
    if (kind == PatternKind::Ripple && d < 1)
        throw std::invalid_argument("PatternSpec: d must be >= 1");
    if (kind == PatternKind::Blockwise && block < 1)
        throw std::invalid_argument("PatternSpec: block must be >= 1");
}

std::string PatternSpec::id() const {
    switch (kind) {
        case PatternKind::Full: return "full";
        case PatternKind::Band: return "band_w" + std::to_string(w);
        case PatternKind::Ripple:
            return "ripple_w" + std::to_string(w) + "_d" + std::to_string(d);
        case PatternKind::Blockwise: return "blockwise_b" + std::to_string(block);
    }
    return "?";
}

bool mask_entry(const PatternSpec& spec, int i, int j) {
    const int off = std::abs(i - j);
    switch (spec.kind) {
        case PatternKind::Full: return true;
        case PatternKind::Band: return off <= spec.half_window();
        case PatternKind::Ripple: {
            const int h = spec.half_window();
            if (off <= h) return true;
            return (off - h) % spec.d == 0;  // off = h + m*d for some m >= 1
        }
        case PatternKind::Blockwise: return i / spec.block == j / spec.block;
    }
    return false;
}

std::uint64_t BoolMask::popcount() const {
    std::uint64_t n = 0;
    for (std::uint8_t v : m) n += v != 0;
    return n;
}

BoolMask build_mask(const PatternSpec& spec, int L) {
    spec.validate();
    if (L < 1) throw std::invalid_argument("build_mask: L must be >= 1");
    BoolMask mask;
    mask.L = L;
    mask.spec = spec;
    mask.m.assign(static_cast<std::size_t>(L) * L, 0);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < L; ++j)
            mask.m[static_cast<std::size_t>(i) * L + j] = mask_entry(spec, i, j) ? 1 : 0;
    return mask;
}

PackedMask pack_mask(const PatternSpec& spec, int L) {
    spec.validate();
    if (L < 1) throw std::invalid_argument("pack_mask: L must be >= 1");
    PackedMask p;
    p.L = L;
    p.spec = spec;
    p.row_ptr.resize(L + 1, 0);
    p.cols.reserve(static_cast<std::size_t>(nnz(spec, L)));
    for (int i = 0; i < L; ++i) {
        p.row_ptr[i] = p.cols.size();
        switch (spec.kind) {
            case PatternKind::Full:
                for (int j = 0; j < L; ++j) p.cols.push_back(j);
                break;
            case PatternKind::Band: {
                const int h = spec.half_window();
                for (int j = std::max(0, i - h); j <= std::min(L - 1, i + h); ++j)
                    p.cols.push_back(j);
                break;
            }
            case PatternKind::Ripple: {
                const int h = spec.half_window();
                // left dilated links j = i - (h + m*d), farthest first
                if (i - h - spec.d >= 0) {
                    for (int m = (i - h) / spec.d; m >= 1; --m)
                        p.cols.push_back(i - h - m * spec.d);
                }
                for (int j = std::max(0, i - h); j <= std::min(L - 1, i + h); ++j)
                    p.cols.push_back(j);
                // right dilated links j = i + (h + m*d)
                for (int m = 1; i + h + m * spec.d <= L - 1; ++m)
                    p.cols.push_back(i + h + m * spec.d);
                break;
            }
            case PatternKind::Blockwise: {
                const int b0 = (i / spec.block) * spec.block;
                for (int j = b0; j < std::min(L, b0 + spec.block); ++j) p.cols.push_back(j);
                break;
            }
        }
    }
    p.row_ptr[L] = p.cols.size();
    return p;
}

namespace {

std::uint64_t nnz_band(int L, int h) {
    const std::uint64_t D = std::min<std::uint64_t>(h, L - 1);
    return static_cast<std::uint64_t>(L) + 2 * (D * L - D * (D + 1) / 2);
}

}  // namespace

std::uint64_t nnz(const PatternSpec& spec, int L) {
    spec.validate();
    if (L < 1) throw std::invalid_argument("nnz: L must be >= 1");
    const std::uint64_t uL = static_cast<std::uint64_t>(L);
    switch (spec.kind) {
        case PatternKind::Full: return uL * uL;
        case PatternKind::Band: return nnz_band(L, spec.half_window());
        case PatternKind::Ripple: {
            const int h = spec.half_window();
            std::uint64_t count = nnz_band(L, h);
            if (L - 1 > h) {
                // offsets h + m*d for m = 1..M, each contributing 2*(L - offset)
                const std::uint64_t M = static_cast<std::uint64_t>((L - 1 - h) / spec.d);
                count += 2 * (M * (uL - h) - static_cast<std::uint64_t>(spec.d) * M * (M + 1) / 2);
            }
            return count;
        }
        case PatternKind::Blockwise: {
            const std::uint64_t q = uL / spec.block;
            const std::uint64_t r = uL % spec.block;
            return q * spec.block * spec.block + r * r;
        }
    }
    return 0;
}

std::vector<PatternSpec> layer_schedule(int num_blocks, const PatternSpec& spec) {
    spec.validate();
    if (num_blocks < 1) throw std::invalid_argument("layer_schedule: need at least one block");
    std::vector<PatternSpec> layers;
    layers.reserve(num_blocks);
    if (spec.kind == PatternKind::Ripple) {
        const int band_layers = num_blocks / 2;
        for (int b = 0; b < num_blocks; ++b)
            layers.push_back(b < band_layers ? PatternSpec::band(spec.w) : spec);
    } else {
        layers.assign(num_blocks, spec);
    }
    return layers;
}

void write_pbm(const BoolMask& mask, std::ostream& out) {
    out << "P1\n" << mask.L << ' ' << mask.L << '\n';
    for (int i = 0; i < mask.L; ++i) {
        for (int j = 0; j < mask.L; ++j) out << (mask.at(i, j) ? '1' : '0');
        out << '\n';
    }
}

void write_row_degrees_csv(const BoolMask& mask, std::ostream& out) {
    out << "row,degree\n";
    for (int i = 0; i < mask.L; ++i) {
        int deg = 0;
        for (int j = 0; j < mask.L; ++j) deg += mask.at(i, j) ? 1 : 0;
        out << i << ',' << deg << '\n';
    }
}

}  // namespace ripple::pattern
