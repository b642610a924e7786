#pragma once

#include <cstdint>

#include "ripple/model.hpp"

namespace ripple::gradcheck {

struct Report {
    double max_rel_error = 0.0;
    std::size_t entries_checked = 0;
};

/// Central-difference check of model::backward against the loss surface:
/// every parameter entry and every input entry is perturbed by +/- step and
/// the numeric slope compared with the analytic gradient. Relative error is
/// |num - ana| / max(|num|, |ana|, 1e-6).
///
/// `corrupt` deliberately biases one analytic gradient entry before the
/// comparison (negative-control hook for the CLI).
Report check_model(const model::ModelConfig& cfg, std::uint64_t seed, double step,
                   bool corrupt = false);

/// The fixed desk-scale configuration used by `ripple gradcheck`:
/// bins=5, d_model=8, heads=2, blocks=2, d_ff=16, ripple(4,3) pattern, L=7.
model::ModelConfig tiny_config();

inline constexpr int kTinySequenceLength = 7;

}  // namespace ripple::gradcheck
