#pragma once

#include <iosfwd>
#include <string>

#include "ripple/dsp.hpp"
#include "ripple/matrix.hpp"

namespace ripple::targets {

enum class MaskObjective { Irm, Psm };

std::string objective_name(MaskObjective o);
MaskObjective parse_objective(const std::string& name);

/// L x K mask in [0, 1].
struct MaskMatrix {
    Matrix values;
    MaskObjective objective = MaskObjective::Irm;
};

/// Ideal ratio mask: sqrt(|S|^2 / (|S|^2 + |D|^2)); bins where both clean and
/// noise are exactly zero get 0.
MaskMatrix irm(const dsp::Spectrogram& clean, const dsp::Spectrogram& noise);

/// Phase-sensitive mask: (|S|/|X|) * cos(theta_S - theta_X), clamped to [0, 1].
MaskMatrix psm(const dsp::Spectrogram& clean, const dsp::Spectrogram& noisy);

/// Entrywise complex scaling of the noisy spectrum; phase is untouched.
dsp::Spectrogram apply_mask(const dsp::Spectrogram& noisy, const MaskMatrix& mask);
dsp::Spectrogram apply_mask(const dsp::Spectrogram& noisy, const Matrix& mask);

/// One CSV line per frame.
void write_mask_csv(const MaskMatrix& mask, std::ostream& out);

}  // namespace ripple::targets
