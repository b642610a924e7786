#include "ripple/targets.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace ripple::targets {

std::string objective_name(MaskObjective o) {
    return o == MaskObjective::Irm ? "irm" : "psm";
}

MaskObjective parse_objective(const std::string& name) {
    if (name == "irm" || name == "IRM") return MaskObjective::Irm;
    if (name == "psm" || name == "PSM") return MaskObjective::Psm;
    throw std::invalid_argument("unknown objective: " + name);
}

MaskMatrix irm(const dsp::Spectrogram& clean, const dsp::Spectrogram& noise) {
    if (!clean.same_shape(noise)) throw std::invalid_argument("irm: shape mismatch");
    MaskMatrix m;
    m.objective = MaskObjective::Irm;
    m.values = Matrix(clean.frames, clean.bins);
    for (int l = 0; l < clean.frames; ++l) {
        for (int k = 0; k < clean.bins; ++k) {
            const double ps = std::norm(clean.at(l, k));
            const double pd = std::norm(noise.at(l, k));
            const double denom = ps + pd;
            m.values(l, k) = denom > 0.0 ? std::sqrt(ps / denom) : 0.0;
        }
    }
    return m;
}

MaskMatrix psm(const dsp::Spectrogram& clean, const dsp::Spectrogram& noisy) {
    if (!clean.same_shape(noisy)) throw std::invalid_argument("psm: shape mismatch");
    MaskMatrix m;
    m.objective = MaskObjective::Psm;
    m.values = Matrix(clean.frames, clean.bins);
    for (int l = 0; l < clean.frames; ++l) {
        for (int k = 0; k < clean.bins; ++k) {
            // (|S|/|X|) cos(theta_S - theta_X) == Re(S * conj(X)) / |X|^2
            const double px = std::norm(noisy.at(l, k));
            const double raw =
                px > 0.0 ? (clean.at(l, k) * std::conj(noisy.at(l, k))).real() / px : 0.0;
            m.values(l, k) = std::clamp(raw, 0.0, 1.0);
        }
    }
    return m;
}

dsp::Spectrogram apply_mask(const dsp::Spectrogram& noisy, const Matrix& mask) {
    if (mask.rows() != noisy.frames || mask.cols() != noisy.bins)
        throw std::invalid_argument("apply_mask: shape mismatch");
    dsp::Spectrogram out = noisy;
    for (int l = 0; l < noisy.frames; ++l)
        for (int k = 0; k < noisy.bins; ++k) out.at(l, k) = noisy.at(l, k) * mask(l, k);
    return out;
}

dsp::Spectrogram apply_mask(const dsp::Spectrogram& noisy, const MaskMatrix& mask) {
    return apply_mask(noisy, mask.values);
}

void write_mask_csv(const MaskMatrix& mask, std::ostream& out) {
    for (int l = 0; l < mask.values.rows(); ++l) {
        for (int k = 0; k < mask.values.cols(); ++k) {
            if (k) out << ',';
            out << mask.values(l, k);
        }
        out << '\n';
    }
}

}  // namespace ripple::targets
