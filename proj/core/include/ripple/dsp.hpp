#pragma once

#include <complex>
#include <utility>
#include <vector>

#include "ripple/matrix.hpp"

namespace ripple::dsp {

struct Waveform {
    std::vector<double> samples;   // nominal range [-1, 1]
    int sample_rate = 16000;       // Hz

    std::size_t size() const { return samples.size(); }
    double duration_s() const { return static_cast<double>(samples.size()) / sample_rate; }
};

/// Analysis/synthesis configuration. The window is the square-root Hann
/// evaluated at half-sample offsets, w[n] = sin(pi*(n+0.5)/N), which is
/// strictly positive and satisfies w[n]^2 + w[n+N/2]^2 = 1 exactly, so the
/// 50%-overlap analysis-synthesis pair reconstructs every sample.
struct StftConfig {
    int fft_size = 512;
    int win_length = 512;
    int hop_length = 256;            // always win_length / 2
    std::vector<double> window;      // length win_length, values in (0, 1)

    static StftConfig make(int fft_size, int win_length);
    void validate() const;
    int bins() const { return fft_size / 2 + 1; }
};

/// One-sided complex time-frequency matrix, L frames x K bins.
struct Spectrogram {
    std::vector<std::complex<double>> data;  // row-major L x K
    int frames = 0;                          // L
    int bins = 0;                            // K = fft_size/2 + 1
    StftConfig config;
    std::size_t origin_length = 0;           // samples before tail padding
    int sample_rate = 16000;

    std::complex<double>& at(int l, int k) { return data[static_cast<std::size_t>(l) * bins + k]; }
    std::complex<double> at(int l, int k) const { return data[static_cast<std::size_t>(l) * bins + k]; }
    bool same_shape(const Spectrogram& o) const { return frames == o.frames && bins == o.bins; }
};

/// Frame count for a signal of `samples` length: tail-only zero padding,
/// frame l covers [l*hop, l*hop + win).
int frame_count(std::size_t samples, const StftConfig& cfg);

Spectrogram stft(const Waveform& w, const StftConfig& cfg);
Waveform istft(const Spectrogram& spec);

/// |X| as an L x K matrix.
Matrix magnitude(const Spectrogram& spec);

/// Scales (the leading segment of) `noise` so that
/// 10*log10(P_clean / P_noise) == snr_db, and returns (clean + scaled, scaled).
std::pair<Waveform, Waveform> mix_at_snr(const Waveform& clean, const Waveform& noise,
                                         double snr_db);

/// Mean squared sample value.
double power(const Waveform& w);

/// 10*log10(P_ref / P_(x - ref)) over the common length.
double snr_db(const Waveform& ref, const Waveform& x);

}  // namespace ripple::dsp
