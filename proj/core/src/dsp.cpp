#include "ripple/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "ripple/errors.hpp"

namespace ripple::dsp {

namespace {

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

// In-place iterative radix-2 Cooley-Tukey. inverse=true omits the 1/N scale
// (callers that need it divide themselves).
void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
    const int n = static_cast<int>(a.size());
    for (int i = 1, j = 0; i < n; ++i) {
        int bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (int len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * std::numbers::pi / len * (inverse ? 1.0 : -1.0);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (int i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (int k = 0; k < len / 2; ++k) {
                const std::complex<double> u = a[i + k];
                const std::complex<double> v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// O(N^2) fallback for non-power-of-two sizes.
void dft_naive(std::vector<std::complex<double>>& a, bool inverse) {
    const int n = static_cast<int>(a.size());
    std::vector<std::complex<double>> out(n);
    const double sign = inverse ? 1.0 : -1.0;
    for (int k = 0; k < n; ++k) {
        std::complex<double> s(0.0, 0.0);
        for (int t = 0; t < n; ++t) {
            const double ang = sign * 2.0 * std::numbers::pi * k * t / n;
            s += a[t] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
        out[k] = s;
    }
    a = std::move(out);
}

void fft(std::vector<std::complex<double>>& a, bool inverse) {
    if (is_pow2(static_cast<int>(a.size())))
        fft_radix2(a, inverse);
    else
        dft_naive(a, inverse);
}

}  // namespace

StftConfig StftConfig::make(int fft_size, int win_length) {
    StftConfig cfg;
    cfg.fft_size = fft_size;
    cfg.win_length = win_length;
    cfg.hop_length = win_length / 2;
    cfg.window.resize(win_length);
    for (int n = 0; n < win_length; ++n)
        cfg.window[n] = std::sin(std::numbers::pi * (n + 0.5) / win_length);
    cfg.validate();
    return cfg;
}

void StftConfig::validate() const {
    if (fft_size < 2) throw std::invalid_argument("StftConfig: fft_size < 2");
    if (win_length < 2 || win_length % 2 != 0)
        throw std::invalid_argument("StftConfig: win_length must be even and >= 2");
    if (win_length > fft_size)
        throw std::invalid_argument("StftConfig: win_length > fft_size");
    if (hop_length * 2 != win_length)
        throw std::invalid_argument("StftConfig: hop_length must be win_length/2");
    if (static_cast<int>(window.size()) != win_length)
        throw std::invalid_argument("StftConfig: window length mismatch");
    for (double v : window)
        if (!(v >= 0.0 && v <= 1.0))
            throw std::invalid_argument("StftConfig: window weights must lie in [0,1]");
}

int frame_count(std::size_t samples, const StftConfig& cfg) {
    if (samples < static_cast<std::size_t>(cfg.win_length)) return 0;
    const std::size_t extra = samples - cfg.win_length;
    // ceil(extra / hop) + 1 frames cover [0, samples) with tail padding
    return static_cast<int>((extra + cfg.hop_length - 1) / cfg.hop_length) + 1;
}

Spectrogram stft(const Waveform& w, const StftConfig& cfg) {
    cfg.validate();
    if (w.samples.size() < static_cast<std::size_t>(cfg.win_length))
        throw std::invalid_argument("stft: input too short (need at least one window)");
    for (double v : w.samples)
        if (!std::isfinite(v)) throw NumericalError("stft: non-finite sample in input");

    const int L = frame_count(w.samples.size(), cfg);
    const int K = cfg.bins();

    Spectrogram spec;
    spec.frames = L;
    spec.bins = K;
    spec.config = cfg;
    spec.origin_length = w.samples.size();
    spec.sample_rate = w.sample_rate;
    spec.data.resize(static_cast<std::size_t>(L) * K);

    std::vector<std::complex<double>> buf(cfg.fft_size);
    for (int l = 0; l < L; ++l) {
        const std::size_t start = static_cast<std::size_t>(l) * cfg.hop_length;
        for (int n = 0; n < cfg.fft_size; ++n) {
            const std::size_t t = start + n;
            const double x =
                (n < cfg.win_length && t < w.samples.size()) ? w.samples[t] * cfg.window[n] : 0.0;
            buf[n] = {x, 0.0};
        }
        fft(buf, /*inverse=*/false);
        for (int k = 0; k < K; ++k) spec.at(l, k) = buf[k];
    }
    return spec;
}

Waveform istft(const Spectrogram& spec) {
    spec.config.validate();
    if (spec.frames < 1) throw std::invalid_argument("istft: empty spectrogram");
    if (spec.bins != spec.config.bins())
        throw std::invalid_argument("istft: bin count does not match config");
    if (spec.data.size() != static_cast<std::size_t>(spec.frames) * spec.bins)
        throw std::invalid_argument("istft: frame/shape mismatch");
    if (spec.origin_length < static_cast<std::size_t>(spec.config.win_length) ||
        frame_count(spec.origin_length, spec.config) != spec.frames)
        throw std::invalid_argument("istft: origin_length inconsistent with frame count");

    const StftConfig& cfg = spec.config;
    const int N = cfg.fft_size;
    const int K = spec.bins;
    const std::size_t padded =
        static_cast<std::size_t>(spec.frames - 1) * cfg.hop_length + cfg.win_length;

    std::vector<double> acc(padded, 0.0);
    std::vector<double> wsum(padded, 0.0);
    std::vector<std::complex<double>> buf(N);

    for (int l = 0; l < spec.frames; ++l) {
        // Hermitian expansion of the one-sided spectrum.
        for (int k = 0; k < K; ++k) buf[k] = spec.at(l, k);
        for (int k = K; k < N; ++k) buf[k] = std::conj(spec.at(l, N - k));
        fft(buf, /*inverse=*/true);
        const std::size_t start = static_cast<std::size_t>(l) * cfg.hop_length;
        for (int n = 0; n < cfg.win_length; ++n) {
            acc[start + n] += (buf[n].real() / N) * cfg.window[n];
            wsum[start + n] += cfg.window[n] * cfg.window[n];
        }
    }
    // Mid-signal wsum is exactly 1 (w[n]^2 + w[n+hop]^2 = 1); the division only
    // rescales the partially-overlapped head and tail.
    Waveform out;
    out.sample_rate = spec.sample_rate;
    out.samples.resize(spec.origin_length);
    for (std::size_t t = 0; t < spec.origin_length; ++t)
        out.samples[t] = wsum[t] > 0.0 ? acc[t] / wsum[t] : 0.0;
    return out;
}

Matrix magnitude(const Spectrogram& spec) {
    Matrix m(spec.frames, spec.bins);
    for (int l = 0; l < spec.frames; ++l)
        for (int k = 0; k < spec.bins; ++k) m(l, k) = std::abs(spec.at(l, k));
    return m;
}

double power(const Waveform& w) {
    if (w.samples.empty()) return 0.0;
    double s = 0.0;
    for (double v : w.samples) s += v * v;
    return s / static_cast<double>(w.samples.size());
}

std::pair<Waveform, Waveform> mix_at_snr(const Waveform& clean, const Waveform& noise,
                                         double snr_db) {
    if (clean.sample_rate != noise.sample_rate)
        throw std::invalid_argument("mix_at_snr: sample rates differ");
    if (noise.samples.size() < clean.samples.size())
        throw std::invalid_argument("mix_at_snr: noise shorter than clean");

    Waveform seg;
    seg.sample_rate = noise.sample_rate;
    seg.samples.assign(noise.samples.begin(),
                       noise.samples.begin() + static_cast<std::ptrdiff_t>(clean.samples.size()));

    const double p_clean = power(clean);
    const double p_noise = power(seg);
    if (p_clean <= 0.0) throw std::invalid_argument("mix_at_snr: zero power in clean signal");
    if (p_noise <= 0.0) throw std::invalid_argument("mix_at_snr: zero power in noise segment");

    const double scale = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
    Waveform scaled = seg;
    for (double& v : scaled.samples) v *= scale;

    Waveform noisy = clean;
    for (std::size_t i = 0; i < noisy.samples.size(); ++i) noisy.samples[i] += scaled.samples[i];
    return {std::move(noisy), std::move(scaled)};
}

double snr_db(const Waveform& ref, const Waveform& x) {
    const std::size_t n = std::min(ref.samples.size(), x.samples.size());
    double p_ref = 0.0, p_err = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        p_ref += ref.samples[i] * ref.samples[i];
        const double e = x.samples[i] - ref.samples[i];
        p_err += e * e;
    }
    if (p_err <= 0.0) throw std::invalid_argument("snr_db: zero error power");
    return 10.0 * std::log10(p_ref / p_err);
}

}  // namespace ripple::dsp
