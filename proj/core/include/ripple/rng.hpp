#pragma once

#include <cstdint>
#include <random>

namespace ripple {

/// Deterministic random source. mt19937_64 output is standardized, and the
/// value derivations below avoid std::*_distribution (whose results are
/// implementation-defined), so identical seeds give identical streams on
/// every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    /// Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi], inclusive.
    int uniform_int(int lo, int hi) {
        const int n = hi - lo + 1;
        int k = static_cast<int>(uniform() * n);
        if (k >= n) k = n - 1;
        return lo + k;
    }

    /// Standard normal via Box-Muller.
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Independent substream; splitmix64 finalizer on (seed-stream ^ stream).
    Rng fork(std::uint64_t stream) {
        std::uint64_t z = gen_() ^ (stream + 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace ripple
