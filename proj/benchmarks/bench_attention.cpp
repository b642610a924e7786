#include <benchmark/benchmark.h>

#include "ripple/dsp.hpp"
#include "ripple/glorot.hpp"
#include "ripple/kernel.hpp"
#include "ripple/model.hpp"
#include "ripple/pattern.hpp"
#include "ripple/rng.hpp"

using namespace ripple;

namespace {

constexpr int kDModel = 256;
constexpr int kHeads = 8;

struct Inputs {
    kernel::MhaParams params;
    Matrix q, k, v;

    explicit Inputs(int L) : params(make_params()), q(make(L)), k(make(L)), v(make(L)) {}

    static kernel::MhaParams make_params() {
        Rng rng(1);
        return kernel::MhaParams::init(kDModel, kHeads, rng);
    }
    static Matrix make(int L) {
        static Rng rng(2);
        return glorot_uniform(L, kDModel, rng);
    }
};

}  // namespace

static void BM_AttendDenseFull(benchmark::State& state) {
    const int L = static_cast<int>(state.range(0));
    Inputs in(L);
    const pattern::BoolMask mask = pattern::build_mask(pattern::PatternSpec::full(), L);
    for (auto _ : state) {
        Matrix out = kernel::attend_dense(in.q, in.k, in.v, in.params, mask);
        benchmark::DoNotOptimize(out);
    }
    state.SetComplexityN(L);
}
BENCHMARK(BM_AttendDenseFull)->RangeMultiplier(2)->Range(128, 2048)->Complexity()
    ->Unit(benchmark::kMillisecond);

static void BM_AttendSparseRipple(benchmark::State& state) {
    const int L = static_cast<int>(state.range(0));
    Inputs in(L);
    const pattern::PackedMask mask = pattern::pack_mask(pattern::PatternSpec::ripple(12, 24), L);
    for (auto _ : state) {
        Matrix out = kernel::attend_sparse(in.q, in.k, in.v, in.params, mask);
        benchmark::DoNotOptimize(out);
    }
    state.SetComplexityN(L);
}
BENCHMARK(BM_AttendSparseRipple)->RangeMultiplier(2)->Range(128, 2048)->Complexity()
    ->Unit(benchmark::kMillisecond);

static void BM_AttendSparseBlockwise(benchmark::State& state) {
    const int L = static_cast<int>(state.range(0));
    Inputs in(L);
    const pattern::PackedMask mask = pattern::pack_mask(pattern::PatternSpec::blockwise(50), L);
    for (auto _ : state) {
        Matrix out = kernel::attend_sparse(in.q, in.k, in.v, in.params, mask);
        benchmark::DoNotOptimize(out);
    }
    state.SetComplexityN(L);
}
BENCHMARK(BM_AttendSparseBlockwise)->RangeMultiplier(2)->Range(128, 2048)->Complexity()
    ->Unit(benchmark::kMillisecond);

static void BM_Stft(benchmark::State& state) {
    const int seconds = static_cast<int>(state.range(0));
    dsp::Waveform w;
    Rng rng(3);
    w.samples.resize(static_cast<std::size_t>(seconds) * 16000);
    for (double& v : w.samples) v = 0.3 * rng.gaussian();
    const auto cfg = dsp::StftConfig::make(512, 512);
    for (auto _ : state) {
        auto spec = dsp::stft(w, cfg);
        benchmark::DoNotOptimize(spec);
    }
}
BENCHMARK(BM_Stft)->Arg(1)->Arg(4)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_ModelForward(benchmark::State& state) {
    const int L = static_cast<int>(state.range(0));
    model::ModelConfig cfg;  // paper dims
    cfg.attn_pattern = pattern::PatternSpec::ripple(12, 24);
    const auto params = model::init(cfg, 4);
    Rng rng(5);
    Matrix x(L, cfg.bins);
    for (double& v : x.flat()) v = std::abs(rng.gaussian());
    for (auto _ : state) {
        Matrix y = model::forward(params, x);
        benchmark::DoNotOptimize(y);
    }
    state.SetComplexityN(L);
}
BENCHMARK(BM_ModelForward)->RangeMultiplier(2)->Range(64, 512)->Complexity()
    ->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
