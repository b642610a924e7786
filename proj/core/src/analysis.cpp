#include "ripple/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <ostream>
#include <stdexcept>

#include "ripple/glorot.hpp"
#include "ripple/kernel.hpp"
#include "ripple/rng.hpp"

#ifdef __linux__
#include <sched.h>
#endif

namespace ripple::analysis {

void SepformerSpec::validate() const {
    if (chunk < 1) throw std::invalid_argument("SepformerSpec: chunk must be >= 1");
}

std::string spec_id(const MacSpec& spec) {
    if (const auto* p = std::get_if<pattern::PatternSpec>(&spec)) return p->id();
    return std::get<SepformerSpec>(spec).id();
}

namespace {

struct LayerTerms {
    std::uint64_t scores = 0, context = 0, projections = 0, ffn = 0;
};

LayerTerms attention_layer_terms(std::uint64_t nnz, std::uint64_t eff_len,
                                 const model::ModelConfig& cfg) {
    const std::uint64_t d = cfg.d_model;
    LayerTerms t;
    t.scores = nnz * d;
    t.context = nnz * d;
    t.projections = 4ull * eff_len * d * d;
    t.ffn = 2ull * eff_len * d * cfg.d_ff;
    return t;
}

}  // namespace

MacReport macs_attention(const MacSpec& spec, int L, const model::ModelConfig& cfg) {
    cfg.validate();
    if (L < 1) throw std::invalid_argument("macs_attention: L must be >= 1");

    MacReport r;
    r.pattern_id = spec_id(spec);
    r.length = L;

    if (const auto* p = std::get_if<pattern::PatternSpec>(&spec)) {
        // band-only lower layers of a Ripple config use the cheaper band nnz
        for (const pattern::PatternSpec& layer : pattern::layer_schedule(cfg.blocks, *p)) {
            const LayerTerms t = attention_layer_terms(pattern::nnz(layer, L),
                                                       static_cast<std::uint64_t>(L), cfg);
            r.scores += t.scores;
            r.context += t.context;
            r.projections += t.projections;
            r.ffn += t.ffn;
        }
    } else {
        const SepformerSpec& sf = std::get<SepformerSpec>(spec);
        sf.validate();
        const std::uint64_t C = static_cast<std::uint64_t>(sf.chunk);
        const std::uint64_t S =
            std::max<std::uint64_t>(1, (2ull * L + C - 1) / C - 1);  // ceil(2L/C) - 1
        const std::uint64_t eff = S * C;
        const int intra_layers = cfg.blocks - cfg.blocks / 2;
        for (int b = 0; b < cfg.blocks; ++b) {
            const std::uint64_t nnz = b < intra_layers ? S * C * C : C * S * S;
            const LayerTerms t = attention_layer_terms(nnz, eff, cfg);
            r.scores += t.scores;
            r.context += t.context;
            r.projections += t.projections;
            r.ffn += t.ffn;
        }
    }
    r.total = r.scores + r.context + r.projections + r.ffn;
    return r;
}

std::vector<MacReport> macs_sweep(const std::vector<MacSpec>& specs,
                                  const std::vector<int>& lengths,
                                  const model::ModelConfig& cfg) {
    if (specs.empty() || lengths.empty())
        throw std::invalid_argument("macs_sweep: empty spec or length list");
    std::vector<int> sorted_lengths = lengths;
    std::sort(sorted_lengths.begin(), sorted_lengths.end());
    std::vector<MacReport> out;
    out.reserve(specs.size() * sorted_lengths.size());
    for (const MacSpec& s : specs)
        for (int L : sorted_lengths) out.push_back(macs_attention(s, L, cfg));
    return out;
}

void write_macs_csv(const std::vector<MacReport>& reports, std::ostream& out) {
    out << "pattern,L,macs_scores,macs_context,macs_proj,macs_ffn,macs_total\n";
    for (const MacReport& r : reports)
        out << r.pattern_id << ',' << r.length << ',' << r.scores << ',' << r.context << ','
            << r.projections << ',' << r.ffn << ',' << r.total << '\n';
}

namespace {

#ifdef __linux__
class CpuPin {
public:
    CpuPin() {
        if (sched_getaffinity(0, sizeof(saved_), &saved_) == 0) {
            cpu_set_t one;
            CPU_ZERO(&one);
            for (int c = 0; c < CPU_SETSIZE; ++c)
                if (CPU_ISSET(c, &saved_)) {
                    CPU_SET(c, &one);
                    break;
                }
            pinned_ = sched_setaffinity(0, sizeof(one), &one) == 0;
        }
    }
    ~CpuPin() {
        if (pinned_) sched_setaffinity(0, sizeof(saved_), &saved_);
    }

private:
    cpu_set_t saved_{};
    bool pinned_ = false;
};
#else
struct CpuPin {};
#endif

double median(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

}  // namespace

std::vector<BenchRow> bench_kernels(const pattern::PatternSpec& spec,
                                    const std::vector<int>& lengths,
                                    const model::ModelConfig& cfg, int repetitions) {
    cfg.validate();
    spec.validate();
    if (repetitions < 3) throw std::invalid_argument("bench_kernels: repetitions must be >= 3");
    if (lengths.empty()) throw std::invalid_argument("bench_kernels: empty length list");

    CpuPin pin;
    Rng rng(421);
    kernel::MhaParams params = kernel::MhaParams::init(cfg.d_model, cfg.heads, rng);

    std::vector<BenchRow> rows;
    volatile double sink = 0.0;  // keeps the calls observable
    for (int L : lengths) {
        Matrix q = glorot_uniform(L, cfg.d_model, rng);
        Matrix k = glorot_uniform(L, cfg.d_model, rng);
        Matrix v = glorot_uniform(L, cfg.d_model, rng);
        const pattern::BoolMask full = pattern::build_mask(pattern::PatternSpec::full(), L);
        const pattern::PackedMask packed = pattern::pack_mask(spec, L);

        auto time_call = [&](auto&& fn) {
            sink = sink + fn()(0, 0);  // warm-up, excluded from the stats
            std::vector<double> ns(repetitions);
            for (int r = 0; r < repetitions; ++r) {
                const auto t0 = std::chrono::steady_clock::now();
                Matrix out = fn();
                const auto t1 = std::chrono::steady_clock::now();
                sink = sink + out(0, 0);
                ns[r] = std::chrono::duration<double, std::nano>(t1 - t0).count();
            }
            return median(std::move(ns));
        };

        const double dense_ns =
            time_call([&] { return kernel::attend_dense(q, k, v, params, full); });
        const double sparse_ns =
            time_call([&] { return kernel::attend_sparse(q, k, v, params, packed); });
        rows.push_back({"dense_full", L, dense_ns});
        rows.push_back({"sparse_" + spec.id(), L, sparse_ns});
    }
    (void)sink;
    return rows;
}

void write_bench_csv(const std::vector<BenchRow>& rows, std::ostream& out) {
    out << "pattern,L,median_ns\n";
    for (const BenchRow& r : rows) out << r.pattern_id << ',' << r.length << ',' << r.median_ns << '\n';
}

}  // namespace ripple::analysis
