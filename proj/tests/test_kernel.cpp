#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "doctest.h"
#include "ripple/errors.hpp"
#include "ripple/kernel.hpp"
#include "ripple/pattern.hpp"
#include "test_util.hpp"

using namespace ripple;
using kernel::AttentionCache;
using kernel::MacCounter;
using kernel::MhaParams;
using pattern::PatternSpec;
using testutil::max_abs_diff;
using testutil::random_matrix;

namespace {

// test-only reference: plain softmax attention with no masking logic at all
Matrix attend_unmasked(const Matrix& q, const Matrix& k, const Matrix& v, const MhaParams& p) {
    const int L = q.rows();
    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(p.d_k));
    Matrix concat(L, p.d_model);
    for (int h = 0; h < p.heads; ++h) {
        const Matrix qh = matmul(q, p.wq[h]);
        const Matrix kh = matmul(k, p.wk[h]);
        const Matrix vh = matmul(v, p.wv[h]);
        Matrix scores = matmul_bt(qh, kh);
        for (double& s : scores.flat()) s *= inv_scale;
        Matrix weights(L, L);
        for (int i = 0; i < L; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < L; ++j) mx = std::max(mx, scores(i, j));
            double denom = 0.0;
            for (int j = 0; j < L; ++j) denom += std::exp(scores(i, j) - mx);
            for (int j = 0; j < L; ++j) weights(i, j) = std::exp(scores(i, j) - mx) / denom;
        }
        const Matrix ctx = matmul(weights, vh);
        for (int i = 0; i < L; ++i)
            for (int c = 0; c < p.d_k; ++c) concat(i, h * p.d_k + c) = ctx(i, c);
    }
    return matmul(concat, p.wo);
}

struct Fixture {
    Rng rng{99};
    MhaParams params;
    Matrix q, k, v;

    Fixture(int L, int d_model, int heads)
        : params(MhaParams::init(d_model, heads, rng)),
          q(random_matrix(L, d_model, rng)),
          k(random_matrix(L, d_model, rng)),
          v(random_matrix(L, d_model, rng)) {}
};

}  // namespace

TEST_CASE("L=1: softmax of a single score is 1, output is V through the projections") {
    Fixture f(1, 8, 2);
    const Matrix out =
        kernel::attend_sparse(f.q, f.k, f.v, f.params, PatternSpec::full());
    // expected: concat(Vh_1..Vh_h) * Wo, since the only attention weight is 1
    Matrix concat(1, 8);
    for (int h = 0; h < 2; ++h) {
        const Matrix vh = matmul(f.v, f.params.wv[h]);
        for (int c = 0; c < 4; ++c) concat(0, h * 4 + c) = vh(0, c);
    }
    const Matrix expected = matmul(concat, f.params.wo);
    CHECK(max_abs_diff(out, expected) < 1e-12);
}

TEST_CASE("zero queries give the masked average of value rows") {
    const int L = 6, d_model = 8, heads = 2;
    Fixture f(L, d_model, heads);
    const Matrix zero_q(L, d_model, 0.0);
    const PatternSpec spec = PatternSpec::band(2);

    AttentionCache cache;
    kernel::attend_sparse(zero_q, f.k, f.v, f.params, spec, &cache);
    const pattern::PackedMask pm = pattern::pack_mask(spec, L);
    for (int h = 0; h < heads; ++h) {
        const Matrix vh = matmul(f.v, f.params.wv[h]);
        for (int i = 0; i < L; ++i) {
            const std::size_t lo = pm.row_begin(i), hi = pm.row_end(i);
            const double deg = static_cast<double>(hi - lo);
            // uniform weights over the row's unmasked columns
            for (std::size_t idx = lo; idx < hi; ++idx)
                CHECK(cache.sparse_weights[h][idx] == doctest::Approx(1.0 / deg).epsilon(1e-12));
        }
    }
}

TEST_CASE("all-true mask equals the unmasked reference bit-for-bit scale") {
    Fixture f(10, 16, 4);
    const Matrix direct = attend_unmasked(f.q, f.k, f.v, f.params);
    const Matrix dense = kernel::attend_dense(f.q, f.k, f.v, f.params,
                                              pattern::build_mask(PatternSpec::full(), 10));
    const Matrix sparse = kernel::attend_sparse(f.q, f.k, f.v, f.params, PatternSpec::full());
    CHECK(max_abs_diff(direct, dense) < 1e-12);
    CHECK(max_abs_diff(direct, sparse) < 1e-12);
}

TEST_CASE("sparse equals dense for every pattern kind and length") {
    Rng rng(17);
    const int d_model = 16, heads = 4;
    MhaParams params = MhaParams::init(d_model, heads, rng);
    const std::vector<PatternSpec> specs = {PatternSpec::full(), PatternSpec::band(4),
                                            PatternSpec::ripple(4, 3), PatternSpec::ripple(12, 16),
                                            PatternSpec::blockwise(7)};
    for (int L : {1, 2, 7, 32, 100}) {
        const Matrix q = random_matrix(L, d_model, rng);
        const Matrix k = random_matrix(L, d_model, rng);
        const Matrix v = random_matrix(L, d_model, rng);
        for (const PatternSpec& spec : specs) {
            const Matrix dense =
                kernel::attend_dense(q, k, v, params, pattern::build_mask(spec, L));
            const Matrix sparse = kernel::attend_sparse(q, k, v, params, spec);
            REQUIRE(max_abs_diff(dense, sparse) < 1e-9);
        }
    }
}

TEST_CASE("instrumented multiply counts match nnz * d_model") {
    Rng rng(23);
    const int d_model = 16, heads = 4, L = 40;
    MhaParams params = MhaParams::init(d_model, heads, rng);
    const Matrix q = random_matrix(L, d_model, rng);
    const Matrix k = random_matrix(L, d_model, rng);
    const Matrix v = random_matrix(L, d_model, rng);
    for (const PatternSpec& spec : {PatternSpec::ripple(4, 3), PatternSpec::band(6),
                                    PatternSpec::blockwise(9), PatternSpec::full()}) {
        MacCounter macs;
        kernel::attend_sparse(q, k, v, params, spec, nullptr, &macs);
        const std::uint64_t nnz = pattern::nnz(spec, L);
        CHECK(macs.scores == nnz * d_model);
        CHECK(macs.context == nnz * d_model);
        CHECK(macs.projections == 4ull * L * d_model * d_model);
    }
    // dense computes every pair regardless of the mask
    MacCounter dense_macs;
    kernel::attend_dense(q, k, v, params, pattern::build_mask(PatternSpec::ripple(4, 3), L),
                         nullptr, &dense_macs);
    CHECK(dense_macs.scores == static_cast<std::uint64_t>(L) * L * d_model);
}

TEST_CASE("attention weights are row-stochastic per head") {
    Fixture f(30, 16, 4);
    AttentionCache cache;
    kernel::attend_sparse(f.q, f.k, f.v, f.params, PatternSpec::ripple(6, 4), &cache);
    const pattern::PackedMask pm = pattern::pack_mask(PatternSpec::ripple(6, 4), 30);
    for (int h = 0; h < 4; ++h) {
        for (int i = 0; i < 30; ++i) {
            double sum = 0.0;
            for (std::size_t idx = pm.row_begin(i); idx < pm.row_end(i); ++idx)
                sum += cache.sparse_weights[h][idx];
            CHECK(std::abs(sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("masked columns are invisible: perturbing them changes nothing, bitwise") {
    const int L = 24, d_model = 16;
    Fixture f(L, d_model, 4);
    const PatternSpec spec = PatternSpec::band(4);
    const Matrix base = kernel::attend_sparse(f.q, f.k, f.v, f.params, spec);

    // row 0 attends to columns {0, 1, 2}; poke K and V far outside that set
    Matrix k2 = f.k, v2 = f.v;
    for (int j = 10; j < L; ++j)
        for (int c = 0; c < d_model; ++c) {
            k2(j, c) += 3.0;
            v2(j, c) -= 5.0;
        }
    const Matrix poked = kernel::attend_sparse(f.q, k2, v2, f.params, spec);
    for (int c = 0; c < d_model; ++c) CHECK(poked(0, c) == base(0, c));
}

TEST_CASE("permutation equivariance under the full mask") {
    const int L = 12, d_model = 16;
    Fixture f(L, d_model, 4);
    std::vector<int> perm(L);
    std::iota(perm.begin(), perm.end(), 0);
    Rng shuffle_rng(31);
    for (int i = L - 1; i > 0; --i) std::swap(perm[i], perm[shuffle_rng.uniform_int(0, i)]);

    Matrix qp(L, d_model), kp(L, d_model), vp(L, d_model);
    for (int i = 0; i < L; ++i)
        for (int c = 0; c < d_model; ++c) {
            qp(i, c) = f.q(perm[i], c);
            kp(i, c) = f.k(perm[i], c);
            vp(i, c) = f.v(perm[i], c);
        }
    const Matrix base = kernel::attend_sparse(f.q, f.k, f.v, f.params, PatternSpec::full());
    const Matrix permuted = kernel::attend_sparse(qp, kp, vp, f.params, PatternSpec::full());
    for (int i = 0; i < L; ++i)
        for (int c = 0; c < d_model; ++c)
            CHECK(permuted(i, c) == doctest::Approx(base(perm[i], c)).epsilon(1e-12));
}

TEST_CASE("error paths: empty mask row, non-finite input, missing cache") {
    Fixture f(4, 8, 2);
    pattern::BoolMask mask = pattern::build_mask(PatternSpec::full(), 4);
    for (int j = 0; j < 4; ++j) mask.m[2 * 4 + j] = 0;  // row 2 all false
    CHECK_THROWS_AS(kernel::attend_dense(f.q, f.k, f.v, f.params, mask), std::invalid_argument);

    Matrix bad = f.q;
    bad(1, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(kernel::attend_sparse(bad, f.k, f.v, f.params, PatternSpec::full()),
                    NumericalError);

    AttentionCache cache;  // never filled
    CHECK_THROWS_AS(kernel::attend_backward(f.params, cache, Matrix(4, 8)), std::logic_error);
}

TEST_CASE("zero upstream gradient zeroes every gradient") {
    Fixture f(9, 8, 2);
    AttentionCache cache;
    kernel::attend_sparse(f.q, f.k, f.v, f.params, PatternSpec::ripple(4, 3), &cache);
    const kernel::MhaGrads g = kernel::attend_backward(f.params, cache, Matrix(9, 8, 0.0));
    CHECK(testutil::max_abs(g.q) == 0.0);
    CHECK(testutil::max_abs(g.k) == 0.0);
    CHECK(testutil::max_abs(g.v) == 0.0);
    CHECK(testutil::max_abs(g.wo) == 0.0);
    for (int h = 0; h < 2; ++h) {
        CHECK(testutil::max_abs(g.wq[h]) == 0.0);
        CHECK(testutil::max_abs(g.wk[h]) == 0.0);
        CHECK(testutil::max_abs(g.wv[h]) == 0.0);
    }
}

TEST_CASE("sparse backward equals dense backward on ripple(4,3), L=16") {
    const int L = 16, d_model = 8, heads = 2;
    Fixture f(L, d_model, heads);
    const PatternSpec spec = PatternSpec::ripple(4, 3);
    Rng up_rng(41);
    const Matrix upstream = random_matrix(L, d_model, up_rng);

    AttentionCache sparse_cache, dense_cache;
    kernel::attend_sparse(f.q, f.k, f.v, f.params, spec, &sparse_cache);
    kernel::attend_dense(f.q, f.k, f.v, f.params, pattern::build_mask(spec, L), &dense_cache);
    const auto gs = kernel::attend_backward(f.params, sparse_cache, upstream);
    const auto gd = kernel::attend_backward(f.params, dense_cache, upstream);

    CHECK(max_abs_diff(gs.q, gd.q) < 1e-8);
    CHECK(max_abs_diff(gs.k, gd.k) < 1e-8);
    CHECK(max_abs_diff(gs.v, gd.v) < 1e-8);
    CHECK(max_abs_diff(gs.wo, gd.wo) < 1e-8);
    for (int h = 0; h < heads; ++h) {
        CHECK(max_abs_diff(gs.wq[h], gd.wq[h]) < 1e-8);
        CHECK(max_abs_diff(gs.wk[h], gd.wk[h]) < 1e-8);
        CHECK(max_abs_diff(gs.wv[h], gd.wv[h]) < 1e-8);
    }
}

TEST_CASE("finite differences confirm the analytic gradients (L=6, d_model=8, h=2)") {
    const int L = 6, d_model = 8, heads = 2;
    Fixture f(L, d_model, heads);
    const PatternSpec spec = PatternSpec::ripple(4, 3);
    Rng up_rng(53);
    const Matrix weight = random_matrix(L, d_model, up_rng);  // loss = sum(out .* weight)

    auto loss_of = [&](const Matrix& q, const Matrix& k, const Matrix& v, const MhaParams& p) {
        const Matrix out = kernel::attend_sparse(q, k, v, p, spec);
        double s = 0.0;
        for (int i = 0; i < L; ++i)
            for (int c = 0; c < d_model; ++c) s += out(i, c) * weight(i, c);
        return s;
    };

    AttentionCache cache;
    kernel::attend_sparse(f.q, f.k, f.v, f.params, spec, &cache);
    const auto g = kernel::attend_backward(f.params, cache, weight);

    const double step = 1e-5;
    double max_rel = 0.0;
    auto check_entry = [&](double* slot, double analytic) {
        const double saved = *slot;
        *slot = saved + step;
        const double up = loss_of(f.q, f.k, f.v, f.params);
        *slot = saved - step;
        const double down = loss_of(f.q, f.k, f.v, f.params);
        *slot = saved;
        const double num = (up - down) / (2.0 * step);
        max_rel = std::max(max_rel,
                           std::abs(num - analytic) /
                               std::max({std::abs(num), std::abs(analytic), 1e-6}));
    };

    for (int i = 0; i < L; ++i)
        for (int c = 0; c < d_model; ++c) {
            check_entry(&f.q(i, c), g.q(i, c));
            check_entry(&f.k(i, c), g.k(i, c));
            check_entry(&f.v(i, c), g.v(i, c));
        }
    for (int h = 0; h < heads; ++h)
        for (int r = 0; r < d_model; ++r)
            for (int c = 0; c < f.params.d_k; ++c) {
                check_entry(&f.params.wq[h](r, c), g.wq[h](r, c));
                check_entry(&f.params.wk[h](r, c), g.wk[h](r, c));
                check_entry(&f.params.wv[h](r, c), g.wv[h](r, c));
            }
    for (int r = 0; r < d_model; ++r)
        for (int c = 0; c < d_model; ++c) check_entry(&f.params.wo(r, c), g.wo(r, c));

    CHECK(max_rel <= 1e-5);
}

TEST_CASE("band window >= 2(L-1) matches full attention exactly") {
    const int L = 9;
    Fixture f(L, 8, 2);
    const Matrix full = kernel::attend_sparse(f.q, f.k, f.v, f.params, PatternSpec::full());
    const Matrix band = kernel::attend_sparse(f.q, f.k, f.v, f.params, PatternSpec::band(16));
    CHECK(max_abs_diff(full, band) == 0.0);
}
