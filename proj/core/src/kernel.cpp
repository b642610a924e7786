#include "ripple/kernel.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ripple/errors.hpp"
#include "ripple/glorot.hpp"

namespace ripple::kernel {

namespace {

void check_inputs(const Matrix& q, const Matrix& k, const Matrix& v, const MhaParams& p) {
    p.validate();
    if (q.cols() != p.d_model || k.cols() != p.d_model || v.cols() != p.d_model)
        throw std::invalid_argument("attend: input width must equal d_model");
    if (q.rows() != k.rows() || q.rows() != v.rows())
        throw std::invalid_argument("attend: Q/K/V row counts differ");
    if (q.rows() < 1) throw std::invalid_argument("attend: empty sequence");
    if (!q.all_finite() || !k.all_finite() || !v.all_finite())
        throw NumericalError("attend: non-finite input");
}

std::uint64_t proj_macs(int L, const MhaParams& p) {
    // 3 per-head projections plus the output projection: 4 * L * d_model^2.
    return 4ull * L * p.d_model * p.d_model;
}

}  // namespace

MhaParams MhaParams::init(int d_model, int heads, Rng& rng) {
    if (heads < 1 || d_model < 1 || d_model % heads != 0)
        throw std::invalid_argument("MhaParams: heads must divide d_model");
    MhaParams p;
    p.d_model = d_model;
    p.heads = heads;
    p.d_k = d_model / heads;
    for (int i = 0; i < heads; ++i) {
        p.wq.push_back(glorot_uniform(d_model, p.d_k, rng));
        p.wk.push_back(glorot_uniform(d_model, p.d_k, rng));
        p.wv.push_back(glorot_uniform(d_model, p.d_k, rng));
    }
    p.wo = glorot_uniform(d_model, d_model, rng);
    return p;
}

void MhaParams::validate() const {
    if (heads < 1 || d_model < 1 || d_model % heads != 0 || d_k != d_model / heads)
        throw std::invalid_argument("MhaParams: inconsistent head geometry");
    if (static_cast<int>(wq.size()) != heads || static_cast<int>(wk.size()) != heads ||
        static_cast<int>(wv.size()) != heads)
        throw std::invalid_argument("MhaParams: per-head weight count mismatch");
    for (int i = 0; i < heads; ++i) {
        if (wq[i].rows() != d_model || wq[i].cols() != d_k || wk[i].rows() != d_model ||
            wk[i].cols() != d_k || wv[i].rows() != d_model || wv[i].cols() != d_k)
            throw std::invalid_argument("MhaParams: head weight shape mismatch");
    }
    if (wo.rows() != d_model || wo.cols() != d_model)
        throw std::invalid_argument("MhaParams: output weight shape mismatch");
}

Matrix attend_dense(const Matrix& q, const Matrix& k, const Matrix& v, const MhaParams& params,
                    const pattern::BoolMask& mask, AttentionCache* cache, MacCounter* macs) {
    check_inputs(q, k, v, params);
    const int L = q.rows();
    if (mask.L != L) throw std::invalid_argument("attend_dense: mask size != sequence length");
    for (int i = 0; i < L; ++i) {
        bool any = false;
        for (int j = 0; j < L && !any; ++j) any = mask.at(i, j);
        if (!any) throw std::invalid_argument("attend_dense: mask row with no true entry");
    }

    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(params.d_k));
    Matrix concat(L, params.d_model);
    if (cache) {
        *cache = AttentionCache{};
        cache->is_sparse = false;
        cache->q_in = q;
        cache->k_in = k;
        cache->v_in = v;
        cache->mask = mask;
    }

    for (int h = 0; h < params.heads; ++h) {
        Matrix qh = matmul(q, params.wq[h]);
        Matrix kh = matmul(k, params.wk[h]);
        Matrix vh = matmul(v, params.wv[h]);

        // All L^2 scores are computed; that is the dense kernel's cost.
        Matrix scores = matmul_bt(qh, kh);
        for (double& s : scores.flat()) s *= inv_scale;
        if (macs) {
            macs->projections += 3ull * L * params.d_model * params.d_k;
            macs->scores += static_cast<std::uint64_t>(L) * L * params.d_k;
        }

        Matrix weights(L, L);
        for (int i = 0; i < L; ++i) {
            double mx = -std::numeric_limits<double>::infinity();
            for (int j = 0; j < L; ++j)
                if (mask.at(i, j) && scores(i, j) > mx) mx = scores(i, j);
            double denom = 0.0;
            for (int j = 0; j < L; ++j)
                if (mask.at(i, j)) denom += std::exp(scores(i, j) - mx);
            for (int j = 0; j < L; ++j)
                weights(i, j) = mask.at(i, j) ? std::exp(scores(i, j) - mx) / denom : 0.0;
        }

        Matrix ctx = matmul(weights, vh);
        if (macs) macs->context += static_cast<std::uint64_t>(L) * L * params.d_k;

        for (int i = 0; i < L; ++i)
            for (int c = 0; c < params.d_k; ++c) concat(i, h * params.d_k + c) = ctx(i, c);

        if (cache) {
            cache->qh.push_back(std::move(qh));
            cache->kh.push_back(std::move(kh));
            cache->vh.push_back(std::move(vh));
            cache->dense_weights.push_back(std::move(weights));
        }
    }

    Matrix out = matmul(concat, params.wo);
    if (macs) macs->projections += static_cast<std::uint64_t>(L) * params.d_model * params.d_model;
    if (cache) {
        cache->concat = std::move(concat);
        cache->valid = true;
    }
    return out;
}

Matrix attend_sparse(const Matrix& q, const Matrix& k, const Matrix& v, const MhaParams& params,
                     const pattern::PackedMask& mask, AttentionCache* cache, MacCounter* macs) {
    check_inputs(q, k, v, params);
    const int L = q.rows();
    if (mask.L != L) throw std::invalid_argument("attend_sparse: mask size != sequence length");
    for (int i = 0; i < L; ++i)
        if (mask.row_begin(i) == mask.row_end(i))
            throw std::invalid_argument("attend_sparse: mask row with no true entry");

    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(params.d_k));
    const std::uint64_t nnz = mask.nnz();
    Matrix concat(L, params.d_model);
    if (cache) {
        *cache = AttentionCache{};
        cache->is_sparse = true;
        cache->q_in = q;
        cache->k_in = k;
        cache->v_in = v;
        cache->packed = mask;
    }

    std::vector<double> row_scores;
    for (int h = 0; h < params.heads; ++h) {
        Matrix qh = matmul(q, params.wq[h]);
        Matrix kh = matmul(k, params.wk[h]);
        Matrix vh = matmul(v, params.wv[h]);
        if (macs) {
            macs->projections += 3ull * L * params.d_model * params.d_k;
            macs->scores += nnz * params.d_k;
            macs->context += nnz * params.d_k;
        }

        std::vector<double> weights(mask.nnz());
        Matrix ctx(L, params.d_k);
        for (int i = 0; i < L; ++i) {
            const std::size_t lo = mask.row_begin(i), hi = mask.row_end(i);
            row_scores.resize(hi - lo);
            // scores only at unmasked columns; -inf never materializes
            double mx = -std::numeric_limits<double>::infinity();
            for (std::size_t idx = lo; idx < hi; ++idx) {
                const double s = dot(qh.row(i), kh.row(mask.cols[idx])) * inv_scale;
                row_scores[idx - lo] = s;
                if (s > mx) mx = s;
            }
            double denom = 0.0;
            for (std::size_t idx = lo; idx < hi; ++idx)
                denom += std::exp(row_scores[idx - lo] - mx);
            auto ctx_row = ctx.row(i);
            for (std::size_t idx = lo; idx < hi; ++idx) {
                const double p = std::exp(row_scores[idx - lo] - mx) / denom;
                weights[idx] = p;
                auto vrow = vh.row(mask.cols[idx]);
                for (int c = 0; c < params.d_k; ++c) ctx_row[c] += p * vrow[c];
            }
        }

        for (int i = 0; i < L; ++i)
            for (int c = 0; c < params.d_k; ++c) concat(i, h * params.d_k + c) = ctx(i, c);

        if (cache) {
            cache->qh.push_back(std::move(qh));
            cache->kh.push_back(std::move(kh));
            cache->vh.push_back(std::move(vh));
            cache->sparse_weights.push_back(std::move(weights));
        }
    }

    Matrix out = matmul(concat, params.wo);
    if (macs) macs->projections += static_cast<std::uint64_t>(L) * params.d_model * params.d_model;
    if (cache) {
        cache->concat = std::move(concat);
        cache->valid = true;
    }
    return out;
}

Matrix attend_sparse(const Matrix& q, const Matrix& k, const Matrix& v, const MhaParams& params,
                     const pattern::PatternSpec& spec, AttentionCache* cache, MacCounter* macs) {
    return attend_sparse(q, k, v, params, pattern::pack_mask(spec, q.rows()), cache, macs);
}

MhaGrads attend_backward(const MhaParams& params, const AttentionCache& cache,
                         const Matrix& upstream) {
    if (!cache.valid) throw std::logic_error("attend_backward: no forward cache");
    params.validate();
    const int L = cache.q_in.rows();
    if (upstream.rows() != L || upstream.cols() != params.d_model)
        throw std::invalid_argument("attend_backward: upstream shape mismatch");

    const double inv_scale = 1.0 / std::sqrt(static_cast<double>(params.d_k));
    MhaGrads g;
    g.wo = matmul_at(cache.concat, upstream);
    g.q = Matrix(L, params.d_model);
    g.k = Matrix(L, params.d_model);
    g.v = Matrix(L, params.d_model);

    // dC = dY * Wo^T
    Matrix dconcat = matmul_bt(upstream, params.wo);

    for (int h = 0; h < params.heads; ++h) {
        const Matrix& qh = cache.qh[h];
        const Matrix& kh = cache.kh[h];
        const Matrix& vh = cache.vh[h];

        Matrix da(L, params.d_k);
        for (int i = 0; i < L; ++i)
            for (int c = 0; c < params.d_k; ++c) da(i, c) = dconcat(i, h * params.d_k + c);

        Matrix dqh(L, params.d_k);
        Matrix dkh(L, params.d_k);
        Matrix dvh(L, params.d_k);

        if (cache.is_sparse) {
            const pattern::PackedMask& mask = cache.packed;
            const std::vector<double>& w = cache.sparse_weights[h];
            std::vector<double> dp;
            for (int i = 0; i < L; ++i) {
                const std::size_t lo = mask.row_begin(i), hi = mask.row_end(i);
                dp.resize(hi - lo);
                double rowsum = 0.0;
                for (std::size_t idx = lo; idx < hi; ++idx) {
                    const double d = dot(da.row(i), vh.row(mask.cols[idx]));
                    dp[idx - lo] = d;
                    rowsum += w[idx] * d;
                }
                auto dq_row = dqh.row(i);
                auto q_row = qh.row(i);
                for (std::size_t idx = lo; idx < hi; ++idx) {
                    const int j = mask.cols[idx];
                    const double p = w[idx];
                    // dV += P^T dA
                    auto dv_row = dvh.row(j);
                    auto da_row = da.row(i);
                    for (int c = 0; c < params.d_k; ++c) dv_row[c] += p * da_row[c];
                    // softmax backward, then score backward
                    const double ds = p * (dp[idx - lo] - rowsum) * inv_scale;
                    auto k_row = kh.row(j);
                    for (int c = 0; c < params.d_k; ++c) dq_row[c] += ds * k_row[c];
                    auto dk_row = dkh.row(j);
                    for (int c = 0; c < params.d_k; ++c) dk_row[c] += ds * q_row[c];
                }
            }
        } else {
            const Matrix& w = cache.dense_weights[h];
            // dP = dA V^T over all pairs; masked entries carry zero weight and
            // therefore zero dS.
            Matrix dp = matmul_bt(da, vh);
            for (int i = 0; i < L; ++i) {
                double rowsum = 0.0;
                for (int j = 0; j < L; ++j) rowsum += w(i, j) * dp(i, j);
                auto dq_row = dqh.row(i);
                auto q_row = qh.row(i);
                for (int j = 0; j < L; ++j) {
                    const double p = w(i, j);
                    auto dv_row = dvh.row(j);
                    auto da_row = da.row(i);
                    for (int c = 0; c < params.d_k; ++c) dv_row[c] += p * da_row[c];
                    const double ds = p * (dp(i, j) - rowsum) * inv_scale;
                    auto k_row = kh.row(j);
                    for (int c = 0; c < params.d_k; ++c) dq_row[c] += ds * k_row[c];
                    auto dk_row = dkh.row(j);
                    for (int c = 0; c < params.d_k; ++c) dk_row[c] += ds * q_row[c];
                }
            }
        }

        g.wq.push_back(matmul_at(cache.q_in, dqh));
        g.wk.push_back(matmul_at(cache.k_in, dkh));
        g.wv.push_back(matmul_at(cache.v_in, dvh));
        // input gradients through the per-head projections
        Matrix dq_in = matmul_bt(dqh, params.wq[h]);
        Matrix dk_in = matmul_bt(dkh, params.wk[h]);
        Matrix dv_in = matmul_bt(dvh, params.wv[h]);
        for (int i = 0; i < L; ++i)
            for (int c = 0; c < params.d_model; ++c) {
                g.q(i, c) += dq_in(i, c);
                g.k(i, c) += dk_in(i, c);
                g.v(i, c) += dv_in(i, c);
            }
    }
    return g;
}

}  // namespace ripple::kernel
