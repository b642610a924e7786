#include "ripple/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ripple/errors.hpp"
#include "ripple/glorot.hpp"

namespace ripple::model {

void ModelConfig::validate() const {
    if (blocks < 1) throw std::invalid_argument("ModelConfig: blocks must be >= 1");
    if (heads < 1 || d_model < 1 || d_model % heads != 0)
        throw std::invalid_argument("ModelConfig: heads must divide d_model");
    if (d_ff < 1) throw std::invalid_argument("ModelConfig: d_ff must be >= 1");
    if (bins < 1) throw std::invalid_argument("ModelConfig: bins must be >= 1");
    attn_pattern.validate();
}

namespace {

Vec zeros(int n) { return Vec(static_cast<std::size_t>(n), 0.0); }
Vec ones(int n) { return Vec(static_cast<std::size_t>(n), 1.0); }

LayerNormParams make_ln(int width) { return {ones(width), zeros(width)}; }

/// y = x * W + b (b broadcast over rows).
Matrix affine(const Matrix& x, const Matrix& w, const Vec& b) {
    Matrix y = matmul(x, w);
    for (int i = 0; i < y.rows(); ++i) {
        auto row = y.row(i);
        for (int j = 0; j < y.cols(); ++j) row[j] += b[j];
    }
    return y;
}

Matrix layer_norm(const Matrix& x, const LayerNormParams& ln, LnCache* cache) {
    const int n = x.cols();
    Matrix y(x.rows(), n);
    Matrix xhat(x.rows(), n);
    Vec inv_std(static_cast<std::size_t>(x.rows()));
    for (int i = 0; i < x.rows(); ++i) {
        auto row = x.row(i);
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += row[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) {
            const double d = row[j] - mean;
            var += d * d;
        }
        var /= n;
        const double is = 1.0 / std::sqrt(var + kLayerNormEps);
        inv_std[i] = is;
        for (int j = 0; j < n; ++j) {
            const double xh = (row[j] - mean) * is;
            xhat(i, j) = xh;
            y(i, j) = ln.gain[j] * xh + ln.bias[j];
        }
    }
    if (cache) {
        cache->xhat = std::move(xhat);
        cache->inv_std = std::move(inv_std);
    }
    return y;
}

/// dx for y = gain * xhat + bias; accumulates dgain/dbias.
Matrix layer_norm_backward(const Matrix& dy, const LayerNormParams& ln, const LnCache& cache,
                           Vec& dgain, Vec& dbias) {
    const int n = dy.cols();
    Matrix dx(dy.rows(), n);
    for (int i = 0; i < dy.rows(); ++i) {
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int j = 0; j < n; ++j) {
            const double dxh = dy(i, j) * ln.gain[j];
            mean_dxhat += dxh;
            mean_dxhat_xhat += dxh * cache.xhat(i, j);
        }
        mean_dxhat /= n;
        mean_dxhat_xhat /= n;
        for (int j = 0; j < n; ++j) {
            const double dxh = dy(i, j) * ln.gain[j];
            dx(i, j) = cache.inv_std[i] * (dxh - mean_dxhat - cache.xhat(i, j) * mean_dxhat_xhat);
            dgain[j] += dy(i, j) * cache.xhat(i, j);
            dbias[j] += dy(i, j);
        }
    }
    return dx;
}

Matrix relu(const Matrix& x) {
    Matrix y = x;
    for (double& v : y.flat())
        if (v < 0.0) v = 0.0;
    return y;
}

Vec column_sums(const Matrix& x) {
    Vec s(static_cast<std::size_t>(x.cols()), 0.0);
    for (int i = 0; i < x.rows(); ++i) {
        auto row = x.row(i);
        for (int j = 0; j < x.cols(); ++j) s[j] += row[j];
    }
    return s;
}

}  // namespace

ModelParams init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    ModelParams p;
    p.config = cfg;
    p.w_in = glorot_uniform(cfg.bins, cfg.d_model, rng);
    p.b_in = zeros(cfg.d_model);
    p.ln_in = make_ln(cfg.d_model);
    for (int b = 0; b < cfg.blocks; ++b) {
        BlockParams blk;
        blk.mha = kernel::MhaParams::init(cfg.d_model, cfg.heads, rng);
        blk.ln_attn = make_ln(cfg.d_model);
        blk.ffn_w1 = glorot_uniform(cfg.d_model, cfg.d_ff, rng);
        blk.ffn_b1 = zeros(cfg.d_ff);
        blk.ffn_w2 = glorot_uniform(cfg.d_ff, cfg.d_model, rng);
        blk.ffn_b2 = zeros(cfg.d_model);
        blk.ln_ffn = make_ln(cfg.d_model);
        p.blocks.push_back(std::move(blk));
    }
    p.w_out = glorot_uniform(cfg.d_model, cfg.bins, rng);
    p.b_out = zeros(cfg.bins);
    return p;
}

ModelParams zeros_like(const ModelParams& p) {
    ModelParams z = p;
    for (auto view : tensor_views(z))
        for (double& v : view) v = 0.0;
    return z;
}

namespace {

template <class P, class S, class F>
void visit_impl(P& p, F&& f) {
    auto mat = [&](auto& m) { f(S(m.flat())); };
    auto vec = [&](auto& v) { f(S(v.data(), v.size())); };
    mat(p.w_in);
    vec(p.b_in);
    vec(p.ln_in.gain);
    vec(p.ln_in.bias);
    for (auto& blk : p.blocks) {
        for (auto& w : blk.mha.wq) mat(w);
        for (auto& w : blk.mha.wk) mat(w);
        for (auto& w : blk.mha.wv) mat(w);
        mat(blk.mha.wo);
        vec(blk.ln_attn.gain);
        vec(blk.ln_attn.bias);
        mat(blk.ffn_w1);
        vec(blk.ffn_b1);
        mat(blk.ffn_w2);
        vec(blk.ffn_b2);
        vec(blk.ln_ffn.gain);
        vec(blk.ln_ffn.bias);
    }
    mat(p.w_out);
    vec(p.b_out);
}

}  // namespace

std::vector<std::span<double>> tensor_views(ModelParams& p) {
    std::vector<std::span<double>> views;
    visit_impl<ModelParams, std::span<double>>(p, [&](std::span<double> s) { views.push_back(s); });
    return views;
}

std::vector<std::span<const double>> tensor_views(const ModelParams& p) {
    std::vector<std::span<const double>> views;
    visit_impl<const ModelParams, std::span<const double>>(
        p, [&](std::span<const double> s) { views.push_back(s); });
    return views;
}

std::size_t parameter_count(const ModelParams& p) {
    std::size_t n = 0;
    for (auto view : tensor_views(p)) n += view.size();
    return n;
}

Matrix forward(const ModelParams& params, const Matrix& magnitude, ForwardCache* cache,
               kernel::MacCounter* macs, KernelRoute route) {
    const ModelConfig& cfg = params.config;
    cfg.validate();
    if (magnitude.cols() != cfg.bins)
        throw std::invalid_argument("forward: input bin count does not match config");
    if (magnitude.rows() < 1) throw std::invalid_argument("forward: empty input");
    if (!magnitude.all_finite()) throw NumericalError("forward: non-finite input");

    const int L = magnitude.rows();
    const auto schedule = pattern::layer_schedule(cfg.blocks, cfg.attn_pattern);

    if (cache) {
        *cache = ForwardCache{};
        cache->input = magnitude;
        cache->blocks.resize(cfg.blocks);
    }

    Matrix h = affine(magnitude, params.w_in, params.b_in);
    h = layer_norm(h, params.ln_in, cache ? &cache->ln_in : nullptr);
    h = relu(h);
    if (cache) cache->hidden0 = h;

    for (int b = 0; b < cfg.blocks; ++b) {
        const BlockParams& blk = params.blocks[b];
        BlockCache* bc = cache ? &cache->blocks[b] : nullptr;

        Matrix attn_out;
        if (route == KernelRoute::Sparse) {
            attn_out = kernel::attend_sparse(h, h, h, blk.mha, pattern::pack_mask(schedule[b], L),
                                             bc ? &bc->attn : nullptr, macs);
        } else {
            attn_out = kernel::attend_dense(h, h, h, blk.mha, pattern::build_mask(schedule[b], L),
                                            bc ? &bc->attn : nullptr, macs);
        }
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < cfg.d_model; ++j) attn_out(i, j) += h(i, j);
        h = layer_norm(attn_out, blk.ln_attn, bc ? &bc->ln_attn : nullptr);
        if (bc) bc->after_attn_ln = h;

        Matrix act = relu(affine(h, blk.ffn_w1, blk.ffn_b1));
        if (bc) bc->ffn_act = act;
        Matrix ffn_out = affine(act, blk.ffn_w2, blk.ffn_b2);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < cfg.d_model; ++j) ffn_out(i, j) += h(i, j);
        h = layer_norm(ffn_out, blk.ln_ffn, bc ? &bc->ln_ffn : nullptr);
        if (bc) bc->out = h;
    }

    Matrix pre = affine(h, params.w_out, params.b_out);
    Matrix pred(L, cfg.bins);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < cfg.bins; ++j) pred(i, j) = 1.0 / (1.0 + std::exp(-pre(i, j)));

    if (cache) {
        cache->prediction = pred;
        cache->valid = true;
    }
    return pred;
}

double mse_loss(const Matrix& prediction, const Matrix& target) {
    if (!prediction.same_shape(target)) throw std::invalid_argument("mse_loss: shape mismatch");
    double s = 0.0;
    for (int i = 0; i < prediction.rows(); ++i) {
        auto p = prediction.row(i);
        auto t = target.row(i);
        for (int j = 0; j < prediction.cols(); ++j) {
            const double d = p[j] - t[j];
            s += d * d;
        }
    }
    return s / (static_cast<double>(prediction.rows()) * prediction.cols());
}

BackwardResult backward(const ModelParams& params, const ForwardCache& cache,
                        const Matrix& target) {
    if (!cache.valid) throw std::logic_error("backward: no forward cache");
    const ModelConfig& cfg = params.config;
    const Matrix& pred = cache.prediction;
    if (!pred.same_shape(target)) throw std::invalid_argument("backward: target shape mismatch");
    const int L = pred.rows();

    BackwardResult res;
    res.grads = zeros_like(params);
    res.loss = mse_loss(pred, target);

    const double scale = 2.0 / (static_cast<double>(L) * cfg.bins);
    // d(pre-sigmoid) = dLoss/dpred * pred * (1 - pred)
    Matrix dpre(L, cfg.bins);
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < cfg.bins; ++j) {
            const double p = pred(i, j);
            dpre(i, j) = scale * (p - target(i, j)) * p * (1.0 - p);
        }

    const Matrix& final_hidden = cfg.blocks > 0 ? cache.blocks.back().out : cache.hidden0;
    res.grads.w_out = matmul_at(final_hidden, dpre);
    res.grads.b_out = column_sums(dpre);
    Matrix dh = matmul_bt(dpre, params.w_out);

    for (int b = cfg.blocks - 1; b >= 0; --b) {
        const BlockParams& blk = params.blocks[b];
        const BlockCache& bc = cache.blocks[b];
        BlockParams& gblk = res.grads.blocks[b];

        // LN after the FFN residual
        Matrix d_res2 = layer_norm_backward(dh, blk.ln_ffn, bc.ln_ffn, gblk.ln_ffn.gain,
                                            gblk.ln_ffn.bias);
        // residual: d_res2 flows to both the FFN output and the FFN input path
        gblk.ffn_b2 = column_sums(d_res2);
        gblk.ffn_w2 = matmul_at(bc.ffn_act, d_res2);
        Matrix dact = matmul_bt(d_res2, blk.ffn_w2);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < cfg.d_ff; ++j)
                if (bc.ffn_act(i, j) <= 0.0) dact(i, j) = 0.0;
        gblk.ffn_b1 = column_sums(dact);
        gblk.ffn_w1 = matmul_at(bc.after_attn_ln, dact);
        Matrix dx1 = matmul_bt(dact, blk.ffn_w1);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < cfg.d_model; ++j) dx1(i, j) += d_res2(i, j);

        // LN after the attention residual
        Matrix d_res1 = layer_norm_backward(dx1, blk.ln_attn, bc.ln_attn, gblk.ln_attn.gain,
                                            gblk.ln_attn.bias);
        kernel::MhaGrads mg = kernel::attend_backward(blk.mha, bc.attn, d_res1);
        gblk.mha.d_model = blk.mha.d_model;
        gblk.mha.heads = blk.mha.heads;
        gblk.mha.d_k = blk.mha.d_k;
        gblk.mha.wq = std::move(mg.wq);
        gblk.mha.wk = std::move(mg.wk);
        gblk.mha.wv = std::move(mg.wv);
        gblk.mha.wo = std::move(mg.wo);

        // residual + the three Q/K/V input paths (Q = K = V = block input)
        dh = std::move(d_res1);
        for (int i = 0; i < L; ++i)
            for (int j = 0; j < cfg.d_model; ++j)
                dh(i, j) += mg.q(i, j) + mg.k(i, j) + mg.v(i, j);
    }

    // input block: ReLU, LN, affine
    for (int i = 0; i < L; ++i)
        for (int j = 0; j < cfg.d_model; ++j)
            if (cache.hidden0(i, j) <= 0.0) dh(i, j) = 0.0;
    Matrix dz = layer_norm_backward(dh, params.ln_in, cache.ln_in, res.grads.ln_in.gain,
                                    res.grads.ln_in.bias);
    res.grads.b_in = column_sums(dz);
    res.grads.w_in = matmul_at(cache.input, dz);
    res.input_grad = matmul_bt(dz, params.w_in);
    return res;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr char kMagic[4] = {'R', 'S', 'A', 'E'};
constexpr std::uint32_t kVersion = 1;

std::uint64_t fnv1a64(const unsigned char* data, std::size_t n) {
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= data[i];
        h *= 1099511628211ULL;
    }
    return h;
}

void put_u32(std::vector<unsigned char>& b, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff);
}
void put_u64(std::vector<unsigned char>& b, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) b.push_back((v >> (8 * i)) & 0xff);
}
std::uint32_t get_u32(const unsigned char* p) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
    return v;
}
std::uint64_t get_u64(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
}

std::string config_text(const ModelConfig& cfg) {
    std::ostringstream os;
    os << "blocks=" << cfg.blocks << '\n'
       << "heads=" << cfg.heads << '\n'
       << "d_model=" << cfg.d_model << '\n'
       << "d_ff=" << cfg.d_ff << '\n'
       << "bins=" << cfg.bins << '\n'
       << "pattern=" << pattern::kind_name(cfg.attn_pattern.kind) << '\n'
       << "w=" << cfg.attn_pattern.w << '\n'
       << "d=" << cfg.attn_pattern.d << '\n'
       << "block=" << cfg.attn_pattern.block << '\n';
    return os.str();
}

long parse_kv(std::istringstream& in, const std::string& key) {
    std::string line;
    if (!std::getline(in, line) || line.rfind(key + "=", 0) != 0)
        throw DataFormatError("checkpoint: malformed config (expected " + key + ")");
    try {
        return std::stol(line.substr(key.size() + 1));
    } catch (const std::exception&) {
        throw DataFormatError("checkpoint: bad value for " + key);
    }
}

ModelConfig parse_config(const std::string& text) {
    std::istringstream in(text);
    ModelConfig cfg;
    cfg.blocks = static_cast<int>(parse_kv(in, "blocks"));
    cfg.heads = static_cast<int>(parse_kv(in, "heads"));
    cfg.d_model = static_cast<int>(parse_kv(in, "d_model"));
    cfg.d_ff = static_cast<int>(parse_kv(in, "d_ff"));
    cfg.bins = static_cast<int>(parse_kv(in, "bins"));

    std::string line;
    if (!std::getline(in, line) || line.rfind("pattern=", 0) != 0)
        throw DataFormatError("checkpoint: malformed config (expected pattern)");
    const std::string kind = line.substr(8);
    pattern::PatternSpec spec;
    if (kind == "full") spec.kind = pattern::PatternKind::Full;
    else if (kind == "band") spec.kind = pattern::PatternKind::Band;
    else if (kind == "ripple") spec.kind = pattern::PatternKind::Ripple;
    else if (kind == "blockwise") spec.kind = pattern::PatternKind::Blockwise;
    else throw DataFormatError("checkpoint: unknown pattern kind " + kind);
    spec.w = static_cast<int>(parse_kv(in, "w"));
    spec.d = static_cast<int>(parse_kv(in, "d"));
    spec.block = static_cast<int>(parse_kv(in, "block"));
    cfg.attn_pattern = spec;
    try {
        cfg.validate();
    } catch (const std::exception& e) {
        throw DataFormatError(std::string("checkpoint: invalid config: ") + e.what());
    }
    return cfg;
}

}  // namespace

void save(const ModelParams& params, const std::filesystem::path& path) {
    params.config.validate();
    const std::string cfg_text = config_text(params.config);

    std::vector<unsigned char> bytes;
    bytes.insert(bytes.end(), kMagic, kMagic + 4);
    put_u32(bytes, kVersion);
    put_u64(bytes, cfg_text.size());
    bytes.insert(bytes.end(), cfg_text.begin(), cfg_text.end());
    for (auto view : tensor_views(params))
        for (double v : view) {
            std::uint64_t u;
            std::memcpy(&u, &v, 8);
            put_u64(bytes, u);
        }
    put_u64(bytes, fnv1a64(bytes.data(), bytes.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataFormatError("checkpoint: cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataFormatError("checkpoint: write failed for " + path.string());
}

ModelParams load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataFormatError("checkpoint: cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());

    if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
        throw BadMagicError("checkpoint: bad magic (not a model checkpoint)");
    if (bytes.size() < 16) throw ChecksumError("checkpoint: truncated header");
    const std::uint32_t version = get_u32(bytes.data() + 4);
    if (version != kVersion)
        throw VersionError("checkpoint: unsupported version " + std::to_string(version));

    const std::uint64_t cfg_len = get_u64(bytes.data() + 8);
    if (bytes.size() < 16 + cfg_len) throw ChecksumError("checkpoint: truncated config block");
    const std::string cfg_text(reinterpret_cast<const char*>(bytes.data() + 16),
                               static_cast<std::size_t>(cfg_len));
    const ModelConfig cfg = parse_config(cfg_text);

    ModelParams params = init(cfg, 0);  // shapes only; values overwritten below
    const std::size_t n_params = parameter_count(params);
    const std::size_t expected = 16 + cfg_len + 8 * n_params + 8;
    if (bytes.size() != expected)
        throw ChecksumError("checkpoint: truncated or oversized payload");

    const std::uint64_t stored = get_u64(bytes.data() + bytes.size() - 8);
    if (fnv1a64(bytes.data(), bytes.size() - 8) != stored)
        throw ChecksumError("checkpoint: checksum mismatch");

    const unsigned char* p = bytes.data() + 16 + cfg_len;
    for (auto view : tensor_views(params))
        for (double& v : view) {
            const std::uint64_t u = get_u64(p);
            std::memcpy(&v, &u, 8);
            p += 8;
        }
    return params;
}

}  // namespace ripple::model
