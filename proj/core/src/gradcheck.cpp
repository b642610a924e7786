#include "ripple/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "ripple/rng.hpp"

namespace ripple::gradcheck {

model::ModelConfig tiny_config() {
    model::ModelConfig cfg;
    cfg.blocks = 2;
    cfg.heads = 2;
    cfg.d_model = 8;
    cfg.d_ff = 16;
    cfg.bins = 5;
    cfg.attn_pattern = pattern::PatternSpec::ripple(4, 3);
    return cfg;
}

namespace {

double rel_error(double num, double ana) {
    return std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-6});
}

}  // namespace

Report check_model(const model::ModelConfig& cfg, std::uint64_t seed, double step, bool corrupt) {
    const int L = kTinySequenceLength;
    Rng rng(seed);

    Matrix input(L, cfg.bins);
    for (double& v : input.flat()) v = std::abs(rng.gaussian());
    Matrix target(L, cfg.bins);
    for (double& v : target.flat()) v = rng.uniform();

    model::ModelParams params = model::init(cfg, seed);

    model::ForwardCache cache;
    model::forward(params, input, &cache);
    model::BackwardResult bw = model::backward(params, cache, target);
    if (corrupt) {
        auto views = model::tensor_views(bw.grads);
        views.front()[0] += 1e-2;
    }

    auto loss_at = [&](const model::ModelParams& p, const Matrix& x) {
        return model::mse_loss(model::forward(p, x), target);
    };

    Report report;
    auto p_views = model::tensor_views(params);
    auto g_views = model::tensor_views(bw.grads);
    for (std::size_t t = 0; t < p_views.size(); ++t) {
        for (std::size_t i = 0; i < p_views[t].size(); ++i) {
            const double saved = p_views[t][i];
            p_views[t][i] = saved + step;
            const double up = loss_at(params, input);
            p_views[t][i] = saved - step;
            const double down = loss_at(params, input);
            p_views[t][i] = saved;
            const double num = (up - down) / (2.0 * step);
            report.max_rel_error = std::max(report.max_rel_error, rel_error(num, g_views[t][i]));
            ++report.entries_checked;
        }
    }
    for (int i = 0; i < L; ++i) {
        for (int j = 0; j < cfg.bins; ++j) {
            const double saved = input(i, j);
            input(i, j) = saved + step;
            const double up = loss_at(params, input);
            input(i, j) = saved - step;
            const double down = loss_at(params, input);
            input(i, j) = saved;
            const double num = (up - down) / (2.0 * step);
            report.max_rel_error =
                std::max(report.max_rel_error, rel_error(num, bw.input_grad(i, j)));
            ++report.entries_checked;
        }
    }
    return report;
}

}  // namespace ripple::gradcheck
