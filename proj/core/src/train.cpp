#include "ripple/train.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "ripple/errors.hpp"
#include "ripple/rng.hpp"

namespace ripple::train {

double lr_at(const LrSchedule& schedule, std::int64_t n) {
    if (n < 1) throw std::invalid_argument("lr_at: step must be >= 1");
    if (schedule.d_model < 1 || schedule.warmup_steps < 1)
        throw std::invalid_argument("lr_at: invalid schedule");
    const double nd = static_cast<double>(n);
    const double wup = static_cast<double>(schedule.warmup_steps);
    const double decay = 1.0 / std::sqrt(nd);
    const double ramp = nd / (wup * std::sqrt(wup));
    return (1.0 / std::sqrt(static_cast<double>(schedule.d_model))) * std::min(decay, ramp);
}

OptState OptState::init(const model::ModelParams& params) {
    OptState s;
    s.step = 0;
    s.m = model::zeros_like(params);
    s.v = model::zeros_like(params);
    return s;
}

void clip_gradients(model::ModelParams& grads, double bound) {
    if (!(bound > 0.0)) throw std::invalid_argument("clip_gradients: bound must be positive");
    for (auto view : model::tensor_views(grads))
        for (double& g : view) {
            if (std::isnan(g)) throw NumericalError("clip_gradients: NaN gradient");
            if (g > bound) g = bound;
            else if (g < -bound) g = -bound;
        }
}

void adam_step(model::ModelParams& params, const model::ModelParams& grads, OptState& opt,
               double lr, const AdamConfig& cfg) {
    auto p_views = model::tensor_views(params);
    auto g_views = model::tensor_views(grads);
    auto m_views = model::tensor_views(opt.m);
    auto v_views = model::tensor_views(opt.v);
    if (p_views.size() != g_views.size()) throw std::invalid_argument("adam_step: tensor count");

    opt.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(opt.step));

    for (std::size_t t = 0; t < p_views.size(); ++t) {
        auto p = p_views[t];
        auto g = g_views[t];
        auto m = m_views[t];
        auto v = v_views[t];
        if (p.size() != g.size() || p.size() != m.size() || p.size() != v.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            p[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
        }
    }
}

std::pair<dsp::Waveform, dsp::Waveform> make_synthetic_pair(std::uint64_t seed,
                                                            double duration_s, double snr_db) {
    if (duration_s < 0.2) throw std::invalid_argument("make_synthetic_pair: duration below 0.2 s");
    constexpr int rate = 16000;
    const std::size_t n = static_cast<std::size_t>(duration_s * rate);

    Rng rng(seed);
    Rng clean_rng = rng.fork(1);
    Rng noise_rng = rng.fork(2);

    // Utterances start and end in silence (one 512-sample analysis window)
    // with a raised-cosine fade inside. Edge frames of the STFT are then
    // exactly zero, so spectral modifications cannot excite the
    // low-overlap head/tail of the overlap-add resynthesis.
    constexpr std::size_t margin = 512, fade = 256;
    auto envelope = [n](std::size_t t) -> double {
        if (t < margin || t >= n - margin) return 0.0;
        const std::size_t a = t - margin;
        const std::size_t b = n - margin - 1 - t;
        double e = 1.0;
        if (a < fade) e *= 0.5 - 0.5 * std::cos(std::numbers::pi * (a + 1) / (fade + 1));
        if (b < fade) e *= 0.5 - 0.5 * std::cos(std::numbers::pi * (b + 1) / (fade + 1));
        return e;
    };

    // clean: sum of amplitude-modulated harmonics of a random fundamental,
    // all partials kept below 3.8 kHz
    dsp::Waveform clean;
    clean.sample_rate = rate;
    clean.samples.assign(n, 0.0);
    const int n_harm = clean_rng.uniform_int(3, 8);
    const double f0 = clean_rng.uniform(90.0, 280.0);
    for (int hidx = 1; hidx <= n_harm; ++hidx) {
        const double freq = f0 * hidx;
        if (freq > 3800.0) break;
        const double amp = clean_rng.uniform(0.4, 1.0) / hidx;
        const double phase = clean_rng.uniform(0.0, 2.0 * std::numbers::pi);
        const double am_freq = clean_rng.uniform(1.0, 8.0);
        const double am_phase = clean_rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t t = 0; t < n; ++t) {
            const double tt = static_cast<double>(t) / rate;
            const double am = 0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * am_freq * tt + am_phase);
            clean.samples[t] += amp * am * std::sin(2.0 * std::numbers::pi * freq * tt + phase);
        }
    }
    for (std::size_t t = 0; t < n; ++t) clean.samples[t] *= envelope(t);
    double peak = 0.0;
    for (double v : clean.samples) peak = std::max(peak, std::abs(v));
    const double gain = peak > 0.0 ? 0.5 / peak : 1.0;
    for (double& v : clean.samples) v *= gain;

    // noise: white Gaussian through a one-pole lowpass
    dsp::Waveform noise;
    noise.sample_rate = rate;
    noise.samples.assign(n, 0.0);
    const double alpha = noise_rng.uniform(0.05, 0.5);
    double state = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        state += alpha * (noise_rng.gaussian() - state);
        noise.samples[t] = state * envelope(t);
    }

    // scale the noise so the pair already sits at snr_db
    const double p_clean = dsp::power(clean);
    const double p_noise = dsp::power(noise);
    const double scale = std::sqrt(p_clean / (p_noise * std::pow(10.0, snr_db / 10.0)));
    for (double& v : noise.samples) v *= scale;
    return {std::move(clean), std::move(noise)};
}

void TrainConfig::validate() const {
    if (snr_lo_db > snr_hi_db) throw std::invalid_argument("TrainConfig: snr_lo > snr_hi");
    if (utterances_per_step < 1)
        throw std::invalid_argument("TrainConfig: utterances_per_step must be >= 1");
    if (total_steps < 1) throw std::invalid_argument("TrainConfig: total_steps must be >= 1");
    if (warmup_steps < 1) throw std::invalid_argument("TrainConfig: warmup_steps must be >= 1");
    if (utterance_duration_s < 0.2)
        throw std::invalid_argument("TrainConfig: utterance duration below 0.2 s");
}

TrainResult train_loop(const model::ModelConfig& model_cfg, const TrainConfig& train_cfg,
                       const std::optional<std::filesystem::path>& loss_csv_path) {
    model_cfg.validate();
    train_cfg.validate();

    // STFT geometry from the model's bin count: fft = 2*(bins-1), 50% hop
    const int fft_size = 2 * (model_cfg.bins - 1);
    const dsp::StftConfig stft_cfg = dsp::StftConfig::make(fft_size, fft_size);

    model::ModelParams params = model::init(model_cfg, train_cfg.seed);
    OptState opt = OptState::init(params);
    const AdamConfig adam;
    const LrSchedule schedule{model_cfg.d_model, train_cfg.warmup_steps};

    std::ofstream csv;
    if (loss_csv_path) {
        csv.open(*loss_csv_path, std::ios::trunc);
        if (!csv) throw DataFormatError("train_loop: cannot write " + loss_csv_path->string());
        csv << "step,lr,loss\n";
        csv.precision(17);
    }

    Rng run_rng(train_cfg.seed);
    TrainResult result;
    result.history.reserve(train_cfg.total_steps);

    for (int step = 1; step <= train_cfg.total_steps; ++step) {
        model::ModelParams grad_sum = model::zeros_like(params);
        double loss_sum = 0.0;

        for (int u = 0; u < train_cfg.utterances_per_step; ++u) {
            Rng item_rng = run_rng.fork(static_cast<std::uint64_t>(u) + 1);
            const int snr = item_rng.uniform_int(train_cfg.snr_lo_db, train_cfg.snr_hi_db);
            const std::uint64_t pair_seed =
                train_cfg.seed ^ (static_cast<std::uint64_t>(step) << 20) ^
                (static_cast<std::uint64_t>(u) << 44) ^ 0x5bd1e995u;
            auto [clean, noise] =
                make_synthetic_pair(pair_seed, train_cfg.utterance_duration_s, snr);

            dsp::Waveform noisy = clean;
            for (std::size_t i = 0; i < noisy.samples.size(); ++i)
                noisy.samples[i] += noise.samples[i];

            const dsp::Spectrogram s = dsp::stft(clean, stft_cfg);
            const dsp::Spectrogram d = dsp::stft(noise, stft_cfg);
            const dsp::Spectrogram x = dsp::stft(noisy, stft_cfg);

            const targets::MaskMatrix target = train_cfg.objective == targets::MaskObjective::Irm
                                                   ? targets::irm(s, d)
                                                   : targets::psm(s, x);

            model::ForwardCache cache;
            model::forward(params, dsp::magnitude(x), &cache);
            model::BackwardResult bw = model::backward(params, cache, target.values);
            loss_sum += bw.loss;

            auto sum_views = model::tensor_views(grad_sum);
            auto g_views = model::tensor_views(bw.grads);
            for (std::size_t t = 0; t < sum_views.size(); ++t)
                for (std::size_t i = 0; i < sum_views[t].size(); ++i)
                    sum_views[t][i] += g_views[t][i];
        }

        const double inv_batch = 1.0 / train_cfg.utterances_per_step;
        for (auto view : model::tensor_views(grad_sum))
            for (double& g : view) g *= inv_batch;
        const double loss = loss_sum * inv_batch;
        if (!std::isfinite(loss))
            throw NumericalError("train_loop: non-finite loss at step " + std::to_string(step));

        clip_gradients(grad_sum, adam.clip);
        const double lr = lr_at(schedule, step);
        adam_step(params, grad_sum, opt, lr, adam);

        result.history.push_back({step, lr, loss});
        if (csv.is_open()) csv << step << ',' << lr << ',' << loss << '\n';
    }

    result.params = std::move(params);
    return result;
}

TrainConfig parse_train_config_file(const std::filesystem::path& path, TrainConfig base) {
    std::ifstream in(path);
    if (!in) throw DataFormatError("train config: cannot open " + path.string());
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw DataFormatError("train config: expected key=value at line " +
                                  std::to_string(lineno));
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        try {
            if (key == "objective") base.objective = targets::parse_objective(val);
            else if (key == "snr_lo") base.snr_lo_db = std::stoi(val);
            else if (key == "snr_hi") base.snr_hi_db = std::stoi(val);
            else if (key == "batch") base.utterances_per_step = std::stoi(val);
            else if (key == "steps") base.total_steps = std::stoi(val);
            else if (key == "seed") base.seed = std::stoull(val);
            else if (key == "warmup") base.warmup_steps = std::stoi(val);
            else if (key == "duration") base.utterance_duration_s = std::stod(val);
            else throw DataFormatError("train config: unknown key " + key);
        } catch (const DataFormatError&) {
            throw;
        } catch (const std::exception&) {
            throw DataFormatError("train config: bad value for " + key + " at line " +
                                  std::to_string(lineno));
        }
    }
    return base;
}

}  // namespace ripple::train
