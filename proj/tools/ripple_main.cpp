// ripple: sparse-attention speech enhancement toolkit.
//
// Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numerical
// failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ripple/analysis.hpp"
#include "ripple/dsp.hpp"
#include "ripple/errors.hpp"
#include "ripple/gradcheck.hpp"
#include "ripple/model.hpp"
#include "ripple/pattern.hpp"
#include "ripple/targets.hpp"
#include "ripple/train.hpp"
#include "ripple/wav.hpp"

namespace fs = std::filesystem;
using namespace ripple;

namespace {

pattern::PatternSpec spec_from_flags(const std::string& kind, int w, int d, int block) {
    if (kind == "full") return pattern::PatternSpec::full();
    if (kind == "band") return pattern::PatternSpec::band(w);
    if (kind == "ripple") return pattern::PatternSpec::ripple(w, d);
    if (kind == "blockwise") return pattern::PatternSpec::blockwise(block);
    throw std::invalid_argument("unknown pattern kind: " + kind);
}

// "100:3000:100" (inclusive range) or "1000,2000,3000"
std::vector<int> parse_lengths(const std::string& text) {
    std::vector<int> out;
    if (text.find(':') != std::string::npos) {
        int start = 0, stop = 0, step = 0;
        if (std::sscanf(text.c_str(), "%d:%d:%d", &start, &stop, &step) != 3 || step <= 0 ||
            start < 1 || stop < start)
            throw std::invalid_argument("bad length range: " + text);
        for (int v = start; v <= stop; v += step) out.push_back(v);
        return out;
    }
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        out.push_back(std::stoi(tok));
        if (out.back() < 1) throw std::invalid_argument("lengths must be >= 1");
    }
    if (out.empty()) throw std::invalid_argument("empty length list");
    return out;
}

void write_text(const std::optional<std::string>& path, const std::string& text) {
    if (!path) {
        std::cout << text;
        return;
    }
    std::ofstream out(*path, std::ios::trunc);
    if (!out) throw DataFormatError("cannot write " + *path);
    out << text;
    if (!out) throw DataFormatError("write failed for " + *path);
}

int run(int argc, char** argv) {
    CLI::App app{"ripple sparse self-attention speech enhancement"};
    app.require_subcommand(1);

    // ---- mask-dump -------------------------------------------------------
    auto* mask_cmd = app.add_subcommand("mask-dump", "write an attention mask as PBM");
    std::string md_kind = "ripple";
    int md_L = 12, md_w = 4, md_d = 3, md_block = 50;
    std::optional<std::string> md_out, md_degrees;
    mask_cmd->add_option("--kind", md_kind, "full|band|ripple|blockwise")
        ->check(CLI::IsMember({"full", "band", "ripple", "blockwise"}));
    mask_cmd->add_option("--L", md_L, "sequence length")->check(CLI::PositiveNumber);
    mask_cmd->add_option("--w", md_w, "window length (even)");
    mask_cmd->add_option("--d", md_d, "dilation stride");
    mask_cmd->add_option("--block", md_block, "block size");
    mask_cmd->add_option("--out", md_out, "PBM output path (default stdout)");
    mask_cmd->add_option("--degrees", md_degrees, "row-degree CSV output path");

    // ---- macs ------------------------------------------------------------
    auto* macs_cmd = app.add_subcommand("macs", "theoretical MAC table per pattern");
    std::string mc_lengths = "100:3000:100";
    std::string mc_patterns = "full,ripple,blockwise,sepformer";
    int mc_dmodel = 256, mc_dff = 1024, mc_blocks = 4, mc_heads = 8;
    int mc_w = 12, mc_d = 24, mc_block = 50, mc_chunk = 50;
    std::optional<std::string> mc_out;
    macs_cmd->add_option("--L", mc_lengths, "lengths, start:stop:step or comma list");
    macs_cmd->add_option("--patterns", mc_patterns,
                         "comma list from full,band,ripple,blockwise,sepformer");
    macs_cmd->add_option("--d-model", mc_dmodel);
    macs_cmd->add_option("--d-ff", mc_dff);
    macs_cmd->add_option("--blocks", mc_blocks, "transformer layer count");
    macs_cmd->add_option("--heads", mc_heads);
    macs_cmd->add_option("--w", mc_w);
    macs_cmd->add_option("--d", mc_d);
    macs_cmd->add_option("--block", mc_block);
    macs_cmd->add_option("--chunk", mc_chunk, "dual-path chunk size");
    macs_cmd->add_option("--out", mc_out, "CSV output path (default stdout)");

    // ---- gradcheck -------------------------------------------------------
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the tiny model");
    std::uint64_t gc_seed = 7;
    bool gc_tiny = true;
    bool gc_corrupt = false;
    grad_cmd->add_option("--seed", gc_seed);
    grad_cmd->add_flag("--tiny", gc_tiny, "use the fixed tiny configuration (default)");
    grad_cmd->add_flag("--corrupt", gc_corrupt)->group("");  // negative-control hook

    // ---- train -----------------------------------------------------------
    auto* train_cmd = app.add_subcommand("train", "desk-scale training on synthetic data");
    train::TrainConfig tc;
    std::string tr_objective = "irm";
    std::string tr_pattern = "ripple";
    int tr_w = 12, tr_d = 16, tr_block = 50;
    int tr_blocks = 2, tr_heads = 4, tr_dmodel = 32, tr_dff = 128, tr_bins = 129;
    std::optional<std::string> tr_config, tr_model_out, tr_loss_csv;
    train_cmd->add_option("--config", tr_config, "key=value config file");
    auto* opt_objective = train_cmd->add_option("--objective", tr_objective, "irm|psm")
                              ->check(CLI::IsMember({"irm", "psm"}));
    auto* opt_steps = train_cmd->add_option("--steps", tc.total_steps);
    auto* opt_batch = train_cmd->add_option("--batch", tc.utterances_per_step);
    auto* opt_seed = train_cmd->add_option("--seed", tc.seed);
    auto* opt_snr_lo = train_cmd->add_option("--snr-lo", tc.snr_lo_db);
    auto* opt_snr_hi = train_cmd->add_option("--snr-hi", tc.snr_hi_db);
    auto* opt_warmup = train_cmd->add_option("--warmup", tc.warmup_steps);
    auto* opt_duration =
        train_cmd->add_option("--duration", tc.utterance_duration_s, "seconds per utterance");
    train_cmd->add_option("--blocks", tr_blocks);
    train_cmd->add_option("--heads", tr_heads);
    train_cmd->add_option("--d-model", tr_dmodel);
    train_cmd->add_option("--d-ff", tr_dff);
    train_cmd->add_option("--bins", tr_bins);
    train_cmd->add_option("--pattern", tr_pattern)
        ->check(CLI::IsMember({"full", "band", "ripple", "blockwise"}));
    train_cmd->add_option("--w", tr_w);
    train_cmd->add_option("--d", tr_d);
    train_cmd->add_option("--block", tr_block);
    train_cmd->add_option("--out-model", tr_model_out, "checkpoint path");
    train_cmd->add_option("--loss-csv", tr_loss_csv, "per-step loss log");

    // ---- enhance ---------------------------------------------------------
    auto* enh_cmd = app.add_subcommand("enhance", "denoise a WAV file with a trained model");
    std::string enh_model, enh_in, enh_out;
    std::optional<std::string> enh_mask_csv;
    enh_cmd->add_option("--model", enh_model, "checkpoint path")->required();
    enh_cmd->add_option("--in", enh_in, "noisy input WAV")->required();
    enh_cmd->add_option("--out", enh_out, "enhanced output WAV")->required();
    enh_cmd->add_option("--mask-csv", enh_mask_csv, "dump the predicted mask, one row per frame");

    // ---- bench -----------------------------------------------------------
    auto* bench_cmd = app.add_subcommand("bench", "wall-clock dense vs sparse attention");
    std::string bn_pattern = "ripple", bn_lengths = "2000";
    int bn_w = 12, bn_d = 24, bn_block = 50, bn_reps = 5, bn_dmodel = 256, bn_heads = 8;
    std::optional<std::string> bn_out;
    bench_cmd->add_option("--pattern", bn_pattern)
        ->check(CLI::IsMember({"full", "band", "ripple", "blockwise"}));
    bench_cmd->add_option("--L", bn_lengths, "lengths, start:stop:step or comma list");
    bench_cmd->add_option("--w", bn_w);
    bench_cmd->add_option("--d", bn_d);
    bench_cmd->add_option("--block", bn_block);
    bench_cmd->add_option("--reps", bn_reps, "repetitions per point (>= 3)");
    bench_cmd->add_option("--d-model", bn_dmodel);
    bench_cmd->add_option("--heads", bn_heads);
    bench_cmd->add_option("--out", bn_out, "CSV output path (default stdout)");

    // ---- make-data -------------------------------------------------------
    auto* data_cmd = app.add_subcommand("make-data", "write synthetic clean/noise/noisy triples");
    std::string dt_dir;
    int dt_count = 3;
    std::uint64_t dt_seed = 1;
    double dt_duration = 2.0, dt_snr = 0.0;
    data_cmd->add_option("--out-dir", dt_dir)->required();
    data_cmd->add_option("--count", dt_count)->check(CLI::PositiveNumber);
    data_cmd->add_option("--seed", dt_seed);
    data_cmd->add_option("--duration", dt_duration, "seconds per utterance");
    data_cmd->add_option("--snr", dt_snr, "mixing SNR in dB");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);  // prints help, exits 0
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;  // every command-line problem is a usage error
    }

    if (mask_cmd->parsed()) {
        const pattern::PatternSpec spec = spec_from_flags(md_kind, md_w, md_d, md_block);
        const pattern::BoolMask mask = pattern::build_mask(spec, md_L);
        std::ostringstream pbm;
        pattern::write_pbm(mask, pbm);
        write_text(md_out, pbm.str());
        if (md_degrees) {
            std::ostringstream csv;
            pattern::write_row_degrees_csv(mask, csv);
            write_text(md_degrees, csv.str());
        }
        return 0;
    }

    if (macs_cmd->parsed()) {
        model::ModelConfig cfg;
        cfg.blocks = mc_blocks;
        cfg.heads = mc_heads;
        cfg.d_model = mc_dmodel;
        cfg.d_ff = mc_dff;
        std::vector<analysis::MacSpec> specs;
        std::stringstream ss(mc_patterns);
        std::string name;
        while (std::getline(ss, name, ',')) {
            if (name == "sepformer") specs.push_back(analysis::SepformerSpec{mc_chunk});
            else specs.push_back(spec_from_flags(name, mc_w, mc_d, mc_block));
        }
        const auto reports = analysis::macs_sweep(specs, parse_lengths(mc_lengths), cfg);
        std::ostringstream csv;
        analysis::write_macs_csv(reports, csv);
        write_text(mc_out, csv.str());
        return 0;
    }

    if (grad_cmd->parsed()) {
        (void)gc_tiny;  // only the tiny configuration exists today
        const auto report =
            gradcheck::check_model(gradcheck::tiny_config(), gc_seed, 1e-5, gc_corrupt);
        std::printf("max_rel_error %.6e over %zu entries\n", report.max_rel_error,
                    report.entries_checked);
        if (report.max_rel_error > 1e-4) {
            std::fprintf(stderr, "gradcheck FAILED (tolerance 1e-4)\n");
            return 3;
        }
        return 0;
    }

    if (train_cmd->parsed()) {
        if (tr_config) {
            // file values fill in everything the command line did not set
            const train::TrainConfig file_cfg = train::parse_train_config_file(*tr_config);
            if (!*opt_objective) tr_objective = targets::objective_name(file_cfg.objective);
            if (!*opt_steps) tc.total_steps = file_cfg.total_steps;
            if (!*opt_batch) tc.utterances_per_step = file_cfg.utterances_per_step;
            if (!*opt_seed) tc.seed = file_cfg.seed;
            if (!*opt_snr_lo) tc.snr_lo_db = file_cfg.snr_lo_db;
            if (!*opt_snr_hi) tc.snr_hi_db = file_cfg.snr_hi_db;
            if (!*opt_warmup) tc.warmup_steps = file_cfg.warmup_steps;
            if (!*opt_duration) tc.utterance_duration_s = file_cfg.utterance_duration_s;
        }
        tc.objective = targets::parse_objective(tr_objective);

        model::ModelConfig mcfg;
        mcfg.blocks = tr_blocks;
        mcfg.heads = tr_heads;
        mcfg.d_model = tr_dmodel;
        mcfg.d_ff = tr_dff;
        mcfg.bins = tr_bins;
        mcfg.attn_pattern = spec_from_flags(tr_pattern, tr_w, tr_d, tr_block);

        std::optional<fs::path> csv_path;
        if (tr_loss_csv) csv_path = fs::path(*tr_loss_csv);
        const train::TrainResult result = train::train_loop(mcfg, tc, csv_path);
        if (tr_model_out) model::save(result.params, *tr_model_out);
        std::printf("trained %d steps, first loss %.6f, last loss %.6f\n",
                    static_cast<int>(result.history.size()), result.history.front().loss,
                    result.history.back().loss);
        return 0;
    }

    if (enh_cmd->parsed()) {
        const model::ModelParams params = model::load(enh_model);
        const dsp::Waveform noisy = wav::read(enh_in);
        const int fft = 2 * (params.config.bins - 1);
        const dsp::Spectrogram x = dsp::stft(noisy, dsp::StftConfig::make(fft, fft));
        const Matrix mask = model::forward(params, dsp::magnitude(x));
        if (enh_mask_csv) {
            std::ostringstream csv;
            targets::write_mask_csv({mask, targets::MaskObjective::Irm}, csv);
            write_text(enh_mask_csv, csv.str());
        }
        const dsp::Waveform out = dsp::istft(targets::apply_mask(x, mask));
        wav::write(enh_out, out);
        std::printf("enhanced %zu samples -> %s\n", out.samples.size(), enh_out.c_str());
        return 0;
    }

    if (bench_cmd->parsed()) {
        model::ModelConfig cfg;
        cfg.d_model = bn_dmodel;
        cfg.heads = bn_heads;
        const pattern::PatternSpec spec = spec_from_flags(bn_pattern, bn_w, bn_d, bn_block);
        const auto rows = analysis::bench_kernels(spec, parse_lengths(bn_lengths), cfg, bn_reps);
        std::ostringstream csv;
        analysis::write_bench_csv(rows, csv);
        write_text(bn_out, csv.str());
        return 0;
    }

    if (data_cmd->parsed()) {
        fs::create_directories(dt_dir);
        for (int i = 0; i < dt_count; ++i) {
            auto [clean, noise] = train::make_synthetic_pair(dt_seed + i, dt_duration, dt_snr);
            dsp::Waveform noisy = clean;
            for (std::size_t t = 0; t < noisy.samples.size(); ++t)
                noisy.samples[t] += noise.samples[t];
            char name[64];
            std::snprintf(name, sizeof(name), "clean_%03d.wav", i);
            wav::write(fs::path(dt_dir) / name, clean);
            std::snprintf(name, sizeof(name), "noise_%03d.wav", i);
            wav::write(fs::path(dt_dir) / name, noise);
            std::snprintf(name, sizeof(name), "noisy_%03d.wav", i);
            wav::write(fs::path(dt_dir) / name, noisy);
        }
        std::printf("wrote %d triples to %s\n", dt_count, dt_dir.c_str());
        return 0;
    }

    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical error: %s\n", e.what());
        return 3;
    } catch (const DataFormatError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
