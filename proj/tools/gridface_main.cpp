// gridface: synthetic-data face rectification pipeline driver.
//
// Exit codes: 0 success, 2 config/usage error, 3 contract violation,
// 4 numerical failure.

#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "gridface/gradcheck.hpp"
#include "gridface/pipeline.hpp"

using namespace gridface;

int main(int argc, char** argv) {
    CLI::App app{"gridface: piecewise-homography face rectification at desk scale"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_path, dae_path, ckpt_path, in_path, report_path;
    std::string resume_path, axis;
    bool no_reg = false, sequential = false;
    int cells_override = -1;

    auto* synth = app.add_subcommand("synth", "generate the synthetic dataset");
    synth->add_option("--config", config_path, "config file")->required();
    synth->add_option("--out", out_path, "output dataset directory")->required();

    auto* tdae = app.add_subcommand("train-dae", "train the canonical-view denoiser");
    tdae->add_option("--config", config_path)->required();
    tdae->add_option("--data", data_dir, "dataset directory from `synth`")->required();
    tdae->add_option("--out", out_path, "denoiser checkpoint path")->required();

    auto* train = app.add_subcommand("train", "joint rectifier + embedding training");
    train->add_option("--config", config_path)->required();
    train->add_option("--data", data_dir)->required();
    train->add_option("--dae", dae_path, "denoiser checkpoint");
    train->add_option("--out", out_path, "model checkpoint path")->required();
    train->add_option("--metrics", report_path, "metrics CSV path");
    train->add_option("--resume", resume_path, "checkpoint to resume from");
    train->add_flag("--no-reg", no_reg, "disable the denoiser regularizer");
    train->add_flag("--sequential", sequential, "rectifier first, then embedding");
    train->add_option("--cells", cells_override, "grid cells per side (0 = baseline)");

    auto* eval = app.add_subcommand("eval", "verification + landmark metrics on the test splits");
    eval->add_option("--ckpt", ckpt_path)->required();
    eval->add_option("--data", data_dir)->required();
    eval->add_option("--report", report_path, "report CSV path")->required();
    eval->add_option("--dae", dae_path, "denoiser checkpoint for residual metrics");

    auto* warp = app.add_subcommand("warp", "rectify one image with a trained checkpoint");
    warp->add_option("--ckpt", ckpt_path)->required();
    warp->add_option("--in", in_path)->required();
    warp->add_option("--out", out_path)->required();

    auto* gc = app.add_subcommand("gradcheck", "finite-difference suite over all ops");

    auto* ablate = app.add_subcommand("ablate", "run one ablation axis");
    ablate->add_option("--config", config_path)->required();
    ablate->add_option("--data", data_dir)->required();
    ablate->add_option("--dae", dae_path);
    ablate->add_option("--axis", axis, "cells, reg or joint")->required();
    ablate->add_option("--out", out_path, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            run_synth(ExperimentConfig::load(config_path), out_path);
        } else if (tdae->parsed()) {
            run_train_dae(ExperimentConfig::load(config_path), data_dir, out_path);
        } else if (train->parsed()) {
            ExperimentConfig cfg = ExperimentConfig::load(config_path);
            if (no_reg) cfg.no_reg = true;
            if (sequential) cfg.sequential = true;
            if (cells_override >= 0) cfg.cells = cells_override;
            cfg.validate();
            std::string metrics = report_path.empty() ? out_path + ".metrics.csv" : report_path;
            run_train_joint(cfg, data_dir, dae_path, out_path, metrics, resume_path);
        } else if (eval->parsed()) {
            EvalReport rep = run_eval(ckpt_path, data_dir, report_path, dae_path);
            for (const auto& le : rep.levels) {
                std::printf("level %.2f  TAR@1e-1 %.4f  TAR@1e-2 %.4f  lm-std %.5f (raw %.5f)\n",
                            le.noise_level, le.tar_far1e1, le.tar_far1e2, le.lm_std_rect,
                            le.lm_std_raw);
            }
        } else if (warp->parsed()) {
            run_warp_cmd(ckpt_path, in_path, out_path);
        } else if (gc->parsed()) {
            auto reports = run_gradcheck_suite(true);
            if (!gradcheck_all_passed(reports)) {
                std::fprintf(stderr, "gradcheck: FAILED\n");
                return 4;
            }
            std::printf("gradcheck: all ops within tolerance\n");
        } else if (ablate->parsed()) {
            run_ablation(ExperimentConfig::load(config_path), data_dir, dae_path, axis, out_path);
        }
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 2;
    } catch (const ContractError& e) {
        std::fprintf(stderr, "contract violation: %s\n", e.what());
        return 3;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 4;
    }
    return 0;
}
