#pragma once

#include <cstdint>
#include <string>

namespace gridface {

// One experiment, one config. Text format is line-oriented `key = value`
// with `#` comments; unknown keys are errors.
struct ExperimentConfig {
    // Objective
    int cells = 8;               // grid n; 0 = no rectifier (baseline)
    double lambda_reg = 10.0;
    double lambda_de = 1.0;
    double alpha = 0.3;

    // Denoiser
    double dae_sigma = 0.05;
    int dae_epochs = 60;
    double dae_lr = 0.03;
    int dae_batch = 8;

    // Dataset synthesis
    int resolution = 64;
    int identities = 200;        // total; split below comes off this count
    int val_identities = 20;
    int test_identities = 40;
    int images_per_identity = 20;
    double train_noise = 0.10;   // sigma_lm of the train/val splits, units of d
    double projective_jitter = 0.08;

    // Joint training
    int batch = 32;              // triplets per SGD step
    int epochs = 12;
    int steps_per_epoch = 30;
    double lr = 0.05;
    double lr_decay = 10.0;
    int patience = 3;
    uint64_t seed = 1;

    // Ablation switches
    bool no_reg = false;
    bool sequential = false;

    int train_identities() const { return identities - val_identities - test_identities; }

    // Canonical text form: fixed key order, round-trippable values.
    std::string serialize() const;
    static ExperimentConfig parse_text(const std::string& text);
    static ExperimentConfig load(const std::string& path);
    void save(const std::string& path) const;

    uint64_t digest() const;
    void validate() const;
};

uint64_t fnv1a64(const std::string& s);

}  // namespace gridface
