#pragma once

#include <memory>
#include <vector>

#include "gridface/models.hpp"

namespace gridface {

// A trained denoiser plus the noise level it was trained at. Once frozen,
// the parameters are immutable and the model only serves inference.
class DenoiserModel {
public:
    DenoiserModel(const DenoiserArch& arch, int height, int width, double sigma);

    // Pure inference on a [C*H*W] raster.
    std::vector<double> apply(const std::vector<double>& image) const;

    void freeze() { frozen_ = true; }
    bool frozen() const { return frozen_; }
    double sigma() const { return sigma_; }
    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return net_.arch().in_channels; }
    const DenoiserNet& net() const { return net_; }

    ParameterStore& params() {
        GF_REQUIRE(!frozen_, "DenoiserModel: parameters are frozen");
        return params_;
    }
    const ParameterStore& params_view() const { return params_; }

private:
    DenoiserNet net_;
    ParameterStore params_;
    int height_, width_;
    double sigma_;
    bool frozen_ = false;
};

struct DaeTrainOptions {
    double sigma = 0.05;
    int epochs = 40;
    double lr = 0.05;
    int lr_decay_every = 0;      // epochs between decays; 0 = constant lr
    double lr_decay_factor = 0.5;
    int batch = 8;
    uint64_t seed = 1;
    DenoiserArch arch;
};

// Minimizes the empirical denoising MSE with SGD; fresh noise is drawn per
// sample per epoch. Returns the model frozen. epoch_loss, when supplied,
// receives the per-epoch mean denoising MSE.
DenoiserModel train_dae(const std::vector<std::vector<double>>& dataset, int channels, int height,
                        int width, const DaeTrainOptions& opts,
                        std::vector<double>* epoch_loss = nullptr);

// (h(y) - y) / sigma^2, the model's approximation to the data score at y.
// The model must be frozen.
std::vector<double> score_estimate(const DenoiserModel& model, const std::vector<double>& y);

// Closed-form optimal denoiser for per-pixel N(mu, s2) data under additive
// N(0, sigma^2) noise: h(y) = (s2*y + sigma^2*mu) / (s2 + sigma^2).
struct GaussianOracle {
    std::vector<double> mu;
    double s2 = 1.0;

    std::vector<double> denoise(const std::vector<double>& y, double sigma) const;
    std::vector<double> score(const std::vector<double>& y) const;  // (mu - y) / s2

    // The denoiser-residual score approximation with the optimal h plugged
    // in: (h(y) - y) / sigma^2 = (mu - y) / (s2 + sigma^2). Its relative
    // error against the true score is exactly sigma^2 / (s2 + sigma^2).
    std::vector<double> residual_score(const std::vector<double>& y, double sigma) const;
};

}  // namespace gridface
