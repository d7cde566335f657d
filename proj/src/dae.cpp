#include "gridface/dae.hpp"

#include <algorithm>
#include <numeric>

namespace gridface {

DenoiserModel::DenoiserModel(const DenoiserArch& arch, int height, int width, double sigma)
    : net_(arch, height, width), height_(height), width_(width), sigma_(sigma) {
    GF_REQUIRE(sigma > 0.0, "DenoiserModel: sigma must be positive");
}

std::vector<double> DenoiserModel::apply(const std::vector<double>& image) const {
    int c = net_.arch().in_channels;
    GF_REQUIRE(image.size() == static_cast<size_t>(c) * height_ * width_,
               "DenoiserModel: image shape mismatch");
    auto x = Tensor::create({1, c, height_, width_}, image);
    auto y = net_.forward(nullptr, params_, x);
    return y->data;
}

DenoiserModel train_dae(const std::vector<std::vector<double>>& dataset, int channels, int height,
                        int width, const DaeTrainOptions& opts,
                        std::vector<double>* epoch_loss) {
    GF_REQUIRE(!dataset.empty(), "train_dae: dataset must be non-empty");
    GF_REQUIRE(opts.sigma > 0.0, "train_dae: sigma must be positive");
    GF_REQUIRE(opts.epochs >= 1 && opts.batch >= 1, "train_dae: bad schedule");
    size_t raster = static_cast<size_t>(channels) * height * width;
    for (const auto& img : dataset) {
        GF_REQUIRE(img.size() == raster, "train_dae: inconsistent image sizes");
    }

    DenoiserArch arch = opts.arch;
    arch.in_channels = channels;
    DenoiserModel model(arch, height, width, opts.sigma);
    Rng init_rng(Rng::derive(opts.seed, 0x0DAE));
    model.net().init_params(model.params(), init_rng);

    Rng rng(Rng::derive(opts.seed, 0x1DAE));
    std::vector<size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), size_t{0});

    double lr = opts.lr;
    for (int epoch = 0; epoch < opts.epochs; ++epoch) {
        if (opts.lr_decay_every > 0 && epoch > 0 && epoch % opts.lr_decay_every == 0) {
            lr *= opts.lr_decay_factor;
        }
        // Fisher-Yates with the deterministic stream.
        for (size_t i = order.size(); i > 1; --i) {
            size_t j = rng.below(i);
            std::swap(order[i - 1], order[j]);
        }
        double loss_sum = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += opts.batch) {
            size_t b = std::min(static_cast<size_t>(opts.batch), order.size() - start);
            std::vector<double> clean(b * raster), noisy(b * raster);
            for (size_t e = 0; e < b; ++e) {
                const auto& img = dataset[order[start + e]];
                for (size_t i = 0; i < raster; ++i) {
                    clean[e * raster + i] = img[i];
                    noisy[e * raster + i] = img[i] + opts.sigma * rng.normal();
                }
            }
            Tape tape;
            auto clean_t = Tensor::create({static_cast<int>(b), channels, height, width},
                                          std::move(clean));
            auto noisy_t = Tensor::create({static_cast<int>(b), channels, height, width},
                                          std::move(noisy));
            auto out = model.net().forward(&tape, model.params(), noisy_t);
            auto loss = ops::mse(&tape, out, clean_t);
            tape.backward(loss);
            sgd_step(model.params(), lr);
            loss_sum += loss->value() * static_cast<double>(b);
            seen += b;
        }
        if (epoch_loss) epoch_loss->push_back(loss_sum / static_cast<double>(seen));
    }
    model.freeze();
    return model;
}

std::vector<double> score_estimate(const DenoiserModel& model, const std::vector<double>& y) {
    GF_REQUIRE(model.frozen(), "score_estimate: model must be frozen");
    std::vector<double> h = model.apply(y);
    double inv = 1.0 / (model.sigma() * model.sigma());
    for (size_t i = 0; i < h.size(); ++i) h[i] = (h[i] - y[i]) * inv;
    return h;
}

std::vector<double> GaussianOracle::denoise(const std::vector<double>& y, double sigma) const {
    GF_REQUIRE(s2 > 0.0, "GaussianOracle: s2 must be positive");
    GF_REQUIRE(y.size() == mu.size(), "GaussianOracle: shape mismatch");
    double v = sigma * sigma;
    std::vector<double> out(y.size());
    for (size_t i = 0; i < y.size(); ++i) out[i] = (s2 * y[i] + v * mu[i]) / (s2 + v);
    return out;
}

std::vector<double> GaussianOracle::score(const std::vector<double>& y) const {
    GF_REQUIRE(y.size() == mu.size(), "GaussianOracle: shape mismatch");
    std::vector<double> out(y.size());
    for (size_t i = 0; i < y.size(); ++i) out[i] = (mu[i] - y[i]) / s2;
    return out;
}

std::vector<double> GaussianOracle::residual_score(const std::vector<double>& y,
                                                   double sigma) const {
    GF_REQUIRE(sigma > 0.0, "GaussianOracle: sigma must be positive");
    auto h = denoise(y, sigma);
    double inv = 1.0 / (sigma * sigma);
    for (size_t i = 0; i < h.size(); ++i) h[i] = (h[i] - y[i]) * inv;
    return h;
}

}  // namespace gridface
