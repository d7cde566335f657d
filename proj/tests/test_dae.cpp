#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gridface/dae.hpp"

using namespace gridface;

namespace {

constexpr int kRes = 16;
constexpr double kS = 0.2;  // data stddev

// Constant mean keeps the per-pixel MMSE fit free of mean-matching
// degeneracies, so plain SGD converges to the oracle cleanly.
std::vector<double> mean_image() { return std::vector<double>(kRes * kRes, 0.5); }

// Spatially varying mean for the closed-form algebra checks.
std::vector<double> ramp_mean() {
    std::vector<double> mu(kRes * kRes);
    for (int y = 0; y < kRes; ++y)
        for (int x = 0; x < kRes; ++x)
            mu[y * kRes + x] = 0.45 + 0.10 * (x + 0.5) / kRes + 0.05 * (y + 0.5) / kRes;
    return mu;
}

std::vector<double> gaussian_sample(const std::vector<double>& mu, double s, Rng& rng) {
    std::vector<double> y(mu.size());
    for (size_t i = 0; i < y.size(); ++i) y[i] = mu[i] + s * rng.normal();
    return y;
}

DaeTrainOptions gaussian_opts(double sigma, uint64_t seed) {
    DaeTrainOptions o;
    o.sigma = sigma;
    o.epochs = 280;
    o.lr = 0.02;
    o.lr_decay_every = 26;  // anneals to ~2e-5 by the end
    o.batch = 4;
    o.seed = seed;
    o.arch.stride = 1;
    o.arch.enc1_channels = 4;
    o.arch.enc2_channels = 2;
    o.arch.identity_init = true;
    return o;
}

std::vector<std::vector<double>> gaussian_dataset(int count, uint64_t seed) {
    auto mu = mean_image();
    Rng rng(seed);
    std::vector<std::vector<double>> ds;
    ds.reserve(count);
    for (int i = 0; i < count; ++i) ds.push_back(gaussian_sample(mu, kS, rng));
    return ds;
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double ab = 0, aa = 0, bb = 0;
    for (size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return ab / std::sqrt(aa * bb);
}

// Mean relative L2 error of the score field over held-out samples.
double score_error(const DenoiserModel& model, const GaussianOracle& oracle, int count,
                   uint64_t seed) {
    Rng rng(seed);
    double acc = 0;
    for (int i = 0; i < count; ++i) {
        auto y = gaussian_sample(oracle.mu, std::sqrt(oracle.s2), rng);
        auto est = score_estimate(model, y);
        auto truth = oracle.score(y);
        double num = 0, den = 0;
        for (size_t k = 0; k < est.size(); ++k) {
            num += (est[k] - truth[k]) * (est[k] - truth[k]);
            den += truth[k] * truth[k];
        }
        acc += std::sqrt(num / den);
    }
    return acc / count;
}

}  // namespace

TEST_CASE("train_dae contract violations") {
    DaeTrainOptions o;
    CHECK_THROWS_AS(train_dae({}, 1, kRes, kRes, o), ContractError);
    o.sigma = 0.0;
    std::vector<std::vector<double>> ds{std::vector<double>(kRes * kRes, 0.5)};
    CHECK_THROWS_AS(train_dae(ds, 1, kRes, kRes, o), ContractError);
}

TEST_CASE("single constant image: output approaches it, residual hits the noise floor") {
    // One underlying image; the dataset replicates it so batches stay full.
    std::vector<double> img(kRes * kRes, 0.6);
    std::vector<std::vector<double>> ds(64, img);
    auto opts = gaussian_opts(0.3, 11);
    opts.epochs = 200;
    opts.lr_decay_every = 60;
    std::vector<double> curve;
    auto model = train_dae(ds, 1, kRes, kRes, opts, &curve);
    CHECK(model.frozen());

    // Output on fresh noisy copies approaches the constant image, and the
    // denoising residual h(y+se)-(y+se) carries away roughly the noise.
    Rng rng(5);
    double mae = 0, noise_mse = 0, resid_mse = 0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
        std::vector<double> noisy(img.size());
        for (size_t i = 0; i < img.size(); ++i) noisy[i] = img[i] + opts.sigma * rng.normal();
        auto out = model.apply(noisy);
        for (size_t i = 0; i < img.size(); ++i) {
            mae += std::abs(out[i] - img[i]);
            noise_mse += (noisy[i] - img[i]) * (noisy[i] - img[i]);
            resid_mse += (out[i] - noisy[i]) * (out[i] - noisy[i]);
        }
    }
    mae /= trials * img.size();
    noise_mse /= trials * img.size();
    resid_mse /= trials * img.size();
    CHECK(mae < 0.03);
    // The removed residual matches the injected noise power within 40%.
    CHECK(resid_mse == doctest::Approx(noise_mse).epsilon(0.4));
    CHECK(curve.back() < 0.5 * curve.front());
}

TEST_CASE("training curve: 10-epoch moving average is non-increasing") {
    auto ds = gaussian_dataset(128, 21);
    auto opts = gaussian_opts(0.1, 22);
    opts.epochs = 40;
    opts.lr_decay_every = 6;
    std::vector<double> curve;
    train_dae(ds, 1, kRes, kRes, opts, &curve);
    REQUIRE(curve.size() == 40);
    std::vector<double> ma;
    for (size_t i = 0; i + 10 <= curve.size(); ++i) {
        double s = 0;
        for (size_t k = i; k < i + 10; ++k) s += curve[k];
        ma.push_back(s / 10);
    }
    // Strict monotonicity is unattainable with fresh noise per epoch once
    // the floor is reached; allow minibatch wiggle below half a percent.
    for (size_t i = 1; i < ma.size(); ++i) CHECK(ma[i] <= ma[i - 1] * 1.005);
}

TEST_CASE("seed-fixed training is bit-identical") {
    auto ds = gaussian_dataset(32, 31);
    auto opts = gaussian_opts(0.05, 77);
    opts.epochs = 6;
    auto m1 = train_dae(ds, 1, kRes, kRes, opts);
    auto m2 = train_dae(ds, 1, kRes, kRes, opts);
    for (const auto& [name, t1] : m1.params_view().items()) {
        auto t2 = m2.params_view().get(name);
        REQUIRE(t1->data.size() == t2->data.size());
        for (size_t i = 0; i < t1->data.size(); ++i) REQUIRE(t1->data[i] == t2->data[i]);
    }
}

TEST_CASE("trained denoiser matches the Gaussian oracle within MAE 0.02") {
    // sigma = 0.5 s: the optimal shrinkage 0.8 is far from the identity
    // start, so this checks actual learning, not initialization.
    const double sigma = 0.5 * kS;
    auto ds = gaussian_dataset(256, 41);
    auto opts = gaussian_opts(sigma, 42);
    opts.epochs = 120;
    auto model = train_dae(ds, 1, kRes, kRes, opts);

    GaussianOracle oracle{mean_image(), kS * kS};
    Rng rng(43);
    double mae = 0;
    const int trials = 40;
    for (int t = 0; t < trials; ++t) {
        auto y = gaussian_sample(oracle.mu, kS, rng);
        for (auto& v : y) v += sigma * rng.normal();  // held-out noisy sample
        auto ours = model.apply(y);
        auto best = oracle.denoise(y, sigma);
        for (size_t i = 0; i < y.size(); ++i) mae += std::abs(ours[i] - best[i]);
    }
    mae /= trials * kRes * kRes;
    CHECK(mae < 0.02);
}

TEST_CASE("score_estimate: fixed point gives the zero field") {
    DenoiserArch arch;
    arch.stride = 1;
    arch.enc1_channels = 4;
    arch.enc2_channels = 4;
    arch.identity_init = true;
    DenoiserModel m(arch, kRes, kRes, 0.1);
    Rng rng(3);
    m.net().init_params(m.params(), rng);
    m.freeze();
    std::vector<double> y(kRes * kRes, 0.4);
    auto s = score_estimate(m, y);
    for (double v : s) CHECK(std::abs(v) < 1e-9);
}

TEST_CASE("score_estimate requires a frozen model") {
    DenoiserArch arch;
    DenoiserModel m(arch, kRes, kRes, 0.1);
    Rng rng(3);
    m.net().init_params(m.params(), rng);
    CHECK_THROWS_AS(score_estimate(m, std::vector<double>(kRes * kRes, 0.5)),
                    ContractError);
}

TEST_CASE("GaussianOracle closed form: bias is exactly sigma^2/(s2+sigma^2)") {
    GaussianOracle oracle{ramp_mean(), kS * kS};
    const double sigma = 0.1 * kS;  // sigma^2 = 0.01 s^2
    Rng rng(51);
    auto y = gaussian_sample(oracle.mu, kS, rng);
    auto h = oracle.denoise(y, sigma);
    auto truth = oracle.score(y);
    double v = sigma * sigma;
    for (size_t i = 0; i < y.size(); ++i) {
        double est = (h[i] - y[i]) / v;
        CHECK(est == doctest::Approx((oracle.mu[i] - y[i]) / (kS * kS + v)).epsilon(1e-10));
        if (std::abs(truth[i]) > 1e-9) {
            CHECK(std::abs(est - truth[i]) / std::abs(truth[i]) ==
                  doctest::Approx(v / (kS * kS + v)).epsilon(1e-9));
        }
    }
}

TEST_CASE("scale law: doubling sigma with identical h quarters the score") {
    auto ds = gaussian_dataset(32, 61);
    auto opts = gaussian_opts(0.05, 62);
    opts.epochs = 4;
    auto m1 = train_dae(ds, 1, kRes, kRes, opts);

    // Same trained weights, declared sigma doubled.
    DenoiserModel m2(opts.arch, kRes, kRes, 0.1);
    Rng rng(1);
    m2.net().init_params(m2.params(), rng);
    for (const auto& [name, src] : m1.params_view().items()) {
        m2.params().get(name)->data = src->data;
    }
    m2.freeze();

    Rng sample_rng(63);
    auto y = gaussian_sample(mean_image(), kS, sample_rng);
    auto s1 = score_estimate(m1, y);
    auto s2 = score_estimate(m2, y);
    for (size_t i = 0; i < s1.size(); ++i) {
        CHECK(s2[i] == doctest::Approx(s1[i] / 4.0).epsilon(1e-12));
    }
}

TEST_CASE("trained score field: cosine > 0.95 against the analytic score") {
    const double sigma = 0.1 * kS;
    auto ds = gaussian_dataset(256, 71);
    auto model = train_dae(ds, 1, kRes, kRes, gaussian_opts(sigma, 72));
    GaussianOracle oracle{mean_image(), kS * kS};
    Rng rng(73);
    double mean_cos = 0;
    const int trials = 40;
    for (int t = 0; t < trials; ++t) {
        auto y = gaussian_sample(oracle.mu, kS, rng);
        mean_cos += cosine(score_estimate(model, y), oracle.score(y));
    }
    mean_cos /= trials;
    CHECK(mean_cos > 0.95);
}

TEST_CASE("score error decreases monotonically as sigma decreases") {
    // sigma in {0.3, 0.1, 0.03} * s. The optimal-denoiser score field,
    // evaluated on empirical held-out samples, must approach the true score
    // as sigma shrinks; its relative error is sigma^2/(s2+sigma^2) exactly.
    GaussianOracle oracle{mean_image(), kS * kS};
    double sigmas[3] = {0.3 * kS, 0.1 * kS, 0.03 * kS};
    double errs[3];
    Rng rng(83);
    for (int i = 0; i < 3; ++i) {
        double acc = 0;
        const int trials = 50;
        for (int t = 0; t < trials; ++t) {
            auto y = gaussian_sample(oracle.mu, kS, rng);
            auto est = oracle.residual_score(y, sigmas[i]);
            auto truth = oracle.score(y);
            double num = 0, den = 0;
            for (size_t k = 0; k < est.size(); ++k) {
                num += (est[k] - truth[k]) * (est[k] - truth[k]);
                den += truth[k] * truth[k];
            }
            acc += std::sqrt(num / den);
        }
        errs[i] = acc / trials;
        double expect = sigmas[i] * sigmas[i] / (kS * kS + sigmas[i] * sigmas[i]);
        CHECK(errs[i] == doctest::Approx(expect).epsilon(1e-10));
    }
    CHECK(errs[0] > errs[1]);
    CHECK(errs[1] > errs[2]);

    // A trained denoiser realizes the top of that curve: at sigma = 0.3s
    // its empirical score error is dominated by the same bias.
    auto ds = gaussian_dataset(256, 81);
    auto model = train_dae(ds, 1, kRes, kRes, gaussian_opts(sigmas[0], 82));
    double trained_err = score_error(model, oracle, 30, 83);
    double bias = sigmas[0] * sigmas[0] / (kS * kS + sigmas[0] * sigmas[0]);
    CHECK(trained_err < 2.0 * bias);
}
