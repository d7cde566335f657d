#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "gridface/gradcheck.hpp"
#include "gridface/warp.hpp"

using namespace gridface;

namespace {

// Independent scalar reference sampler: border-clamped bilinear lookup at a
// normalized coordinate, written without any of the production structures.
double reference_sample(const std::vector<double>& img, int h, int w, double sx, double sy) {
    double u = sx * w - 0.5;
    double v = sy * h - 0.5;
    int x0 = static_cast<int>(std::floor(u));
    int y0 = static_cast<int>(std::floor(v));
    double fx = u - x0, fy = v - y0;
    auto at = [&](int y, int x) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return img[static_cast<size_t>(y) * w + x];
    };
    return (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
           fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
}

std::vector<double> smooth_image(int h, int w, uint64_t seed) {
    Rng rng(seed);
    double a1 = rng.uniform(0.1, 0.25), f1 = rng.uniform(1.0, 2.0), p1 = rng.uniform(0, 6.28);
    double a2 = rng.uniform(0.05, 0.2), f2 = rng.uniform(1.0, 2.0), p2 = rng.uniform(0, 6.28);
    std::vector<double> img(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img[static_cast<size_t>(y) * w + x] =
                0.5 + a1 * std::sin(6.2831853 * f1 * (x + 0.5) / w + p1) +
                a2 * std::cos(6.2831853 * f2 * (y + 0.5) / h + p2);
    return img;
}

std::vector<ResidualParams> zero_params(int n) { return std::vector<ResidualParams>(n * n); }

TensorPtr params_tensor(const std::vector<ResidualParams>& p, bool rg = false) {
    std::vector<double> flat;
    for (const auto& r : p) flat.insert(flat.end(), r.h.begin(), r.h.end());
    int count = static_cast<int>(flat.size());
    return Tensor::create({count}, std::move(flat), rg);
}

}  // namespace

TEST_CASE("identity field: every pixel center maps to itself and is valid") {
    for (int n : {1, 2, 4, 8}) {
        GridTemplate grid(n);
        WarpField f = build_warp_field(zero_params(n), grid, 16, 16);
        for (int v = 0; v < 16; ++v) {
            for (int u = 0; u < 16; ++u) {
                size_t i = v * 16 + u;
                REQUIRE(f.valid[i] == 1);
                CHECK(f.sx[i] == doctest::Approx((u + 0.5) / 16.0).epsilon(1e-15));
                CHECK(f.sy[i] == doctest::Approx((v + 0.5) / 16.0).epsilon(1e-15));
            }
        }
    }
}

TEST_CASE("translation by 2/W moves the field exactly two output pixels") {
    const int res = 32;
    GridTemplate grid(1);
    std::vector<ResidualParams> p(1);
    p[0].h[2] = 2.0 / res;
    WarpField f = build_warp_field(p, grid, res, res);
    for (int v = 0; v < res; ++v) {
        for (int u = 0; u < res; ++u) {
            size_t i = v * res + u;
            CHECK(f.sx[i] == doctest::Approx((u + 2 + 0.5) / res).epsilon(1e-13));
            CHECK(f.sy[i] == doctest::Approx((v + 0.5) / res).epsilon(1e-13));
        }
    }
}

TEST_CASE("projective sink below eps masks exactly the failing pixels") {
    // w(q) = 1 + h7*qx vanishes along a vertical line; pixels whose centers
    // land within eps of it are masked, the rest stay valid.
    const int res = 16;
    GridTemplate grid(1);
    std::vector<ResidualParams> p(1);
    double qx_target = (7 + 0.5) / res;  // center of column 7
    p[0].h[6] = -1.0 / qx_target;
    WarpField f = build_warp_field(p, grid, res, res);
    for (int v = 0; v < res; ++v) {
        for (int u = 0; u < res; ++u) {
            size_t i = v * res + u;
            double qx = (u + 0.5) / res;
            bool expect_valid = std::abs(1.0 + p[0].h[6] * qx) > kDehomogEps;
            REQUIRE(static_cast<bool>(f.valid[i]) == expect_valid);
        }
    }
    int masked = 0;
    for (auto b : f.valid) masked += b ? 0 : 1;
    CHECK(masked == res);  // exactly column 7
}

TEST_CASE("masked pixels output zero through the sampler") {
    const int res = 16;
    GridTemplate grid(1);
    std::vector<ResidualParams> p(1);
    p[0].h[6] = -1.0 / ((7 + 0.5) / res);
    auto img = Tensor::create({1, res, res}, smooth_image(res, res, 4));
    auto out = rectify(nullptr, img, params_tensor(p), grid);
    for (int v = 0; v < res; ++v) CHECK(out->data[v * res + 7] == 0.0);
}

TEST_CASE("rectify with zero residuals reproduces the input bit-exactly") {
    auto img_data = smooth_image(16, 16, 42);
    auto img = Tensor::create({1, 16, 16}, img_data);
    for (int n : {1, 2, 4, 8}) {
        GridTemplate grid(n);
        auto out = rectify(nullptr, img, params_tensor(zero_params(n)), grid);
        REQUIRE(out->data.size() == img_data.size());
        for (size_t i = 0; i < img_data.size(); ++i) CHECK(out->data[i] == img_data[i]);
    }
}

TEST_CASE("midpoint of a 2x2 block valued {0,0,1,1} samples to 0.5") {
    auto img = Tensor::create({1, 2, 2}, {0.0, 0.0, 1.0, 1.0});
    FieldNode field;
    field.height = 1;
    field.width = 1;
    field.valid = {1};
    field.coords = Tensor::create({2, 1, 1}, {0.5, 0.5});
    auto out = sample_bilinear(nullptr, img, field);
    CHECK(out->data[0] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("random smooth fields match the reference sampler to 1e-12") {
    Rng rng(7);
    const int res = 24;
    auto img_data = smooth_image(res, res, 99);
    auto img = Tensor::create({1, res, res}, img_data);
    for (int trial = 0; trial < 5; ++trial) {
        GridTemplate grid(2);
        std::vector<ResidualParams> p(4);
        for (auto& r : p)
            for (auto& h : r.h) h = rng.uniform(-0.08, 0.08);
        WarpField f = build_warp_field(p, grid, res, res);
        auto out = rectify(nullptr, img, params_tensor(p), grid);
        for (size_t i = 0; i < f.size(); ++i) {
            if (!f.valid[i]) continue;
            double expect = reference_sample(img_data, res, res, f.sx[i], f.sy[i]);
            CHECK(std::abs(out->data[i] - expect) < 1e-12);
        }
    }
}

TEST_CASE("round trip through a similarity-like homography: PSNR > 40 dB") {
    const int res = 64;
    auto pattern = smooth_image(res, res, 1234);
    auto img = Tensor::create({1, res, res}, pattern);

    double angle = 5.0 * 3.14159265 / 180.0, scale = 1.05;
    Homography h;
    h.m = {scale * std::cos(angle), -scale * std::sin(angle), 0.02,
           scale * std::sin(angle), scale * std::cos(angle), -0.01,
           0.0, 0.0, 1.0};
    // Recenter about the image middle so content stays in frame.
    Point2 c = h.apply({0.5, 0.5});
    h.m[2] += 0.5 - c.x;
    h.m[5] += 0.5 - c.y;

    GridTemplate grid(1);
    auto warped = rectify(nullptr, img, params_tensor({h.to_residual()}), grid);
    auto restored = rectify(nullptr, warped, params_tensor({h.inverse().to_residual()}), grid);

    const int margin = 8;
    double mse = 0;
    int count = 0;
    for (int y = margin; y < res - margin; ++y) {
        for (int x = margin; x < res - margin; ++x) {
            double d = restored->data[y * res + x] - pattern[y * res + x];
            mse += d * d;
            ++count;
        }
    }
    mse /= count;
    double psnr = 10.0 * std::log10(1.0 / mse);
    CHECK(psnr > 40.0);
}

TEST_CASE("cell locality: perturbing one cell only changes its own pixels") {
    const int res = 32;
    const int n = 4;
    GridTemplate grid(n);
    auto img = Tensor::create({1, res, res}, smooth_image(res, res, 5));
    auto base = rectify(nullptr, img, params_tensor(zero_params(n)), grid);

    Rng rng(17);
    for (int trial = 0; trial < 10; ++trial) {
        int ti = static_cast<int>(rng.below(n)), tj = static_cast<int>(rng.below(n));
        std::vector<ResidualParams> p = zero_params(n);
        for (auto& h : p[grid.cell_linear(ti, tj)].h) h = rng.uniform(-0.1, 0.1);
        auto out = rectify(nullptr, img, params_tensor(p), grid);
        for (int v = 0; v < res; ++v) {
            for (int u = 0; u < res; ++u) {
                auto cell = grid.cell_of({(u + 0.5) / res, (v + 0.5) / res});
                bool inside = cell.i == ti && cell.j == tj;
                if (!inside) REQUIRE(out->data[v * res + u] == base->data[v * res + u]);
            }
        }
    }
}

TEST_CASE("outputs stay in [0,1] for inputs in [0,1]") {
    Rng rng(21);
    const int res = 16;
    std::vector<double> img_data(res * res);
    for (auto& v : img_data) v = rng.uniform();
    auto img = Tensor::create({1, res, res}, img_data);
    for (int trial = 0; trial < 100; ++trial) {
        int n = 1 << rng.below(3);
        GridTemplate grid(n);
        std::vector<ResidualParams> p(n * n);
        for (auto& r : p)
            for (auto& h : r.h) h = rng.uniform(-0.3, 0.3);
        auto out = rectify(nullptr, img, params_tensor(p), grid);
        for (double v : out->data) {
            REQUIRE(v >= 0.0);
            REQUIRE(v <= 1.0);
        }
    }
}

TEST_CASE("translation equivariance on a linear ramp") {
    const int res = 32;
    std::vector<double> ramp(res * res);
    for (int y = 0; y < res; ++y)
        for (int x = 0; x < res; ++x) ramp[y * res + x] = (x + 0.5) / res;
    auto img = Tensor::create({1, res, res}, ramp);
    GridTemplate grid(1);
    Rng rng(3);
    for (int trial = 0; trial < 10; ++trial) {
        double t = rng.uniform(-0.1, 0.1);
        std::vector<ResidualParams> p(1);
        p[0].h[2] = t;
        auto out = rectify(nullptr, img, params_tensor(p), grid);
        for (int y = 8; y < res - 8; ++y) {
            for (int x = 8; x < res - 8; ++x) {
                double expect = (x + 0.5) / res + t;
                CHECK(std::abs(out->data[y * res + x] - expect) < 1e-10);
            }
        }
    }
}

TEST_CASE("warp gradients pass finite differences at 10 random configurations") {
    Rng rng(55);
    for (int trial = 0; trial < 10; ++trial) {
        int n = 1 + static_cast<int>(rng.below(2));
        GridTemplate grid(n);
        const int res = 12;
        auto img = Tensor::create({1, res, res}, smooth_image(res, res, 1000 + trial), true);
        std::vector<double> flat(8 * n * n);
        for (auto& v : flat) v = rng.uniform(-0.2, 0.2);
        auto params = Tensor::create({8 * n * n}, flat, true);
        FdCheckOptions opts;
        opts.rtol = 1e-4;
        opts.atol = 1e-6;
        auto res_check = check_gradients(
            [&](Tape& t) {
                auto out = rectify(&t, img, params, grid);
                return ops::mean(&t, ops::mul(&t, out, out));
            },
            {img, params}, opts);
        CHECK(res_check.pass);
    }
}

TEST_CASE("map_landmark_to_rectified: identity, translation, round trip") {
    GridTemplate g1(1);
    std::vector<ResidualParams> zero1(1);
    auto r = map_landmark_to_rectified({0.3, 0.7}, zero1, g1);
    CHECK_FALSE(r.approximate);
    CHECK(r.q.x == doctest::Approx(0.3).epsilon(1e-14));
    CHECK(r.q.y == doctest::Approx(0.7).epsilon(1e-14));

    std::vector<ResidualParams> trans(1);
    trans[0].h[2] = 0.1;
    r = map_landmark_to_rectified({0.5, 0.5}, trans, g1);
    CHECK_FALSE(r.approximate);
    CHECK(r.q.x == doctest::Approx(0.4).epsilon(1e-12));

    Rng rng(9);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 1 + static_cast<int>(rng.below(4));
        GridTemplate g(n);
        std::vector<ResidualParams> p(n * n);
        for (auto& rr : p)
            for (auto& h : rr.h) h = rng.uniform(-0.02, 0.02);
        Point2 probe{rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9)};
        auto res = map_landmark_to_rectified(probe, p, g);
        if (res.approximate) continue;  // fold-over tolerated in this property
        auto cell = g.cell_of(res.q);
        auto h = Homography::from_residual(p[g.cell_linear(cell)]);
        Point2 back = h.apply(res.q);
        CHECK(std::abs(back.x - probe.x) < 1e-8);
        CHECK(std::abs(back.y - probe.y) < 1e-8);
    }
}
