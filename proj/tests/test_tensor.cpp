#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gridface/gradcheck.hpp"
#include "gridface/ops.hpp"
#include "gridface/rng.hpp"

using namespace gridface;

namespace {

TensorPtr randn(std::vector<int> shape, Rng& rng, double scale = 1.0, bool rg = false) {
    int64_t n = 1;
    for (int e : shape) n *= e;
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal(0.0, scale);
    return Tensor::create(std::move(shape), std::move(v), rg);
}

// Independent quadruple-loop cross-correlation oracle.
std::vector<double> conv_oracle(const std::vector<double>& in, int n, int c, int h, int w,
                                const std::vector<double>& ker, int k, int kh, int kw, int stride,
                                int pad, int* oh_out, int* ow_out) {
    int oh = (h + 2 * pad - kh) / stride + 1;
    int ow = (w + 2 * pad - kw) / stride + 1;
    std::vector<double> out(static_cast<size_t>(n) * k * oh * ow, 0.0);
    for (int ni = 0; ni < n; ++ni)
        for (int ki = 0; ki < k; ++ki)
            for (int y = 0; y < oh; ++y)
                for (int x = 0; x < ow; ++x) {
                    double acc = 0;
                    for (int ci = 0; ci < c; ++ci)
                        for (int dy = 0; dy < kh; ++dy)
                            for (int dx = 0; dx < kw; ++dx) {
                                int iy = y * stride - pad + dy;
                                int ix = x * stride - pad + dx;
                                if (iy < 0 || iy >= h || ix < 0 || ix >= w) continue;
                                acc += in[((static_cast<size_t>(ni) * c + ci) * h + iy) * w + ix] *
                                       ker[((static_cast<size_t>(ki) * c + ci) * kh + dy) * kw + dx];
                            }
                    out[((static_cast<size_t>(ni) * k + ki) * oh + y) * ow + x] = acc;
                }
    *oh_out = oh;
    *ow_out = ow;
    return out;
}

}  // namespace

TEST_CASE("conv2d all-ones 3x3 gives 9") {
    auto in = Tensor::create({1, 1, 3, 3}, std::vector<double>(9, 1.0));
    auto ker = Tensor::create({1, 1, 3, 3}, std::vector<double>(9, 1.0));
    auto out = ops::conv2d(nullptr, in, ker, 1, 0);
    CHECK(out->shape == std::vector<int>{1, 1, 1, 1});
    CHECK(out->data[0] == doctest::Approx(9.0).epsilon(1e-15));
}

TEST_CASE("conv2d identity kernel reproduces input") {
    Rng rng(3);
    auto in = randn({1, 1, 5, 7}, rng);
    std::vector<double> k(9, 0.0);
    k[4] = 1.0;
    auto ker = Tensor::create({1, 1, 3, 3}, k);
    auto out = ops::conv2d(nullptr, in, ker, 1, 1);
    REQUIRE(out->shape == in->shape);
    for (size_t i = 0; i < in->data.size(); ++i) CHECK(out->data[i] == in->data[i]);
}

TEST_CASE("conv2d matches the naive loop oracle") {
    Rng rng(11);
    auto in = randn({1, 2, 5, 5}, rng);
    auto ker = randn({3, 2, 3, 3}, rng);
    auto out = ops::conv2d(nullptr, in, ker, 2, 1);
    int oh, ow;
    auto expect = conv_oracle(in->data, 1, 2, 5, 5, ker->data, 3, 3, 3, 2, 1, &oh, &ow);
    REQUIRE(out->shape == std::vector<int>{1, 3, oh, ow});
    for (size_t i = 0; i < expect.size(); ++i) {
        CHECK(std::abs(out->data[i] - expect[i]) < 1e-12);
    }
}

TEST_CASE("conv2d shape contract violations throw") {
    auto in = Tensor::create({1, 1, 2, 2}, std::vector<double>(4, 0.0));
    auto ker = Tensor::create({1, 1, 3, 3}, std::vector<double>(9, 0.0));
    CHECK_THROWS_AS(ops::conv2d(nullptr, in, ker, 1, 0), ContractError);
    auto ker2 = Tensor::create({1, 2, 3, 3}, std::vector<double>(18, 0.0));
    auto in2 = Tensor::create({1, 1, 4, 4}, std::vector<double>(16, 0.0));
    CHECK_THROWS_AS(ops::conv2d(nullptr, in2, ker2, 1, 1), ContractError);
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
    // <conv(x), y> == <x, conv_transpose(y)> for matching dims.
    Rng rng(17);
    auto x = randn({1, 2, 6, 6}, rng);
    auto ker = randn({3, 2, 3, 3}, rng);
    auto y_shape_probe = ops::conv2d(nullptr, x, ker, 2, 1);
    auto y = randn(y_shape_probe->shape, rng);
    auto yt = ops::conv2d_transpose(nullptr, y, ker, 2, 1, 6, 6);
    double lhs = 0, rhs = 0;
    for (size_t i = 0; i < y->data.size(); ++i) lhs += y_shape_probe->data[i] * y->data[i];
    for (size_t i = 0; i < x->data.size(); ++i) rhs += x->data[i] * yt->data[i];
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("backward: quadratic sum grad") {
    auto x = Tensor::create({3}, {1, 2, 3}, true);
    Tape tape;
    auto y = ops::sum(&tape, ops::mul(&tape, x, x));
    tape.backward(y);
    CHECK(x->grad[0] == doctest::Approx(2.0));
    CHECK(x->grad[1] == doctest::Approx(4.0));
    CHECK(x->grad[2] == doctest::Approx(6.0));
}

TEST_CASE("backward: constant root leaves zero grads") {
    auto x = Tensor::create({3}, {1, 2, 3}, true);
    auto c = Tensor::scalar(5.0);
    Tape tape;
    auto y = ops::scale(&tape, c, 2.0);
    tape.backward(y);
    for (double g : x->grad_view()) CHECK(g == 0.0);
}

TEST_CASE("backward: non-scalar root is a contract violation") {
    auto x = Tensor::create({2}, {1, 2}, true);
    Tape tape;
    auto y = ops::mul(&tape, x, x);
    CHECK_THROWS_AS(tape.backward(y), ContractError);
}

TEST_CASE("backward accumulates across repeated calls") {
    auto x = Tensor::create({2}, {1.0, -2.0}, true);
    Tape tape;
    auto y = ops::sum(&tape, ops::mul(&tape, x, x));
    tape.backward(y);
    tape.backward(y);
    CHECK(x->grad[0] == doctest::Approx(4.0));
    CHECK(x->grad[1] == doctest::Approx(-8.0));
}

TEST_CASE("backward linearity in op composition") {
    Rng rng(23);
    auto x = randn({6}, rng, 1.0, true);
    double a = 1.7, b = -0.4;

    auto grad_of = [&](auto&& make) {
        x->zero_grad();
        Tape tape;
        tape.backward(make(tape));
        return x->grad;
    };
    auto gf = grad_of([&](Tape& t) { return ops::sum(&t, ops::mul(&t, x, x)); });
    auto gg = grad_of([&](Tape& t) { return ops::mean(&t, ops::relu(&t, x)); });
    auto gc = grad_of([&](Tape& t) {
        auto f = ops::sum(&t, ops::mul(&t, x, x));
        auto g = ops::mean(&t, ops::relu(&t, x));
        return ops::add(&t, ops::scale(&t, f, a), ops::scale(&t, g, b));
    });
    for (size_t i = 0; i < gf.size(); ++i) {
        CHECK(std::abs(gc[i] - (a * gf[i] + b * gg[i])) < 1e-12);
    }
}

TEST_CASE("sgd_step arithmetic and zeroing") {
    ParameterStore store;
    auto p = store.add("p", Tensor::create({1}, {1.0}));
    p->ensure_grad();
    p->grad[0] = 0.5;
    sgd_step(store, 0.1);
    CHECK(p->data[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(p->grad[0] == 0.0);

    p->grad[0] = 123.0;
    sgd_step(store, 0.0);  // lr = 0 leaves parameters unchanged
    CHECK(p->data[0] == doctest::Approx(0.95).epsilon(1e-15));
}

TEST_CASE("sgd_step missing gradient is a contract violation") {
    ParameterStore store;
    store.add("p", Tensor::create({1}, {1.0}));
    CHECK_THROWS_AS(sgd_step(store, 0.1), ContractError);
}

TEST_CASE("sgd on a quadratic bowl converges geometrically") {
    // f(p) = p^2, grad = 2p, lr = 0.1: p_k = 0.8^k.
    ParameterStore store;
    auto p = store.add("p", Tensor::create({1}, {1.0}));
    for (int i = 0; i < 100; ++i) {
        Tape tape;
        auto loss = ops::sum(&tape, ops::mul(&tape, p, p));
        tape.backward(loss);
        sgd_step(store, 0.1);
    }
    CHECK(std::abs(p->data[0]) < 1e-8);
    CHECK(p->data[0] == doctest::Approx(std::pow(0.8, 100)).epsilon(1e-9));
}

TEST_CASE("NaN output is a hard numerical error") {
    auto x = Tensor::create({1}, {1e308}, true);
    Tape tape;
    CHECK_THROWS_AS(ops::mul(&tape, x, x), NumericError);
}

TEST_CASE("max_pool2 forward and tie routing") {
    auto x = Tensor::create({1, 1, 2, 2}, {3.0, 3.0, 1.0, 2.0}, true);
    Tape tape;
    auto y = ops::max_pool2(&tape, x);
    CHECK(y->data[0] == 3.0);
    tape.backward(ops::sum(&tape, y));
    // First maximum in scan order takes the gradient.
    CHECK(x->grad[0] == 1.0);
    CHECK(x->grad[1] == 0.0);
}

TEST_CASE("l2_normalize produces unit rows") {
    Rng rng(31);
    auto x = randn({3, 5}, rng);
    auto y = ops::l2_normalize(nullptr, x);
    for (int r = 0; r < 3; ++r) {
        double s = 0;
        for (int c = 0; c < 5; ++c) s += y->data[r * 5 + c] * y->data[r * 5 + c];
        CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("custom_scalar injects the supplied backward vector") {
    auto x = Tensor::create({3}, {1.0, 2.0, 3.0}, true);
    Tape tape;
    auto node = ops::custom_scalar(&tape, x, 42.0, {0.5, -1.0, 2.0});
    auto y = ops::scale(&tape, node, 3.0);
    CHECK(node->value() == 42.0);
    tape.backward(y);
    CHECK(x->grad[0] == doctest::Approx(1.5));
    CHECK(x->grad[1] == doctest::Approx(-3.0));
    CHECK(x->grad[2] == doctest::Approx(6.0));
}

TEST_CASE("determinism: identical seeds give bit-identical grads") {
    auto once = [&]() {
        Rng rng(99);
        auto x = randn({1, 2, 8, 8}, rng, 1.0, true);
        auto k = randn({4, 2, 3, 3}, rng, 0.5, true);
        Tape tape;
        auto y = ops::mean(&tape, ops::relu(&tape, ops::conv2d(&tape, x, k, 2, 1)));
        tape.backward(y);
        std::vector<double> out = x->grad;
        out.insert(out.end(), k->grad.begin(), k->grad.end());
        out.push_back(y->value());
        return out;
    };
    auto a = once();
    auto b = once();
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("finite differences across primitive ops") {
    auto reports = [] {
        // Narrow, fast subset here; the full suite runs in gradcheck/acceptance.
        Rng rng(7);
        auto x = Tensor::create({1, 2, 6, 6}, std::vector<double>(72), true);
        for (auto& v : x->data) v = rng.normal();
        auto k = Tensor::create({2, 2, 3, 3}, std::vector<double>(36), true);
        for (auto& v : k->data) v = rng.normal(0.0, 0.5);
        FdCheckOptions opts;
        return check_gradients(
            [&](Tape& t) {
                auto y = ops::conv2d(&t, x, k, 1, 1);
                return ops::mse(&t, y, ops::scale(&t, y, 0.0));
            },
            {x, k}, opts);
    }();
    CHECK(reports.pass);
}
