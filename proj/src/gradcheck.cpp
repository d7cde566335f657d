#include "gridface/gradcheck.hpp"

#include <cmath>
#include <cstdio>

#include "gridface/losses.hpp"
#include "gridface/synthdata.hpp"

namespace gridface {

FdCheckResult check_gradients(const std::function<TensorPtr(Tape&)>& build,
                              const std::vector<TensorPtr>& leaves, const FdCheckOptions& opts) {
    for (auto& leaf : leaves) {
        leaf->requires_grad = true;
        leaf->ensure_grad();
        leaf->zero_grad();
    }
    std::vector<std::vector<double>> analytic;
    {
        Tape tape;
        auto root = build(tape);
        GF_REQUIRE(root->is_scalar(), "check_gradients: objective must be scalar");
        tape.backward(root);
        for (auto& leaf : leaves) analytic.push_back(leaf->grad_view());
    }

    auto eval = [&]() {
        Tape tape;
        return build(tape)->value();
    };

    FdCheckResult res;
    Rng pick(opts.coord_seed);
    for (size_t li = 0; li < leaves.size(); ++li) {
        auto& leaf = leaves[li];
        size_t n = leaf->data.size();
        std::vector<size_t> coords;
        if (static_cast<int>(n) <= opts.max_coords_per_leaf) {
            for (size_t i = 0; i < n; ++i) coords.push_back(i);
        } else {
            for (int i = 0; i < opts.max_coords_per_leaf; ++i) coords.push_back(pick.below(n));
        }
        double f0 = eval();
        for (size_t ci : coords) {
            double saved = leaf->data[ci];
            leaf->data[ci] = saved + opts.step;
            double fp = eval();
            leaf->data[ci] = saved - opts.step;
            double fm = eval();
            leaf->data[ci] = saved;
            double fd = (fp - fm) / (2.0 * opts.step);
            // A central difference is meaningless when the interval
            // straddles a kink (relu boundary, bilinear facet). Blatant
            // straddles show up as second differences far above the smooth
            // h^2 scale and are skipped; the residual uncertainty of a
            // kink near the interval edge is bounded by second/(2h), which
            // is granted as extra allowance.
            double second = std::abs(fp - 2.0 * f0 + fm);
            if (second > std::max(1e-9, 1e-3 * std::abs(fp - fm))) {
                res.skipped++;
                continue;
            }
            double kink_allowance = second / (2.0 * opts.step);
            res.checked++;
            double a = analytic[li][ci];
            double abs_err = std::abs(a - fd);
            double rel = abs_err / std::max({std::abs(a), std::abs(fd), 1e-300});
            res.max_abs_err = std::max(res.max_abs_err, abs_err);
            if (abs_err > opts.atol + kink_allowance +
                              opts.rtol * std::max(std::abs(a), std::abs(fd))) {
                res.pass = false;
                res.max_rel_err = std::max(res.max_rel_err, rel);
            } else if (abs_err > opts.atol) {
                res.max_rel_err = std::max(res.max_rel_err, rel);
            }
        }
    }
    // A config where everything straddles kinks verifies nothing.
    if (res.checked == 0 || res.skipped > 3 * res.checked) res.pass = false;
    return res;
}

namespace {

TensorPtr random_tensor(std::vector<int> shape, Rng& rng, double scale = 1.0) {
    int64_t n = 1;
    for (int e : shape) n *= e;
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal(0.0, scale);
    return Tensor::create(std::move(shape), std::move(v), true);
}

// Smooth procedural image: a few low-frequency sinusoids, values in (0,1).
// Smoothness keeps bilinear-interpolation kinks far below FD noise.
std::vector<double> smooth_image(int h, int w, Rng& rng) {
    double a1 = rng.uniform(0.1, 0.25), a2 = rng.uniform(0.05, 0.2);
    double f1 = rng.uniform(1.0, 2.5), f2 = rng.uniform(1.0, 2.0);
    double p1 = rng.uniform(0.0, 6.28), p2 = rng.uniform(0.0, 6.28);
    std::vector<double> img(static_cast<size_t>(h) * w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double xn = (x + 0.5) / w, yn = (y + 0.5) / h;
            img[static_cast<size_t>(y) * w + x] =
                0.5 + a1 * std::sin(2 * 3.14159265358979 * f1 * xn + p1) +
                a2 * std::sin(2 * 3.14159265358979 * f2 * yn + p2);
        }
    }
    return img;
}

struct SuiteRunner {
    std::vector<GradCheckReport> reports;
    bool verbose;

    void run(const std::string& name, int configs, double rtol, double atol,
             const std::function<void(int seed, std::vector<TensorPtr>&,
                                      std::function<TensorPtr(Tape&)>&)>& make,
             double step = 1e-5) {
        GradCheckReport rep;
        rep.name = name;
        rep.pass = true;
        for (int s = 0; s < configs; ++s) {
            std::vector<TensorPtr> leaves;
            std::function<TensorPtr(Tape&)> build;
            make(s, leaves, build);
            FdCheckOptions opts;
            opts.rtol = rtol;
            opts.atol = atol;
            opts.step = step;
            opts.coord_seed = 1000 + s;
            auto res = check_gradients(build, leaves, opts);
            rep.max_rel_err = std::max(rep.max_rel_err, res.max_rel_err);
            rep.pass = rep.pass && res.pass;
        }
        if (verbose) {
            std::printf("  gradcheck %-22s %s (max rel err %.3g)\n", rep.name.c_str(),
                        rep.pass ? "ok" : "FAIL", rep.max_rel_err);
        }
        reports.push_back(rep);
    }
};

}  // namespace

std::vector<GradCheckReport> run_gradcheck_suite(bool verbose) {
    SuiteRunner sr;
    sr.verbose = verbose;
    const double prim_rtol = 1e-6, prim_atol = 1e-9;
    const double comp_rtol = 1e-4, comp_atol = 1e-6;
    const int nconf = 10;

    sr.run("add_sub_mul_scale", nconf, prim_rtol, prim_atol,
           [](int s, std::vector<TensorPtr>& leaves, std::function<TensorPtr(Tape&)>& build) {
               Rng rng(100 + s);
               auto a = random_tensor({3, 4}, rng);
               auto b = random_tensor({3, 4}, rng);
               leaves = {a, b};
               build = [a, b](Tape& t) {
                   auto u = ops::mul(&t, ops::add(&t, a, b), ops::sub(&t, a, b));
                   return ops::sum(&t, ops::scale(&t, u, 0.7));
               };
           });

    sr.run("relu_mean", nconf, prim_rtol, prim_atol,
           [](int s, std::vector<TensorPtr>& leaves, std::function<TensorPtr(Tape&)>& build) {
               Rng rng(200 + s);
               auto a = random_tensor({5, 5}, rng);
               leaves = {a};
               build = [a](Tape& t) {
                   return ops::mean(&t, ops::relu(&t, ops::add_scalar(&t, a, 0.05)));
               };
           });

    sr.run("sqrt_l2norm", nconf, prim_rtol, prim_atol,
           [](int s, std::vector<TensorPtr>& leaves, std::function<TensorPtr(Tape&)>& build) {
               Rng rng(300 + s);
               auto a = random_tensor({2, 6}, rng);
               auto b = random_tensor({2, 6}, rng);
               leaves = {a, b};
               build = [a, b](Tape& t) {
                   auto na = ops::l2_normalize(&t, a);
                   auto nb = ops::l2_normalize(&t, b);
                   auto d = ops::sub(&t, na, nb);
                   auto q = ops::sum(&t, ops::mul(&t, d, d));
                   return ops::sqrt_elem(&t, ops::add_scalar(&t, q, 0.01));
               };
           });

    sr.run("mse", nconf, prim_rtol, prim_atol,
           [](int s, std::vector<TensorPtr>& leaves, std::function<TensorPtr(Tape&)>& build) {
               Rng rng(400 + s);
               auto a = random_tensor({4, 7}, rng);
               auto b = random_tensor({4, 7}, rng);
               leaves = {a, b};
               build = [a, b](Tape& t) { return ops::mse(&t, a, b); };
           });

    sr.run("conv2d", nconf, prim_rtol, prim_atol,
           [](int s, std::vector<TensorPtr>& leaves, std::function<TensorPtr(Tape&)>& build) {
               Rng rng(500 + s);
               int stride = (s % 2) + 1;
               auto x = random_tensor({1, 2, 6, 6}, rng);
               auto k = random_tensor({3, 2, 3, 3}, rng, 0.5);
               leaves = {x, k};
               build = [x, k, stride](Tape& t) {
                   return ops::mean(&t, ops::conv2d(&t, x, k, stride, 1));
               };
           });

    sr.run("conv2d_transpose", nconf, prim_rtol, prim_atol,
           [](int s, std::vector<TensorPtr>& leaves, std::function<TensorPtr(Tape&)>& build) {
               Rng rng(600 + s);
               int stride = (s % 2) + 1;
               int out = stride == 2 ? 8 : 6;
               int in = (out + 2 - 3) / stride + 1;
               auto x = random_tensor({1, 3, in, in}, rng);
               auto k = random_tensor({3, 2, 3, 3}, rng, 0.5);
               leaves = {x, k};
               build = [x, k, stride, out](Tape& t) {
                   return ops::mean(&t, ops::conv2d_transpose(&t, x, k, stride, 1, out, out));
               };
           });

    sr.run("bias_pool_fc", nconf, prim_rtol, prim_atol,
           [](int s, std::vector<TensorPtr>& leaves, std::function<TensorPtr(Tape&)>& build) {
               Rng rng(700 + s);
               auto x = random_tensor({1, 2, 4, 4}, rng);
               auto bias = random_tensor({2}, rng);
               auto w = random_tensor({3, 8}, rng, 0.5);
               auto b = random_tensor({3}, rng);
               leaves = {x, bias, w, b};
               build = [x, bias, w, b](Tape& t) {
                   auto y = ops::max_pool2(&t, ops::add_channel_bias(&t, x, bias));
                   y = ops::reshape(&t, y, {1, 8});
                   y = ops::fully_connected(&t, y, w, b);
                   return ops::mean(&t, ops::mul(&t, y, y));
               };
           });

    sr.run("custom_scalar", 3, prim_rtol, prim_atol,
           [](int s, std::vector<TensorPtr>& leaves, std::function<TensorPtr(Tape&)>& build) {
               // The node's contract is that its backward equals the supplied
               // vector; realize a true quadratic through it so FD applies.
               Rng rng(800 + s);
               auto a = random_tensor({6}, rng);
               leaves = {a};
               build = [a](Tape& t) {
                   double v = 0.0;
                   std::vector<double> g(a->data.size());
                   for (size_t i = 0; i < a->data.size(); ++i) {
                       v += 0.5 * a->data[i] * a->data[i];
                       g[i] = a->data[i];
                   }
                   return ops::custom_scalar(&t, a, v, std::move(g));
               };
           });

    sr.run("warp_params_image", nconf, comp_rtol, comp_atol,
           [](int s, std::vector<TensorPtr>& leaves, std::function<TensorPtr(Tape&)>& build) {
               Rng rng(900 + s);
               int n = (s % 2) ? 2 : 1;
               GridTemplate grid(n);
               int res = 16;
               auto img = Tensor::create({1, res, res}, smooth_image(res, res, rng), true);
               std::vector<double> p(8 * n * n);
               for (auto& v : p) v = rng.uniform(-0.08, 0.08);
               auto params = Tensor::create({8 * n * n}, std::move(p), true);
               leaves = {img, params};
               build = [img, params, grid](Tape& t) {
                   auto out = rectify(&t, img, params, grid);
                   return ops::mean(&t, ops::mul(&t, out, out));
               };
           },
           /*step=*/3e-6);

    sr.run("deformation_loss", nconf, comp_rtol, comp_atol,
           [](int s, std::vector<TensorPtr>& leaves, std::function<TensorPtr(Tape&)>& build) {
               Rng rng(1100 + s);
               int n = 2 + (s % 3);
               GridTemplate grid(n);
               std::vector<double> p(8 * n * n);
               for (auto& v : p) v = rng.uniform(-0.15, 0.15);
               auto params = Tensor::create({8 * n * n}, std::move(p), true);
               leaves = {params};
               build = [params, grid](Tape& t) { return deformation_loss(&t, params, grid); };
           });

    sr.run("joint_objective", nconf, comp_rtol, comp_atol,
           [](int s, std::vector<TensorPtr>& leaves, std::function<TensorPtr(Tape&)>& build) {
               Rng rng(1300 + s);
               int res = 16;
               int n = (s % 2) ? 2 : 1;
               auto rect = std::make_shared<RectifierNet>(n, 1, res);
               auto emb = std::make_shared<EmbeddingNet>(1, res, 8);
               auto theta = std::make_shared<ParameterStore>();
               auto phi = std::make_shared<ParameterStore>();
               Rng init(5000 + s);
               rect->init_params(*theta, init);
               emb->init_params(*phi, init);
               // A generic (non-identity) operating point for the head.
               auto head_w = theta->get("rect.fc2.w");
               for (auto& v : head_w->data) v = init.normal(0.0, 0.002);
               auto head_b = theta->get("rect.fc2.b");
               for (auto& v : head_b->data) v = init.normal(0.0, 0.02);

               DenoiserArch arch;
               arch.stride = 2;
               arch.enc1_channels = 4;
               arch.enc2_channels = 6;
               auto den = std::make_shared<DenoiserModel>(arch, res, res, 0.25);
               Rng dinit(6000 + s);
               den->net().init_params(den->params(), dinit);
               den->freeze();

               TripletImages trip;
               trip.anchor = Tensor::create({1, res, res}, smooth_image(res, res, rng));
               trip.positive = Tensor::create({1, res, res}, smooth_image(res, res, rng));
               trip.negative = Tensor::create({1, res, res}, smooth_image(res, res, rng));

               for (auto& [name, t] : theta->items()) leaves.push_back(t);
               for (auto& [name, t] : phi->items()) leaves.push_back(t);

               JointModels base_models;
               base_models.rectifier = rect.get();
               base_models.theta = theta.get();
               base_models.embedder = emb.get();
               base_models.phi = phi.get();
               base_models.denoiser = den.get();
               auto targets = std::make_shared<RegTargets>(capture_reg_targets(trip, base_models));
               build = [rect, emb, theta, phi, den, trip, targets](Tape& t) {
                   JointModels models;
                   models.rectifier = rect.get();
                   models.theta = theta.get();
                   models.embedder = emb.get();
                   models.phi = phi.get();
                   models.denoiser = den.get();
                   ObjectiveWeights w;
                   w.lambda_reg = 10.0;
                   w.lambda_de = 1.0;
                   w.alpha = 0.3;
                   TensorPtr total;
                   joint_objective(&t, trip, models, w, &total, targets.get());
                   return total;
               };
           },
           /*step=*/1e-6);

    return sr.reports;
}

bool gradcheck_all_passed(const std::vector<GradCheckReport>& reports) {
    for (const auto& r : reports) {
        if (!r.pass) return false;
    }
    return true;
}

}  // namespace gridface
