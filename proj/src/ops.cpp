#include "gridface/ops.hpp"

#include <algorithm>
#include <cmath>

namespace gridface {
namespace ops {

namespace {

bool wants_grad(const TensorPtr& t) { return t->requires_grad; }

TensorPtr make_output(std::vector<int> shape, std::vector<double> data, bool rg,
                      const char* opname) {
    for (double v : data) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value in output of ") + opname);
        }
    }
    auto t = std::make_shared<Tensor>();
    t->shape = std::move(shape);
    t->data = std::move(data);
    t->requires_grad = rg;
    return t;
}

void require_same_shape(const TensorPtr& a, const TensorPtr& b, const char* opname) {
    GF_REQUIRE(a->shape == b->shape, std::string(opname) + ": shape mismatch");
}

struct ConvDims {
    int n, c, h, w;   // input
    int k, kh, kw;    // kernel
    int oh, ow;       // output
    int stride, pad;
};

ConvDims conv_dims(const TensorPtr& input, const TensorPtr& kernel, int stride, int padding) {
    GF_REQUIRE(input->shape.size() == 4, "conv2d: input must be [N,C,H,W]");
    GF_REQUIRE(kernel->shape.size() == 4, "conv2d: kernel must be [K,C,kh,kw]");
    GF_REQUIRE(stride >= 1, "conv2d: stride must be >= 1");
    GF_REQUIRE(padding >= 0, "conv2d: padding must be >= 0");
    ConvDims d;
    d.n = input->shape[0];
    d.c = input->shape[1];
    d.h = input->shape[2];
    d.w = input->shape[3];
    d.k = kernel->shape[0];
    GF_REQUIRE(kernel->shape[1] == d.c, "conv2d: kernel channel count must match input");
    d.kh = kernel->shape[2];
    d.kw = kernel->shape[3];
    d.stride = stride;
    d.pad = padding;
    GF_REQUIRE(d.h + 2 * padding >= d.kh && d.w + 2 * padding >= d.kw,
               "conv2d: padded input smaller than kernel");
    d.oh = (d.h + 2 * padding - d.kh) / stride + 1;
    d.ow = (d.w + 2 * padding - d.kw) / stride + 1;
    return d;
}

// out[n,k,oh,ow] += sum_{c,kh,kw} in[n,c,oh*s-p+kh,ow*s-p+kw] * ker[k,c,kh,kw]
void conv_forward(const double* in, const double* ker, double* out, const ConvDims& d) {
    for (int n = 0; n < d.n; ++n) {
        for (int k = 0; k < d.k; ++k) {
            double* outp = out + ((static_cast<int64_t>(n) * d.k + k) * d.oh) * d.ow;
            for (int c = 0; c < d.c; ++c) {
                const double* inp = in + ((static_cast<int64_t>(n) * d.c + c) * d.h) * d.w;
                const double* kerp = ker + ((static_cast<int64_t>(k) * d.c + c) * d.kh) * d.kw;
                for (int kh = 0; kh < d.kh; ++kh) {
                    for (int kw = 0; kw < d.kw; ++kw) {
                        double wv = kerp[kh * d.kw + kw];
                        if (wv == 0.0) continue;
                        for (int oh = 0; oh < d.oh; ++oh) {
                            int ih = oh * d.stride - d.pad + kh;
                            if (ih < 0 || ih >= d.h) continue;
                            const double* inrow = inp + ih * d.w;
                            double* outrow = outp + oh * d.ow;
                            for (int ow = 0; ow < d.ow; ++ow) {
                                int iw = ow * d.stride - d.pad + kw;
                                if (iw < 0 || iw >= d.w) continue;
                                outrow[ow] += wv * inrow[iw];
                            }
                        }
                    }
                }
            }
        }
    }
}

// gin[n,c,ih,iw] += sum_{k,kh,kw} gout[n,k,oh,ow] * ker[k,c,kh,kw]
void conv_backward_input(const double* gout, const double* ker, double* gin, const ConvDims& d) {
    for (int n = 0; n < d.n; ++n) {
        for (int k = 0; k < d.k; ++k) {
            const double* goutp = gout + ((static_cast<int64_t>(n) * d.k + k) * d.oh) * d.ow;
            for (int c = 0; c < d.c; ++c) {
                double* ginp = gin + ((static_cast<int64_t>(n) * d.c + c) * d.h) * d.w;
                const double* kerp = ker + ((static_cast<int64_t>(k) * d.c + c) * d.kh) * d.kw;
                for (int kh = 0; kh < d.kh; ++kh) {
                    for (int kw = 0; kw < d.kw; ++kw) {
                        double wv = kerp[kh * d.kw + kw];
                        if (wv == 0.0) continue;
                        for (int oh = 0; oh < d.oh; ++oh) {
                            int ih = oh * d.stride - d.pad + kh;
                            if (ih < 0 || ih >= d.h) continue;
                            double* ginrow = ginp + ih * d.w;
                            const double* goutrow = goutp + oh * d.ow;
                            for (int ow = 0; ow < d.ow; ++ow) {
                                int iw = ow * d.stride - d.pad + kw;
                                if (iw < 0 || iw >= d.w) continue;
                                ginrow[iw] += wv * goutrow[ow];
                            }
                        }
                    }
                }
            }
        }
    }
}

// gker[k,c,kh,kw] += sum_{n,oh,ow} gout[n,k,oh,ow] * in[n,c,oh*s-p+kh,ow*s-p+kw]
void conv_backward_kernel(const double* in, const double* gout, double* gker,
                          const ConvDims& d) {
    for (int n = 0; n < d.n; ++n) {
        for (int k = 0; k < d.k; ++k) {
            const double* goutp = gout + ((static_cast<int64_t>(n) * d.k + k) * d.oh) * d.ow;
            for (int c = 0; c < d.c; ++c) {
                const double* inp = in + ((static_cast<int64_t>(n) * d.c + c) * d.h) * d.w;
                double* gkerp = gker + ((static_cast<int64_t>(k) * d.c + c) * d.kh) * d.kw;
                for (int kh = 0; kh < d.kh; ++kh) {
                    for (int kw = 0; kw < d.kw; ++kw) {
                        double acc = 0.0;
                        for (int oh = 0; oh < d.oh; ++oh) {
                            int ih = oh * d.stride - d.pad + kh;
                            if (ih < 0 || ih >= d.h) continue;
                            const double* inrow = inp + ih * d.w;
                            const double* goutrow = goutp + oh * d.ow;
                            for (int ow = 0; ow < d.ow; ++ow) {
                                int iw = ow * d.stride - d.pad + kw;
                                if (iw < 0 || iw >= d.w) continue;
                                acc += goutrow[ow] * inrow[iw];
                            }
                        }
                        gkerp[kh * d.kw + kw] += acc;
                    }
                }
            }
        }
    }
}

}  // namespace

TensorPtr add(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(a, b, "add");
    std::vector<double> out(a->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] + b->data[i];
    bool rg = wants_grad(a) || wants_grad(b);
    auto o = make_output(a->shape, std::move(out), rg, "add");
    if (tape && rg) {
        tape->record("add", {a, b}, o, [a, b, o]() {
            if (a->requires_grad) {
                a->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) a->grad[i] += o->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) b->grad[i] += o->grad[i];
            }
        });
    }
    return o;
}

TensorPtr sub(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(a, b, "sub");
    std::vector<double> out(a->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] - b->data[i];
    bool rg = wants_grad(a) || wants_grad(b);
    auto o = make_output(a->shape, std::move(out), rg, "sub");
    if (tape && rg) {
        tape->record("sub", {a, b}, o, [a, b, o]() {
            if (a->requires_grad) {
                a->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) a->grad[i] += o->grad[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) b->grad[i] -= o->grad[i];
            }
        });
    }
    return o;
}

TensorPtr mul(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(a, b, "mul");
    std::vector<double> out(a->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * b->data[i];
    bool rg = wants_grad(a) || wants_grad(b);
    auto o = make_output(a->shape, std::move(out), rg, "mul");
    if (tape && rg) {
        tape->record("mul", {a, b}, o, [a, b, o]() {
            if (a->requires_grad) {
                a->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) a->grad[i] += o->grad[i] * b->data[i];
            }
            if (b->requires_grad) {
                b->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) b->grad[i] += o->grad[i] * a->data[i];
            }
        });
    }
    return o;
}

TensorPtr scale(Tape* tape, const TensorPtr& a, double c) {
    GF_REQUIRE(std::isfinite(c), "scale: factor must be finite");
    std::vector<double> out(a->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] * c;
    bool rg = wants_grad(a);
    auto o = make_output(a->shape, std::move(out), rg, "scale");
    if (tape && rg) {
        tape->record("scale", {a}, o, [a, o, c]() {
            a->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) a->grad[i] += o->grad[i] * c;
        });
    }
    return o;
}

TensorPtr add_scalar(Tape* tape, const TensorPtr& a, double c) {
    GF_REQUIRE(std::isfinite(c), "add_scalar: addend must be finite");
    std::vector<double> out(a->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] + c;
    bool rg = wants_grad(a);
    auto o = make_output(a->shape, std::move(out), rg, "add_scalar");
    if (tape && rg) {
        tape->record("add_scalar", {a}, o, [a, o]() {
            a->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) a->grad[i] += o->grad[i];
        });
    }
    return o;
}

TensorPtr relu(Tape* tape, const TensorPtr& a) {
    std::vector<double> out(a->data.size());
    for (size_t i = 0; i < out.size(); ++i) out[i] = a->data[i] > 0.0 ? a->data[i] : 0.0;
    bool rg = wants_grad(a);
    auto o = make_output(a->shape, std::move(out), rg, "relu");
    if (tape && rg) {
        tape->record("relu", {a}, o, [a, o]() {
            a->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) {
                if (a->data[i] > 0.0) a->grad[i] += o->grad[i];
            }
        });
    }
    return o;
}

TensorPtr sqrt_elem(Tape* tape, const TensorPtr& a) {
    std::vector<double> out(a->data.size());
    for (size_t i = 0; i < out.size(); ++i) {
        GF_REQUIRE(a->data[i] >= 0.0, "sqrt_elem: negative input");
        out[i] = std::sqrt(a->data[i]);
    }
    bool rg = wants_grad(a);
    auto o = make_output(a->shape, std::move(out), rg, "sqrt");
    if (tape && rg) {
        // Subgradient 0 at exactly zero.
        tape->record("sqrt", {a}, o, [a, o]() {
            a->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) {
                if (o->data[i] > 0.0) a->grad[i] += o->grad[i] * 0.5 / o->data[i];
            }
        });
    }
    return o;
}

TensorPtr sum(Tape* tape, const TensorPtr& a) {
    double s = 0.0;
    for (double v : a->data) s += v;
    bool rg = wants_grad(a);
    auto o = make_output({1}, {s}, rg, "sum");
    if (tape && rg) {
        tape->record("sum", {a}, o, [a, o]() {
            a->ensure_grad();
            double g = o->grad[0];
            for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += g;
        });
    }
    return o;
}

TensorPtr mean(Tape* tape, const TensorPtr& a) {
    double s = 0.0;
    for (double v : a->data) s += v;
    double inv = 1.0 / static_cast<double>(a->data.size());
    bool rg = wants_grad(a);
    auto o = make_output({1}, {s * inv}, rg, "mean");
    if (tape && rg) {
        tape->record("mean", {a}, o, [a, o, inv]() {
            a->ensure_grad();
            double g = o->grad[0] * inv;
            for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += g;
        });
    }
    return o;
}

TensorPtr mse(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    require_same_shape(a, b, "mse");
    double s = 0.0;
    for (size_t i = 0; i < a->data.size(); ++i) {
        double d = a->data[i] - b->data[i];
        s += d * d;
    }
    double inv = 1.0 / static_cast<double>(a->data.size());
    bool rg = wants_grad(a) || wants_grad(b);
    auto o = make_output({1}, {s * inv}, rg, "mse");
    if (tape && rg) {
        tape->record("mse", {a, b}, o, [a, b, o, inv]() {
            double g = o->grad[0] * 2.0 * inv;
            if (a->requires_grad) a->ensure_grad();
            if (b->requires_grad) b->ensure_grad();
            for (size_t i = 0; i < a->data.size(); ++i) {
                double d = g * (a->data[i] - b->data[i]);
                if (a->requires_grad) a->grad[i] += d;
                if (b->requires_grad) b->grad[i] -= d;
            }
        });
    }
    return o;
}

TensorPtr reshape(Tape* tape, const TensorPtr& a, std::vector<int> new_shape) {
    int64_t n = 1;
    for (int e : new_shape) n *= e;
    GF_REQUIRE(n == a->numel(), "reshape: element count mismatch");
    bool rg = wants_grad(a);
    auto o = make_output(std::move(new_shape), a->data, rg, "reshape");
    if (tape && rg) {
        tape->record("reshape", {a}, o, [a, o]() {
            a->ensure_grad();
            for (size_t i = 0; i < o->grad.size(); ++i) a->grad[i] += o->grad[i];
        });
    }
    return o;
}

TensorPtr conv2d(Tape* tape, const TensorPtr& input, const TensorPtr& kernel, int stride,
                 int padding) {
    ConvDims d = conv_dims(input, kernel, stride, padding);
    std::vector<double> out(static_cast<size_t>(d.n) * d.k * d.oh * d.ow, 0.0);
    conv_forward(input->data.data(), kernel->data.data(), out.data(), d);
    bool rg = wants_grad(input) || wants_grad(kernel);
    auto o = make_output({d.n, d.k, d.oh, d.ow}, std::move(out), rg, "conv2d");
    if (tape && rg) {
        tape->record("conv2d", {input, kernel}, o, [input, kernel, o, d]() {
            if (input->requires_grad) {
                input->ensure_grad();
                conv_backward_input(o->grad.data(), kernel->data.data(), input->grad.data(), d);
            }
            if (kernel->requires_grad) {
                kernel->ensure_grad();
                conv_backward_kernel(input->data.data(), o->grad.data(), kernel->grad.data(), d);
            }
        });
    }
    return o;
}

TensorPtr conv2d_transpose(Tape* tape, const TensorPtr& input, const TensorPtr& kernel,
                           int stride, int padding, int out_h, int out_w) {
    GF_REQUIRE(input->shape.size() == 4, "conv2d_transpose: input must be [N,K,h,w]");
    GF_REQUIRE(kernel->shape.size() == 4, "conv2d_transpose: kernel must be [K,C,kh,kw]");
    GF_REQUIRE(input->shape[1] == kernel->shape[0],
               "conv2d_transpose: input channels must match kernel K");
    GF_REQUIRE(out_h >= 1 && out_w >= 1, "conv2d_transpose: output extents must be positive");

    // Dims of the conv this op is the adjoint of.
    ConvDims d;
    d.n = input->shape[0];
    d.k = kernel->shape[0];
    d.c = kernel->shape[1];
    d.kh = kernel->shape[2];
    d.kw = kernel->shape[3];
    d.h = out_h;
    d.w = out_w;
    d.stride = stride;
    d.pad = padding;
    GF_REQUIRE(out_h + 2 * padding >= d.kh && out_w + 2 * padding >= d.kw,
               "conv2d_transpose: output smaller than kernel");
    d.oh = (out_h + 2 * padding - d.kh) / stride + 1;
    d.ow = (out_w + 2 * padding - d.kw) / stride + 1;
    GF_REQUIRE(d.oh == input->shape[2] && d.ow == input->shape[3],
               "conv2d_transpose: out_h/out_w incompatible with input extent");

    std::vector<double> out(static_cast<size_t>(d.n) * d.c * d.h * d.w, 0.0);
    conv_backward_input(input->data.data(), kernel->data.data(), out.data(), d);
    bool rg = wants_grad(input) || wants_grad(kernel);
    auto o = make_output({d.n, d.c, d.h, d.w}, std::move(out), rg, "conv2d_transpose");
    if (tape && rg) {
        tape->record("conv2d_transpose", {input, kernel}, o, [input, kernel, o, d]() {
            if (input->requires_grad) {
                input->ensure_grad();
                conv_forward(o->grad.data(), kernel->data.data(), input->grad.data(), d);
            }
            if (kernel->requires_grad) {
                kernel->ensure_grad();
                conv_backward_kernel(o->grad.data(), input->data.data(), kernel->grad.data(), d);
            }
        });
    }
    return o;
}

TensorPtr add_channel_bias(Tape* tape, const TensorPtr& x, const TensorPtr& bias) {
    GF_REQUIRE(x->shape.size() == 4, "add_channel_bias: x must be [N,C,H,W]");
    GF_REQUIRE(bias->shape.size() == 1 && bias->shape[0] == x->shape[1],
               "add_channel_bias: bias must be [C]");
    int n = x->shape[0], c = x->shape[1];
    int64_t hw = static_cast<int64_t>(x->shape[2]) * x->shape[3];
    std::vector<double> out(x->data.size());
    for (int ni = 0; ni < n; ++ni) {
        for (int ci = 0; ci < c; ++ci) {
            double b = bias->data[ci];
            const double* src = x->data.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
            double* dst = out.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
            for (int64_t i = 0; i < hw; ++i) dst[i] = src[i] + b;
        }
    }
    bool rg = wants_grad(x) || wants_grad(bias);
    auto o = make_output(x->shape, std::move(out), rg, "add_channel_bias");
    if (tape && rg) {
        tape->record("add_channel_bias", {x, bias}, o, [x, bias, o, n, c, hw]() {
            if (x->requires_grad) {
                x->ensure_grad();
                for (size_t i = 0; i < o->grad.size(); ++i) x->grad[i] += o->grad[i];
            }
            if (bias->requires_grad) {
                bias->ensure_grad();
                for (int ni = 0; ni < n; ++ni) {
                    for (int ci = 0; ci < c; ++ci) {
                        const double* g = o->grad.data() + (static_cast<int64_t>(ni) * c + ci) * hw;
                        double acc = 0.0;
                        for (int64_t i = 0; i < hw; ++i) acc += g[i];
                        bias->grad[ci] += acc;
                    }
                }
            }
        });
    }
    return o;
}

TensorPtr max_pool2(Tape* tape, const TensorPtr& x) {
    GF_REQUIRE(x->shape.size() == 4, "max_pool2: x must be [N,C,H,W]");
    int n = x->shape[0], c = x->shape[1], h = x->shape[2], w = x->shape[3];
    GF_REQUIRE(h % 2 == 0 && w % 2 == 0, "max_pool2: spatial extents must be even");
    int oh = h / 2, ow = w / 2;
    std::vector<double> out(static_cast<size_t>(n) * c * oh * ow);
    std::vector<int32_t> argmax(out.size());
    for (int nc = 0; nc < n * c; ++nc) {
        const double* src = x->data.data() + static_cast<int64_t>(nc) * h * w;
        double* dst = out.data() + static_cast<int64_t>(nc) * oh * ow;
        int32_t* am = argmax.data() + static_cast<int64_t>(nc) * oh * ow;
        for (int y = 0; y < oh; ++y) {
            for (int xo = 0; xo < ow; ++xo) {
                int base = (2 * y) * w + 2 * xo;
                int cand[4] = {base, base + 1, base + w, base + w + 1};
                int best = cand[0];
                double bv = src[cand[0]];
                for (int t = 1; t < 4; ++t) {
                    if (src[cand[t]] > bv) {
                        bv = src[cand[t]];
                        best = cand[t];
                    }
                }
                dst[y * ow + xo] = bv;
                am[y * ow + xo] = best;
            }
        }
    }
    bool rg = wants_grad(x);
    auto o = make_output({n, c, oh, ow}, std::move(out), rg, "max_pool2");
    if (tape && rg) {
        auto am = std::make_shared<std::vector<int32_t>>(std::move(argmax));
        int64_t hw = static_cast<int64_t>(h) * w;
        int64_t ohw = static_cast<int64_t>(oh) * ow;
        tape->record("max_pool2", {x}, o, [x, o, am, n, c, hw, ohw]() {
            x->ensure_grad();
            for (int nc = 0; nc < n * c; ++nc) {
                double* g = x->grad.data() + nc * hw;
                const double* og = o->grad.data() + nc * ohw;
                const int32_t* a = am->data() + nc * ohw;
                for (int64_t i = 0; i < ohw; ++i) g[a[i]] += og[i];
            }
        });
    }
    return o;
}

TensorPtr fully_connected(Tape* tape, const TensorPtr& x, const TensorPtr& weight,
                          const TensorPtr& bias) {
    GF_REQUIRE(x->shape.size() == 2, "fully_connected: x must be [N,F]");
    GF_REQUIRE(weight->shape.size() == 2, "fully_connected: weight must be [O,F]");
    GF_REQUIRE(weight->shape[1] == x->shape[1], "fully_connected: feature dims must match");
    GF_REQUIRE(bias->shape.size() == 1 && bias->shape[0] == weight->shape[0],
               "fully_connected: bias must be [O]");
    int n = x->shape[0], f = x->shape[1], o_dim = weight->shape[0];
    std::vector<double> out(static_cast<size_t>(n) * o_dim);
    for (int ni = 0; ni < n; ++ni) {
        const double* xr = x->data.data() + static_cast<int64_t>(ni) * f;
        for (int oi = 0; oi < o_dim; ++oi) {
            const double* wr = weight->data.data() + static_cast<int64_t>(oi) * f;
            double acc = bias->data[oi];
            for (int fi = 0; fi < f; ++fi) acc += xr[fi] * wr[fi];
            out[static_cast<int64_t>(ni) * o_dim + oi] = acc;
        }
    }
    bool rg = wants_grad(x) || wants_grad(weight) || wants_grad(bias);
    auto o = make_output({n, o_dim}, std::move(out), rg, "fully_connected");
    if (tape && rg) {
        tape->record("fully_connected", {x, weight, bias}, o, [x, weight, bias, o, n, f, o_dim]() {
            if (x->requires_grad) x->ensure_grad();
            if (weight->requires_grad) weight->ensure_grad();
            if (bias->requires_grad) bias->ensure_grad();
            for (int ni = 0; ni < n; ++ni) {
                const double* gr = o->grad.data() + static_cast<int64_t>(ni) * o_dim;
                const double* xr = x->data.data() + static_cast<int64_t>(ni) * f;
                for (int oi = 0; oi < o_dim; ++oi) {
                    double g = gr[oi];
                    if (g == 0.0) continue;
                    const double* wr = weight->data.data() + static_cast<int64_t>(oi) * f;
                    if (x->requires_grad) {
                        double* xg = x->grad.data() + static_cast<int64_t>(ni) * f;
                        for (int fi = 0; fi < f; ++fi) xg[fi] += g * wr[fi];
                    }
                    if (weight->requires_grad) {
                        double* wg = weight->grad.data() + static_cast<int64_t>(oi) * f;
                        for (int fi = 0; fi < f; ++fi) wg[fi] += g * xr[fi];
                    }
                    if (bias->requires_grad) bias->grad[oi] += g;
                }
            }
        });
    }
    return o;
}

TensorPtr l2_normalize(Tape* tape, const TensorPtr& x) {
    GF_REQUIRE(x->shape.size() == 1 || x->shape.size() == 2,
               "l2_normalize: x must be [F] or [N,F]");
    int n = x->shape.size() == 2 ? x->shape[0] : 1;
    int f = x->shape.size() == 2 ? x->shape[1] : x->shape[0];
    std::vector<double> out(x->data.size());
    std::vector<double> norms(n);
    for (int ni = 0; ni < n; ++ni) {
        const double* xr = x->data.data() + static_cast<int64_t>(ni) * f;
        double s = 0.0;
        for (int fi = 0; fi < f; ++fi) s += xr[fi] * xr[fi];
        double r = std::sqrt(s);
        GF_REQUIRE(r > 1e-12, "l2_normalize: row norm too small");
        norms[ni] = r;
        double* orow = out.data() + static_cast<int64_t>(ni) * f;
        for (int fi = 0; fi < f; ++fi) orow[fi] = xr[fi] / r;
    }
    bool rg = wants_grad(x);
    auto o = make_output(x->shape, std::move(out), rg, "l2_normalize");
    if (tape && rg) {
        auto nm = std::make_shared<std::vector<double>>(std::move(norms));
        tape->record("l2_normalize", {x}, o, [x, o, nm, n, f]() {
            x->ensure_grad();
            for (int ni = 0; ni < n; ++ni) {
                const double* g = o->grad.data() + static_cast<int64_t>(ni) * f;
                const double* y = o->data.data() + static_cast<int64_t>(ni) * f;
                double* xg = x->grad.data() + static_cast<int64_t>(ni) * f;
                double r = (*nm)[ni];
                double dot = 0.0;
                for (int fi = 0; fi < f; ++fi) dot += g[fi] * y[fi];
                for (int fi = 0; fi < f; ++fi) xg[fi] += (g[fi] - y[fi] * dot) / r;
            }
        });
    }
    return o;
}

TensorPtr custom_scalar(Tape* tape, const TensorPtr& dep, double value,
                        std::vector<double> grad_wrt_dep) {
    GF_REQUIRE(grad_wrt_dep.size() == dep->data.size(),
               "custom_scalar: gradient vector shape mismatch");
    ensure_all_finite("custom_scalar gradient", grad_wrt_dep);
    bool rg = wants_grad(dep);
    auto o = make_output({1}, {value}, rg, "custom_scalar");
    if (tape && rg) {
        auto gv = std::make_shared<std::vector<double>>(std::move(grad_wrt_dep));
        tape->record("custom_scalar", {dep}, o, [dep, o, gv]() {
            dep->ensure_grad();
            double g = o->grad[0];
            for (size_t i = 0; i < gv->size(); ++i) dep->grad[i] += g * (*gv)[i];
        });
    }
    return o;
}

}  // namespace ops
}  // namespace gridface
