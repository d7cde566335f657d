#include "gridface/warp.hpp"

#include <cmath>
#include <limits>
#include <memory>

namespace gridface {

namespace {

std::vector<ResidualParams> params_from_tensor(const TensorPtr& params, const GridTemplate& grid) {
    GF_REQUIRE(params->numel() == 8 * grid.cell_count(),
               "field_from_params: params tensor must hold 8*n^2 values");
    std::vector<ResidualParams> out(grid.cell_count());
    for (int c = 0; c < grid.cell_count(); ++c) {
        for (int k = 0; k < 8; ++k) out[c].h[k] = params->data[8 * c + k];
    }
    return out;
}

}  // namespace

WarpField build_warp_field(const std::vector<ResidualParams>& params, const GridTemplate& grid,
                           int out_h, int out_w) {
    GF_REQUIRE(out_h >= 2 && out_w >= 2, "build_warp_field: resolution must be at least 2x2");
    GF_REQUIRE(static_cast<int>(params.size()) == grid.cell_count(),
               "build_warp_field: params size must be n^2");
    WarpField f;
    f.height = out_h;
    f.width = out_w;
    f.sx.assign(static_cast<size_t>(out_h) * out_w, 0.0);
    f.sy.assign(f.sx.size(), 0.0);
    f.valid.assign(f.sx.size(), 0);
    f.cell.assign(f.sx.size(), 0);

    std::vector<Homography> hs(params.size());
    for (size_t c = 0; c < params.size(); ++c) hs[c] = Homography::from_residual(params[c]);

    for (int v = 0; v < out_h; ++v) {
        for (int u = 0; u < out_w; ++u) {
            Point2 q{(u + 0.5) / out_w, (v + 0.5) / out_h};
            int cell = grid.cell_linear(grid.cell_of(q));
            size_t idx = static_cast<size_t>(v) * out_w + u;
            f.cell[idx] = cell;
            Point2 p;
            if (hs[cell].apply_checked(q, &p)) {
                f.sx[idx] = p.x;
                f.sy[idx] = p.y;
                f.valid[idx] = 1;
            }
        }
    }
    return f;
}

FieldNode field_from_params(Tape* tape, const TensorPtr& params, const GridTemplate& grid,
                            int out_h, int out_w) {
    auto plain = params_from_tensor(params, grid);
    WarpField f = build_warp_field(plain, grid, out_h, out_w);

    size_t npix = f.size();
    std::vector<double> coords(2 * npix);
    for (size_t i = 0; i < npix; ++i) {
        coords[i] = f.sx[i];
        coords[npix + i] = f.sy[i];
    }
    FieldNode node;
    node.height = out_h;
    node.width = out_w;
    node.valid = f.valid;
    bool rg = params->requires_grad;
    node.coords = Tensor::create({2, out_h, out_w}, std::move(coords), rg);

    if (tape && rg) {
        // Per-pixel jacobians d(sx,sy)/dh for the owning cell.
        std::vector<Homography> hs(plain.size());
        for (size_t c = 0; c < plain.size(); ++c) hs[c] = Homography::from_residual(plain[c]);
        auto jac = std::make_shared<std::vector<Jacobian2x8>>();
        jac->resize(npix);
        for (int v = 0; v < out_h; ++v) {
            for (int u = 0; u < out_w; ++u) {
                size_t idx = static_cast<size_t>(v) * out_w + u;
                if (!f.valid[idx]) continue;
                Point2 q{(u + 0.5) / out_w, (v + 0.5) / out_h};
                (*jac)[idx] = residual_jacobian(hs[f.cell[idx]], q);
            }
        }
        auto cells = std::make_shared<std::vector<int32_t>>(f.cell);
        auto validc = std::make_shared<std::vector<uint8_t>>(f.valid);
        TensorPtr coords_t = node.coords;
        tape->record("field_from_params", {params}, coords_t,
                     [params, coords_t, jac, cells, validc, npix]() {
                         params->ensure_grad();
                         const double* gx = coords_t->grad.data();
                         const double* gy = coords_t->grad.data() + npix;
                         for (size_t i = 0; i < npix; ++i) {
                             if (!(*validc)[i]) continue;
                             const Jacobian2x8& j = (*jac)[i];
                             double* gh = params->grad.data() + 8 * (*cells)[i];
                             for (int k = 0; k < 8; ++k) {
                                 gh[k] += gx[i] * j.d[0][k] + gy[i] * j.d[1][k];
                             }
                         }
                     });
    }
    return node;
}

namespace {

struct Taps {
    int x0, x1, y0, y1;
    double fx, fy;
};

// Continuous pixel position with the (u+0.5)/W center convention; taps are
// border-clamped.
inline Taps taps_for(double sx, double sy, int w, int h) {
    Taps t;
    double u = sx * w - 0.5;
    double v = sy * h - 0.5;
    double fu = std::floor(u);
    double fv = std::floor(v);
    t.fx = u - fu;
    t.fy = v - fv;
    int x0 = static_cast<int>(fu);
    int y0 = static_cast<int>(fv);
    t.x0 = std::min(std::max(x0, 0), w - 1);
    t.x1 = std::min(std::max(x0 + 1, 0), w - 1);
    t.y0 = std::min(std::max(y0, 0), h - 1);
    t.y1 = std::min(std::max(y0 + 1, 0), h - 1);
    return t;
}

}  // namespace

TensorPtr sample_bilinear(Tape* tape, const TensorPtr& image, const FieldNode& field) {
    GF_REQUIRE(image->shape.size() == 3, "sample_bilinear: image must be [C,H,W]");
    int c = image->shape[0], h = image->shape[1], w = image->shape[2];
    int fh = field.height, fw = field.width;
    size_t npix = static_cast<size_t>(fh) * fw;
    GF_REQUIRE(field.coords->numel() == static_cast<int64_t>(2 * npix),
               "sample_bilinear: field coords shape mismatch");

    const double* sx = field.coords->data.data();
    const double* sy = field.coords->data.data() + npix;

    std::vector<double> out(static_cast<size_t>(c) * npix, 0.0);
    for (size_t i = 0; i < npix; ++i) {
        if (!field.valid[i]) continue;
        Taps t = taps_for(sx[i], sy[i], w, h);
        for (int ch = 0; ch < c; ++ch) {
            const double* img = image->data.data() + static_cast<size_t>(ch) * h * w;
            double a = img[t.y0 * w + t.x0];
            double b = img[t.y0 * w + t.x1];
            double cc = img[t.y1 * w + t.x0];
            double d = img[t.y1 * w + t.x1];
            double top = a + (b - a) * t.fx;
            double bot = cc + (d - cc) * t.fx;
            out[static_cast<size_t>(ch) * npix + i] = top + (bot - top) * t.fy;
        }
    }

    bool rg = image->requires_grad || field.coords->requires_grad;
    auto o = std::make_shared<Tensor>();
    o->shape = {c, fh, fw};
    o->data = std::move(out);
    o->requires_grad = rg;
    ensure_all_finite("sample_bilinear output", o->data);

    if (tape && rg) {
        TensorPtr coords = field.coords;
        auto valid = std::make_shared<std::vector<uint8_t>>(field.valid);
        tape->record("sample_bilinear", {image, coords}, o,
                     [image, coords, o, valid, c, h, w, npix]() {
                         const double* sx = coords->data.data();
                         const double* sy = coords->data.data() + npix;
                         if (image->requires_grad) image->ensure_grad();
                         if (coords->requires_grad) coords->ensure_grad();
                         for (size_t i = 0; i < npix; ++i) {
                             if (!(*valid)[i]) continue;
                             Taps t = taps_for(sx[i], sy[i], w, h);
                             for (int ch = 0; ch < c; ++ch) {
                                 double g = o->grad[static_cast<size_t>(ch) * npix + i];
                                 if (g == 0.0) continue;
                                 const double* img =
                                     image->data.data() + static_cast<size_t>(ch) * h * w;
                                 double a = img[t.y0 * w + t.x0];
                                 double b = img[t.y0 * w + t.x1];
                                 double cc = img[t.y1 * w + t.x0];
                                 double d = img[t.y1 * w + t.x1];
                                 if (image->requires_grad) {
                                     double* ig =
                                         image->grad.data() + static_cast<size_t>(ch) * h * w;
                                     ig[t.y0 * w + t.x0] += g * (1 - t.fx) * (1 - t.fy);
                                     ig[t.y0 * w + t.x1] += g * t.fx * (1 - t.fy);
                                     ig[t.y1 * w + t.x0] += g * (1 - t.fx) * t.fy;
                                     ig[t.y1 * w + t.x1] += g * t.fx * t.fy;
                                 }
                                 if (coords->requires_grad) {
                                     // d(out)/du = lerp_y of horizontal differences; chain to
                                     // normalized coords via du/dsx = W.
                                     double dx = (b - a) * (1 - t.fy) + (d - cc) * t.fy;
                                     double dy = (cc + (d - cc) * t.fx) - (a + (b - a) * t.fx);
                                     coords->grad[i] += g * dx * w;
                                     coords->grad[npix + i] += g * dy * h;
                                 }
                             }
                         }
                     });
    }
    return o;
}

TensorPtr rectify(Tape* tape, const TensorPtr& image, const TensorPtr& params,
                  const GridTemplate& grid) {
    GF_REQUIRE(image->shape.size() == 3, "rectify: image must be [C,H,W]");
    FieldNode field = field_from_params(tape, params, grid, image->shape[1], image->shape[2]);
    return sample_bilinear(tape, image, field);
}

std::vector<double> sample_bilinear_plain(const std::vector<double>& image, int channels,
                                          int height, int width, const WarpField& field) {
    GF_REQUIRE(image.size() == static_cast<size_t>(channels) * height * width,
               "sample_bilinear_plain: image size mismatch");
    size_t npix = field.size();
    std::vector<double> out(static_cast<size_t>(channels) * npix, 0.0);
    for (size_t i = 0; i < npix; ++i) {
        if (!field.valid[i]) continue;
        Taps t = taps_for(field.sx[i], field.sy[i], width, height);
        for (int ch = 0; ch < channels; ++ch) {
            const double* img = image.data() + static_cast<size_t>(ch) * height * width;
            double a = img[t.y0 * width + t.x0];
            double b = img[t.y0 * width + t.x1];
            double cc = img[t.y1 * width + t.x0];
            double d = img[t.y1 * width + t.x1];
            double top = a + (b - a) * t.fx;
            double bot = cc + (d - cc) * t.fx;
            out[static_cast<size_t>(ch) * npix + i] = top + (bot - top) * t.fy;
        }
    }
    return out;
}

LandmarkMapResult map_landmark_to_rectified(const Point2& p,
                                            const std::vector<ResidualParams>& params,
                                            const GridTemplate& grid) {
    GF_REQUIRE(p.x >= 0.0 && p.x < 1.0 && p.y >= 0.0 && p.y < 1.0,
               "map_landmark_to_rectified: point outside [0,1)^2");
    GF_REQUIRE(static_cast<int>(params.size()) == grid.cell_count(),
               "map_landmark_to_rectified: params size must be n^2");
    int n = grid.n();
    bool found = false;
    LandmarkMapResult best;
    double best_dist = std::numeric_limits<double>::infinity();
    LandmarkMapResult fallback;

    // Lexicographic (i, j) scan; the first in-cell candidate wins.
    for (int i = 0; i < n && !found; ++i) {
        for (int j = 0; j < n && !found; ++j) {
            Homography h = Homography::from_residual(params[grid.cell_linear(i, j)]);
            Point2 q;
            if (!h.inverse().apply_checked(p, &q)) continue;
            double x0 = static_cast<double>(i) / n, x1 = static_cast<double>(i + 1) / n;
            double y0 = static_cast<double>(j) / n, y1 = static_cast<double>(j + 1) / n;
            if (q.x >= x0 && q.x < x1 && q.y >= y0 && q.y < y1) {
                best.q = q;
                best.approximate = false;
                found = true;
            } else {
                double dx = std::max({x0 - q.x, 0.0, q.x - x1});
                double dy = std::max({y0 - q.y, 0.0, q.y - y1});
                double dist = std::hypot(dx, dy);
                if (dist < best_dist) {
                    best_dist = dist;
                    fallback.q = q;
                    fallback.approximate = true;
                }
            }
        }
    }
    if (found) return best;
    if (std::isfinite(best_dist)) return fallback;
    throw NumericError("map_landmark_to_rectified: all cell inverses failed");
}

}  // namespace gridface
