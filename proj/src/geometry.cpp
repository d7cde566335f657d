#include "gridface/geometry.hpp"

#include <cmath>

namespace gridface {

Homography Homography::from_residual(const ResidualParams& r) {
    for (double v : r.h) {
        if (!std::isfinite(v)) throw NumericError("residual params contain non-finite values");
    }
    Homography out;
    out.m = {1.0 + r.h[0], r.h[1], r.h[2], r.h[3], 1.0 + r.h[4], r.h[5], r.h[6], r.h[7], 1.0};
    return out;
}

ResidualParams Homography::to_residual() const {
    ResidualParams r;
    r.h = {m[0] - 1.0, m[1], m[2], m[3], m[4] - 1.0, m[5], m[6], m[7]};
    return r;
}

double Homography::det() const {
    return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
           m[2] * (m[3] * m[7] - m[4] * m[6]);
}

bool Homography::apply_checked(const Point2& q, Point2* out) const {
    double rx = m[0] * q.x + m[1] * q.y + m[2];
    double ry = m[3] * q.x + m[4] * q.y + m[5];
    double rw = m[6] * q.x + m[7] * q.y + m[8];
    if (std::abs(rw) <= kDehomogEps) return false;
    out->x = rx / rw;
    out->y = ry / rw;
    return true;
}

Point2 Homography::apply(const Point2& q) const {
    Point2 p;
    if (!apply_checked(q, &p)) {
        throw NumericError("homography: dehomogenization near-singular");
    }
    return p;
}

Homography Homography::inverse() const {
    double d = det();
    if (std::abs(d) <= 1e-10) throw NumericError("homography: singular matrix");
    // Adjugate / det, then renormalize so the bottom-right entry is 1.
    std::array<double, 9> a;
    a[0] = (m[4] * m[8] - m[5] * m[7]) / d;
    a[1] = (m[2] * m[7] - m[1] * m[8]) / d;
    a[2] = (m[1] * m[5] - m[2] * m[4]) / d;
    a[3] = (m[5] * m[6] - m[3] * m[8]) / d;
    a[4] = (m[0] * m[8] - m[2] * m[6]) / d;
    a[5] = (m[2] * m[3] - m[0] * m[5]) / d;
    a[6] = (m[3] * m[7] - m[4] * m[6]) / d;
    a[7] = (m[1] * m[6] - m[0] * m[7]) / d;
    a[8] = (m[0] * m[4] - m[1] * m[3]) / d;
    if (std::abs(a[8]) <= 1e-12) throw NumericError("homography: inverse not normalizable");
    Homography out;
    for (int i = 0; i < 9; ++i) out.m[i] = a[i] / a[8];
    out.m[8] = 1.0;
    return out;
}

Homography Homography::compose(const Homography& other) const {
    std::array<double, 9> r{};
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (int k = 0; k < 3; ++k) acc += m[i * 3 + k] * other.m[k * 3 + j];
            r[i * 3 + j] = acc;
        }
    }
    if (std::abs(r[8]) <= 1e-12) throw NumericError("homography: composition not normalizable");
    Homography out;
    for (int i = 0; i < 9; ++i) out.m[i] = r[i] / r[8];
    out.m[8] = 1.0;
    return out;
}

Jacobian2x8 residual_jacobian(const Homography& h, const Point2& q) {
    double a = h.m[0] * q.x + h.m[1] * q.y + h.m[2];
    double b = h.m[3] * q.x + h.m[4] * q.y + h.m[5];
    double w = h.m[6] * q.x + h.m[7] * q.y + h.m[8];
    if (std::abs(w) <= kDehomogEps) {
        throw NumericError("residual_jacobian: dehomogenization near-singular");
    }
    double iw = 1.0 / w;
    double iw2 = iw * iw;
    Jacobian2x8 j{};
    j.d[0][0] = q.x * iw;
    j.d[0][1] = q.y * iw;
    j.d[0][2] = iw;
    j.d[0][6] = -a * q.x * iw2;
    j.d[0][7] = -a * q.y * iw2;
    j.d[1][3] = q.x * iw;
    j.d[1][4] = q.y * iw;
    j.d[1][5] = iw;
    j.d[1][6] = -b * q.x * iw2;
    j.d[1][7] = -b * q.y * iw2;
    return j;
}

GridTemplate::CellIndex GridTemplate::cell_of(const Point2& q) const {
    if (!(q.x >= 0.0 && q.x < 1.0 && q.y >= 0.0 && q.y < 1.0)) {
        throw ContractError("cell_of: point outside [0,1)^2");
    }
    CellIndex c;
    c.i = static_cast<int>(std::floor(q.x * n_));
    c.j = static_cast<int>(std::floor(q.y * n_));
    // floor(q*n) can round up to n when q*n is within one ulp of it
    if (c.i >= n_) c.i = n_ - 1;
    if (c.j >= n_) c.j = n_ - 1;
    return c;
}

std::vector<GridTemplate::CellIndex> GridTemplate::cells_at_corner(int ci, int cj) const {
    GF_REQUIRE(ci >= 0 && ci <= n_ && cj >= 0 && cj <= n_, "cells_at_corner: corner out of range");
    std::vector<CellIndex> out;
    for (int j = cj - 1; j <= cj; ++j) {
        if (j < 0 || j >= n_) continue;
        for (int i = ci - 1; i <= ci; ++i) {
            if (i < 0 || i >= n_) continue;
            out.push_back({i, j});
        }
    }
    return out;
}

std::vector<Point2> corner_mappings(int ci, int cj, const GridTemplate& grid,
                                    const std::vector<ResidualParams>& params) {
    GF_REQUIRE(static_cast<int>(params.size()) == grid.cell_count(),
               "corner_mappings: params size must be n^2");
    Point2 corner = grid.corner(ci, cj);
    std::vector<Point2> out;
    for (const auto& cell : grid.cells_at_corner(ci, cj)) {
        Homography h = Homography::from_residual(params[grid.cell_linear(cell)]);
        out.push_back(h.apply(corner));
    }
    return out;
}

}  // namespace gridface
