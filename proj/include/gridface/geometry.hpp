#pragma once

#include <array>
#include <vector>

#include "gridface/common.hpp"

namespace gridface {

// Dehomogenization guard: points whose homogeneous w falls at or below this
// are treated as invalid instead of producing huge coordinates.
inline constexpr double kDehomogEps = 1e-6;

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

// Residual parameterization of a local homography: H = I + dH with the
// eight entries h1..h8 filling the matrix row-major (h1..h3 row 0, h4..h6
// row 1, h7 h8 row 2) and the bottom-right entry pinned at 1.
struct ResidualParams {
    std::array<double, 8> h{};
};

// 3x3 projective map with m[2][2] fixed at 1, stored row-major.
class Homography {
public:
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

    static Homography identity() { return Homography(); }
    static Homography from_residual(const ResidualParams& r);

    // Extracts h1..h8 back out of the matrix.
    ResidualParams to_residual() const;

    double det() const;

    // Dehomogenized application; throws NumericError when |w| <= eps.
    Point2 apply(const Point2& q) const;

    // Non-throwing variant; returns false on a failed dehomogenization.
    bool apply_checked(const Point2& q, Point2* out) const;

    // Inverse renormalized so that the bottom-right entry is 1 again.
    // Throws NumericError when |det| <= 1e-10.
    Homography inverse() const;

    // this ∘ other: (this * other) as matrices, renormalized.
    Homography compose(const Homography& other) const;
};

// Jacobian of dehomog((I + dH) q̂) with respect to h1..h8 at a fixed q.
// d[0][*] is the row for the x output, d[1][*] for y.
struct Jacobian2x8 {
    double d[2][8];
};

Jacobian2x8 residual_jacobian(const Homography& h, const Point2& q);

// n x n partition of the rectified unit square into half-open cells
// Q(i,j) = [i/n,(i+1)/n) x [j/n,(j+1)/n), with i indexing x and j indexing y.
class GridTemplate {
public:
    explicit GridTemplate(int n) : n_(n) { GF_REQUIRE(n >= 1, "GridTemplate: n must be >= 1"); }

    int n() const { return n_; }
    int cell_count() const { return n_ * n_; }
    int corner_count() const { return (n_ + 1) * (n_ + 1); }

    struct CellIndex {
        int i = 0;
        int j = 0;
    };

    // Half-open membership; q must lie in [0,1)^2.
    CellIndex cell_of(const Point2& q) const;

    // Linear cell id, j-major: id = j*n + i.
    int cell_linear(int i, int j) const { return j * n_ + i; }
    int cell_linear(const CellIndex& c) const { return cell_linear(c.i, c.j); }

    Point2 corner(int ci, int cj) const {
        GF_REQUIRE(ci >= 0 && ci <= n_ && cj >= 0 && cj <= n_, "GridTemplate: corner out of range");
        return {static_cast<double>(ci) / n_, static_cast<double>(cj) / n_};
    }

    // Cells adjacent to corner (ci,cj), in ascending (j,i) order. Interior
    // corners have 4, edge corners 2, the four outer corners 1.
    std::vector<CellIndex> cells_at_corner(int ci, int cj) const;

private:
    int n_;
};

// All mapping coordinates of a corner under the homographies of its
// adjacent cells, in the order of GridTemplate::cells_at_corner.
// Duplicates are retained.
std::vector<Point2> corner_mappings(int ci, int cj, const GridTemplate& grid,
                                    const std::vector<ResidualParams>& params);

}  // namespace gridface
