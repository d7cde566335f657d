#pragma once

#include <cstdint>
#include <vector>

#include "gridface/geometry.hpp"
#include "gridface/ops.hpp"

namespace gridface {

// Per-rectified-pixel source coordinate (normalized) and validity bit.
// Pixel centers are ((u+0.5)/W, (v+0.5)/H); invalid entries are masked and
// never sampled.
struct WarpField {
    int height = 0;
    int width = 0;
    std::vector<double> sx, sy;       // row-major, size H*W
    std::vector<uint8_t> valid;       // 1 = sample, 0 = masked
    std::vector<int32_t> cell;        // linear cell id per pixel

    size_t size() const { return sx.size(); }
};

WarpField build_warp_field(const std::vector<ResidualParams>& params, const GridTemplate& grid,
                           int out_h, int out_w);

// Tape node holding the field coordinates as a [2,H,W] tensor so that
// gradients can flow from sampled pixels back into the residual params.
struct FieldNode {
    TensorPtr coords;                 // [2,H,W]: plane 0 = sx, plane 1 = sy
    std::vector<uint8_t> valid;
    int height = 0;
    int width = 0;
};

// Routes each output pixel through its cell's homography. params is the
// flat [8*n^2] residual tensor, cell-major with the grid's j-major linear
// cell order. Gradients flow coords -> params through the per-pixel
// projective jacobians.
FieldNode field_from_params(Tape* tape, const TensorPtr& params, const GridTemplate& grid,
                            int out_h, int out_w);

// Bilinear sampling with border clamp. image is [C,H,W]; output is
// [C,fh,fw]. Masked entries output 0 and propagate no gradient. Gradients
// are produced for both the image and the field coordinates.
TensorPtr sample_bilinear(Tape* tape, const TensorPtr& image, const FieldNode& field);

// Full differentiable rectification: build the field from params, sample.
TensorPtr rectify(Tape* tape, const TensorPtr& image, const TensorPtr& params,
                  const GridTemplate& grid);

// Plain (non-differentiable) sampler used for dataset synthesis.
std::vector<double> sample_bilinear_plain(const std::vector<double>& image, int channels,
                                          int height, int width, const WarpField& field);

// Inverse mapping diagnostic: find the rectified-coordinate preimage of an
// original-coordinate point. Exact when the point falls inside the cell
// whose inverse homography produced it; approximate (flagged) when no cell
// claims it, in which case the candidate closest to its cell is returned.
struct LandmarkMapResult {
    Point2 q;
    bool approximate = false;
};

LandmarkMapResult map_landmark_to_rectified(const Point2& p,
                                            const std::vector<ResidualParams>& params,
                                            const GridTemplate& grid);

}  // namespace gridface
