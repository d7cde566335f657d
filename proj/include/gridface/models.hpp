#pragma once

#include <string>

#include "gridface/ops.hpp"
#include "gridface/rng.hpp"

namespace gridface {

// Predicts the 8*n^2 residual homography entries from an input image.
// Three stride-2 convolutions, two fully connected layers. The final layer
// is zero-initialized so training starts at the identity warp.
class RectifierNet {
public:
    RectifierNet(int grid_n, int in_channels, int resolution);

    void init_params(ParameterStore& store, Rng& rng) const;

    // image is [C,H,W]; returns the flat [8*n^2] residual tensor.
    TensorPtr predict(Tape* tape, const ParameterStore& store, const TensorPtr& image) const;

    int grid_n() const { return grid_n_; }
    int resolution() const { return resolution_; }

private:
    int grid_n_, in_channels_, resolution_;
    int c1_ = 8, c2_ = 16, c3_ = 32, hidden_ = 64;
};

// Maps an image to a unit-norm embedding. Three stride-2 convolutions and
// one fully connected layer, L2-normalized output.
class EmbeddingNet {
public:
    EmbeddingNet(int in_channels, int resolution, int embed_dim = 32);

    void init_params(ParameterStore& store, Rng& rng) const;

    // image is [C,H,W]; returns the [embed_dim] unit vector.
    TensorPtr embed(Tape* tape, const ParameterStore& store, const TensorPtr& image) const;

    int embed_dim() const { return embed_dim_; }

private:
    int in_channels_, resolution_, embed_dim_;
    int c1_ = 8, c2_ = 16, c3_ = 32;
};

// Two-layer conv encoder plus two-layer decoder, the decoder layers being
// the adjoint of a convolution with respect to its data. An optional fully
// connected bottleneck sits between them; without it the net is
// translation-equivariant and cannot encode absolute layout.
struct DenoiserArch {
    int in_channels = 1;
    int enc1_channels = 8;
    int enc2_channels = 16;
    int stride = 2;   // 1 keeps resolution; 2 downsamples twice
    int fc_bottleneck = 0;       // 0 disables the fully connected pair
    bool identity_init = false;  // stride-1 only: start as the exact identity map
};

class DenoiserNet {
public:
    DenoiserNet(const DenoiserArch& arch, int height, int width);

    void init_params(ParameterStore& store, Rng& rng) const;

    // x is [N,C,H,W]; returns [N,C,H,W].
    TensorPtr forward(Tape* tape, const ParameterStore& store, const TensorPtr& x) const;

    const DenoiserArch& arch() const { return arch_; }
    int height() const { return height_; }
    int width() const { return width_; }

private:
    int mid_h() const;
    int mid_w() const;
    int bottom_h() const;
    int bottom_w() const;

    DenoiserArch arch_;
    int height_, width_;
};

// He-style normal initialization, std = sqrt(2 / fan_in).
std::vector<double> he_normal(int64_t count, int64_t fan_in, Rng& rng);

}  // namespace gridface
