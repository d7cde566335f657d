#include "gridface/models.hpp"

#include <cmath>

namespace gridface {

namespace {

TensorPtr conv_block(Tape* tape, const ParameterStore& store, const std::string& prefix,
                     const TensorPtr& x, int stride) {
    auto y = ops::conv2d(tape, x, store.get(prefix + ".w"), stride, 1);
    y = ops::add_channel_bias(tape, y, store.get(prefix + ".b"));
    return ops::relu(tape, y);
}

void init_conv(ParameterStore& store, const std::string& prefix, int out_ch, int in_ch, int k,
               Rng& rng) {
    store.add(prefix + ".w",
              Tensor::create({out_ch, in_ch, k, k},
                             he_normal(static_cast<int64_t>(out_ch) * in_ch * k * k,
                                       static_cast<int64_t>(in_ch) * k * k, rng)));
    store.add(prefix + ".b", Tensor::zeros({out_ch}));
}

void init_fc(ParameterStore& store, const std::string& prefix, int out_dim, int in_dim,
             Rng& rng) {
    store.add(prefix + ".w", Tensor::create({out_dim, in_dim},
                                            he_normal(static_cast<int64_t>(out_dim) * in_dim,
                                                      in_dim, rng)));
    store.add(prefix + ".b", Tensor::zeros({out_dim}));
}

}  // namespace

std::vector<double> he_normal(int64_t count, int64_t fan_in, Rng& rng) {
    double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<double> v(count);
    for (auto& x : v) x = rng.normal(0.0, stddev);
    return v;
}

RectifierNet::RectifierNet(int grid_n, int in_channels, int resolution)
    : grid_n_(grid_n), in_channels_(in_channels), resolution_(resolution) {
    GF_REQUIRE(grid_n >= 1, "RectifierNet: grid_n must be >= 1");
    GF_REQUIRE(resolution % 8 == 0, "RectifierNet: resolution must be divisible by 8");
}

void RectifierNet::init_params(ParameterStore& store, Rng& rng) const {
    init_conv(store, "rect.conv1", c1_, in_channels_, 3, rng);
    init_conv(store, "rect.conv2", c2_, c1_, 3, rng);
    init_conv(store, "rect.conv3", c3_, c2_, 3, rng);
    int feat = c3_ * (resolution_ / 8) * (resolution_ / 8);
    init_fc(store, "rect.fc1", hidden_, feat, rng);
    // Zero head: training starts at dH = 0, the identity warp.
    store.add("rect.fc2.w", Tensor::zeros({8 * grid_n_ * grid_n_, hidden_}));
    store.add("rect.fc2.b", Tensor::zeros({8 * grid_n_ * grid_n_}));
}

TensorPtr RectifierNet::predict(Tape* tape, const ParameterStore& store,
                                const TensorPtr& image) const {
    GF_REQUIRE(image->shape.size() == 3 && image->shape[0] == in_channels_ &&
                   image->shape[1] == resolution_ && image->shape[2] == resolution_,
               "RectifierNet: unexpected image shape");
    auto x = ops::reshape(tape, image, {1, in_channels_, resolution_, resolution_});
    x = conv_block(tape, store, "rect.conv1", x, 2);
    x = conv_block(tape, store, "rect.conv2", x, 2);
    x = conv_block(tape, store, "rect.conv3", x, 2);
    int feat = c3_ * (resolution_ / 8) * (resolution_ / 8);
    x = ops::reshape(tape, x, {1, feat});
    x = ops::relu(tape, ops::fully_connected(tape, x, store.get("rect.fc1.w"),
                                             store.get("rect.fc1.b")));
    x = ops::fully_connected(tape, x, store.get("rect.fc2.w"), store.get("rect.fc2.b"));
    return ops::reshape(tape, x, {8 * grid_n_ * grid_n_});
}

EmbeddingNet::EmbeddingNet(int in_channels, int resolution, int embed_dim)
    : in_channels_(in_channels), resolution_(resolution), embed_dim_(embed_dim) {
    GF_REQUIRE(resolution % 8 == 0, "EmbeddingNet: resolution must be divisible by 8");
    GF_REQUIRE(embed_dim >= 2, "EmbeddingNet: embed_dim must be >= 2");
}

void EmbeddingNet::init_params(ParameterStore& store, Rng& rng) const {
    init_conv(store, "emb.conv1", c1_, in_channels_, 3, rng);
    init_conv(store, "emb.conv2", c2_, c1_, 3, rng);
    init_conv(store, "emb.conv3", c3_, c2_, 3, rng);
    int feat = c3_ * (resolution_ / 8) * (resolution_ / 8);
    init_fc(store, "emb.fc", embed_dim_, feat, rng);
}

TensorPtr EmbeddingNet::embed(Tape* tape, const ParameterStore& store,
                              const TensorPtr& image) const {
    GF_REQUIRE(image->shape.size() == 3 && image->shape[0] == in_channels_ &&
                   image->shape[1] == resolution_ && image->shape[2] == resolution_,
               "EmbeddingNet: unexpected image shape");
    auto x = ops::reshape(tape, image, {1, in_channels_, resolution_, resolution_});
    x = conv_block(tape, store, "emb.conv1", x, 2);
    x = conv_block(tape, store, "emb.conv2", x, 2);
    x = conv_block(tape, store, "emb.conv3", x, 2);
    int feat = c3_ * (resolution_ / 8) * (resolution_ / 8);
    x = ops::reshape(tape, x, {1, feat});
    x = ops::fully_connected(tape, x, store.get("emb.fc.w"), store.get("emb.fc.b"));
    x = ops::l2_normalize(tape, x);
    return ops::reshape(tape, x, {embed_dim_});
}

DenoiserNet::DenoiserNet(const DenoiserArch& arch, int height, int width)
    : arch_(arch), height_(height), width_(width) {
    GF_REQUIRE(arch.stride == 1 || arch.stride == 2, "DenoiserNet: stride must be 1 or 2");
    GF_REQUIRE(!arch.identity_init || arch.stride == 1,
               "DenoiserNet: identity_init requires stride 1");
    if (arch.stride == 2) {
        GF_REQUIRE(height % 4 == 0 && width % 4 == 0,
                   "DenoiserNet: resolution must be divisible by 4 for stride 2");
    }
}

int DenoiserNet::mid_h() const { return arch_.stride == 2 ? height_ / 2 : height_; }
int DenoiserNet::mid_w() const { return arch_.stride == 2 ? width_ / 2 : width_; }
int DenoiserNet::bottom_h() const { return arch_.stride == 2 ? height_ / 4 : height_; }
int DenoiserNet::bottom_w() const { return arch_.stride == 2 ? width_ / 4 : width_; }

void DenoiserNet::init_params(ParameterStore& store, Rng& rng) const {
    const int k = 3;
    if (!arch_.identity_init) {
        init_conv(store, "dae.enc1", arch_.enc1_channels, arch_.in_channels, k, rng);
        init_conv(store, "dae.enc2", arch_.enc2_channels, arch_.enc1_channels, k, rng);
        if (arch_.fc_bottleneck > 0) {
            int feat = arch_.enc2_channels * bottom_h() * bottom_w();
            init_fc(store, "dae.fc1", arch_.fc_bottleneck, feat, rng);
            init_fc(store, "dae.fc2", feat, arch_.fc_bottleneck, rng);
        }
        // Transposed kernels keep the [K,C,kh,kw] layout of the conv they adjoin.
        store.add("dae.dec1.w",
                  Tensor::create({arch_.enc2_channels, arch_.enc1_channels, k, k},
                                 he_normal(static_cast<int64_t>(arch_.enc2_channels) *
                                               arch_.enc1_channels * k * k,
                                           static_cast<int64_t>(arch_.enc2_channels) * k * k,
                                           rng)));
        store.add("dae.dec1.b", Tensor::zeros({arch_.enc1_channels}));
        store.add("dae.dec2.w",
                  Tensor::create({arch_.enc1_channels, arch_.in_channels, k, k},
                                 he_normal(static_cast<int64_t>(arch_.enc1_channels) *
                                               arch_.in_channels * k * k,
                                           static_cast<int64_t>(arch_.enc1_channels) * k * k,
                                           rng)));
        store.add("dae.dec2.b", Tensor::zeros({arch_.in_channels}));
        return;
    }

    // Identity start: channel 0 carries the input through center taps with a
    // positive shift so ReLU stays transparent on [0,1]-ish data; the other
    // channels get small random kernels to break symmetry. The final layer
    // reads only channel 0 and removes the accumulated shift, so the whole
    // net is the exact identity map at initialization.
    const double shift = 0.25;
    const double noise = 0.0;
    // Forward conv kernel [out,in,kh,kw]: row out=0 is a pure center tap of
    // in=0; other rows are free.
    auto conv_kernel = [&](int out_ch, int in_ch) {
        std::vector<double> w(static_cast<size_t>(out_ch) * in_ch * k * k, 0.0);
        for (int o = 0; o < out_ch; ++o) {
            if (o == 0) {
                w[1 * k + 1] = 1.0;
            } else {
                for (int c = 0; c < in_ch; ++c) {
                    for (int t = 0; t < k * k; ++t) {
                        w[(static_cast<size_t>(o) * in_ch + c) * k * k + t] =
                            rng.normal(0.0, noise);
                    }
                }
            }
        }
        return w;
    };
    // Transposed kernel [K,C,kh,kw]: output channel 0 must be fed only by
    // input channel 0's center tap, so every c=0 slot with K>0 stays zero.
    auto transpose_kernel = [&](int k_ch, int c_ch, bool free_side_outputs) {
        std::vector<double> w(static_cast<size_t>(k_ch) * c_ch * k * k, 0.0);
        w[1 * k + 1] = 1.0;  // [K=0, C=0, center]
        if (free_side_outputs) {
            for (int kk = 0; kk < k_ch; ++kk) {
                for (int c = 1; c < c_ch; ++c) {
                    for (int t = 0; t < k * k; ++t) {
                        w[(static_cast<size_t>(kk) * c_ch + c) * k * k + t] =
                            rng.normal(0.0, noise);
                    }
                }
            }
        }
        return w;
    };
    auto make_bias = [&](int out_ch, double ch0) {
        std::vector<double> b(out_ch, 0.1);
        b[0] = ch0;
        return b;
    };
    store.add("dae.enc1.w", Tensor::create({arch_.enc1_channels, arch_.in_channels, k, k},
                                           conv_kernel(arch_.enc1_channels, arch_.in_channels)));
    store.add("dae.enc1.b",
              Tensor::create({arch_.enc1_channels}, make_bias(arch_.enc1_channels, shift)));
    store.add("dae.enc2.w", Tensor::create({arch_.enc2_channels, arch_.enc1_channels, k, k},
                                           conv_kernel(arch_.enc2_channels, arch_.enc1_channels)));
    store.add("dae.enc2.b",
              Tensor::create({arch_.enc2_channels}, make_bias(arch_.enc2_channels, shift)));
    store.add("dae.dec1.w",
              Tensor::create({arch_.enc2_channels, arch_.enc1_channels, k, k},
                             transpose_kernel(arch_.enc2_channels, arch_.enc1_channels, true)));
    store.add("dae.dec1.b",
              Tensor::create({arch_.enc1_channels}, make_bias(arch_.enc1_channels, shift)));
    store.add("dae.dec2.w",
              Tensor::create({arch_.enc1_channels, arch_.in_channels, k, k},
                             transpose_kernel(arch_.enc1_channels, arch_.in_channels, false)));
    store.add("dae.dec2.b",
              Tensor::create({arch_.in_channels}, std::vector<double>(arch_.in_channels,
                                                                      -3.0 * shift)));
}

TensorPtr DenoiserNet::forward(Tape* tape, const ParameterStore& store, const TensorPtr& x) const {
    GF_REQUIRE(x->shape.size() == 4 && x->shape[1] == arch_.in_channels &&
                   x->shape[2] == height_ && x->shape[3] == width_,
               "DenoiserNet: unexpected input shape");
    int s = arch_.stride;
    int batch = x->shape[0];
    auto y = conv_block(tape, store, "dae.enc1", x, s);
    y = conv_block(tape, store, "dae.enc2", y, s);
    if (arch_.fc_bottleneck > 0) {
        GF_REQUIRE(!arch_.identity_init, "DenoiserNet: fc bottleneck excludes identity init");
        int feat = arch_.enc2_channels * bottom_h() * bottom_w();
        y = ops::reshape(tape, y, {batch, feat});
        y = ops::relu(tape, ops::fully_connected(tape, y, store.get("dae.fc1.w"),
                                                 store.get("dae.fc1.b")));
        y = ops::relu(tape, ops::fully_connected(tape, y, store.get("dae.fc2.w"),
                                                 store.get("dae.fc2.b")));
        y = ops::reshape(tape, y, {batch, arch_.enc2_channels, bottom_h(), bottom_w()});
    }
    y = ops::conv2d_transpose(tape, y, store.get("dae.dec1.w"), s, 1, mid_h(), mid_w());
    y = ops::add_channel_bias(tape, y, store.get("dae.dec1.b"));
    y = ops::relu(tape, y);
    y = ops::conv2d_transpose(tape, y, store.get("dae.dec2.w"), s, 1, height_, width_);
    y = ops::add_channel_bias(tape, y, store.get("dae.dec2.b"));
    return y;
}

}  // namespace gridface
