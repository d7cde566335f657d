#include "gridface/losses.hpp"

#include <cmath>
#include <memory>

namespace gridface {

namespace {

struct CornerEntry {
    int cell;         // linear cell id
    Point2 mapped;    // corner image under that cell's homography
    Jacobian2x8 jac;  // d(mapped)/dh for that cell
};

}  // namespace

TensorPtr deformation_loss(Tape* tape, const TensorPtr& params, const GridTemplate& grid) {
    GF_REQUIRE(params->numel() == 8 * grid.cell_count(),
               "deformation_loss: params tensor must hold 8*n^2 values");
    int n = grid.n();
    std::vector<ResidualParams> plain(grid.cell_count());
    for (int c = 0; c < grid.cell_count(); ++c) {
        for (int k = 0; k < 8; ++k) plain[c].h[k] = params->data[8 * c + k];
    }
    std::vector<Homography> hs(plain.size());
    for (size_t c = 0; c < plain.size(); ++c) hs[c] = Homography::from_residual(plain[c]);

    double inv_corners = 1.0 / grid.corner_count();
    double value = 0.0;
    // Per-corner mapping lists, kept for the backward rule.
    auto corners = std::make_shared<std::vector<std::vector<CornerEntry>>>();
    corners->reserve(grid.corner_count());

    for (int cj = 0; cj <= n; ++cj) {
        for (int ci = 0; ci <= n; ++ci) {
            Point2 corner = grid.corner(ci, cj);
            std::vector<CornerEntry> entries;
            for (const auto& cell : grid.cells_at_corner(ci, cj)) {
                int lin = grid.cell_linear(cell);
                CornerEntry e;
                e.cell = lin;
                e.mapped = hs[lin].apply(corner);
                e.jac = residual_jacobian(hs[lin], corner);
                entries.push_back(e);
            }
            for (size_t a = 0; a < entries.size(); ++a) {
                for (size_t b = a + 1; b < entries.size(); ++b) {
                    value += std::hypot(entries[a].mapped.x - entries[b].mapped.x,
                                        entries[a].mapped.y - entries[b].mapped.y);
                }
            }
            corners->push_back(std::move(entries));
        }
    }
    value *= inv_corners;

    bool rg = params->requires_grad;
    auto out = Tensor::scalar(value, rg);
    if (tape && rg) {
        tape->record("deformation_loss", {params}, out, [params, out, corners, inv_corners]() {
            params->ensure_grad();
            double g = out->grad[0] * inv_corners;
            for (const auto& entries : *corners) {
                for (size_t a = 0; a < entries.size(); ++a) {
                    for (size_t b = a + 1; b < entries.size(); ++b) {
                        double dx = entries[a].mapped.x - entries[b].mapped.x;
                        double dy = entries[a].mapped.y - entries[b].mapped.y;
                        double dist = std::hypot(dx, dy);
                        if (dist == 0.0) continue;  // subgradient 0 at coincidence
                        double ux = g * dx / dist;
                        double uy = g * dy / dist;
                        double* ga = params->grad.data() + 8 * entries[a].cell;
                        double* gb = params->grad.data() + 8 * entries[b].cell;
                        for (int k = 0; k < 8; ++k) {
                            ga[k] += ux * entries[a].jac.d[0][k] + uy * entries[a].jac.d[1][k];
                            gb[k] -= ux * entries[b].jac.d[0][k] + uy * entries[b].jac.d[1][k];
                        }
                    }
                }
            }
        });
    }
    return out;
}

TensorPtr dae_regularizer(Tape* tape, const TensorPtr& rectified, const DenoiserModel& denoiser,
                          double sigma) {
    GF_REQUIRE(sigma > 0.0, "dae_regularizer: sigma must be positive");
    GF_REQUIRE(denoiser.frozen(), "dae_regularizer: denoiser must be frozen");
    GF_REQUIRE(rectified->shape.size() == 3, "dae_regularizer: image must be [C,H,W]");
    GF_REQUIRE(rectified->shape[0] == denoiser.channels() &&
                   rectified->shape[1] == denoiser.height() &&
                   rectified->shape[2] == denoiser.width(),
               "dae_regularizer: image shape does not match denoiser input");

    std::vector<double> h = denoiser.apply(rectified->data);
    double p = static_cast<double>(rectified->data.size());
    double inv = 1.0 / (sigma * sigma * p);
    double value = 0.0;
    std::vector<double> grad(h.size());
    for (size_t i = 0; i < h.size(); ++i) {
        double r = h[i] - rectified->data[i];
        value += r * r;
        grad[i] = -r * inv;
    }
    value *= 0.5 * inv;
    return ops::custom_scalar(tape, rectified, value, std::move(grad));
}

TensorPtr frozen_target_penalty(Tape* tape, const TensorPtr& rectified,
                                const std::vector<double>& target, double sigma) {
    GF_REQUIRE(sigma > 0.0, "frozen_target_penalty: sigma must be positive");
    GF_REQUIRE(target.size() == rectified->data.size(),
               "frozen_target_penalty: target shape mismatch");
    auto target_t = Tensor::create(rectified->shape, target);
    auto diff = ops::sub(tape, rectified, target_t);
    auto sq = ops::mul(tape, diff, diff);
    auto s = ops::sum(tape, sq);
    double p = static_cast<double>(target.size());
    return ops::scale(tape, s, 0.5 / (sigma * sigma * p));
}

TensorPtr embedding_distance(Tape* tape, const TensorPtr& a, const TensorPtr& b) {
    auto diff = ops::sub(tape, a, b);
    auto sq = ops::mul(tape, diff, diff);
    return ops::sqrt_elem(tape, ops::sum(tape, sq));
}

TensorPtr triplet_loss(Tape* tape, const TensorPtr& d_pos, const TensorPtr& d_neg, double alpha) {
    GF_REQUIRE(d_pos->is_scalar() && d_neg->is_scalar(), "triplet_loss: distances must be scalar");
    GF_REQUIRE(d_pos->value() >= 0.0 && d_neg->value() >= 0.0,
               "triplet_loss: distances must be non-negative");
    auto margin = ops::add_scalar(tape, ops::sub(tape, d_pos, d_neg), alpha);
    return ops::relu(tape, margin);
}

RegTargets capture_reg_targets(const TripletImages& triplet, const JointModels& models) {
    GF_REQUIRE(models.denoiser != nullptr, "capture_reg_targets: denoiser required");
    const TensorPtr images[3] = {triplet.anchor, triplet.positive, triplet.negative};
    RegTargets out;
    for (int t = 0; t < 3; ++t) {
        TensorPtr rectified = images[t];
        if (models.rectifier) {
            GridTemplate grid(models.rectifier->grid_n());
            auto params = models.rectifier->predict(nullptr, *models.theta, images[t]);
            rectified = rectify(nullptr, images[t], params, grid);
        }
        out.target[t] = models.denoiser->apply(rectified->data);
    }
    return out;
}

LossBreakdown joint_objective(Tape* tape, const TripletImages& triplet, const JointModels& models,
                              const ObjectiveWeights& weights, TensorPtr* total_node,
                              const RegTargets* reg_targets) {
    GF_REQUIRE(models.embedder != nullptr && models.phi != nullptr,
               "joint_objective: embedder required");
    GF_REQUIRE(weights.lambda_reg >= 0.0 && weights.lambda_de >= 0.0 && weights.alpha >= 0.0,
               "joint_objective: weights must be non-negative");
    const TensorPtr images[3] = {triplet.anchor, triplet.positive, triplet.negative};

    TensorPtr rectified[3];
    TensorPtr residuals[3];
    if (models.rectifier) {
        GF_REQUIRE(models.theta != nullptr, "joint_objective: rectifier params required");
        GridTemplate grid(models.rectifier->grid_n());
        for (int t = 0; t < 3; ++t) {
            residuals[t] = models.rectifier->predict(tape, *models.theta, images[t]);
            rectified[t] = rectify(tape, images[t], residuals[t], grid);
        }
    } else {
        for (int t = 0; t < 3; ++t) rectified[t] = images[t];
    }

    TensorPtr emb[3];
    for (int t = 0; t < 3; ++t) emb[t] = models.embedder->embed(tape, *models.phi, rectified[t]);
    auto d_pos = embedding_distance(tape, emb[0], emb[1]);
    auto d_neg = embedding_distance(tape, emb[0], emb[2]);
    auto recog = triplet_loss(tape, d_pos, d_neg, weights.alpha);

    TensorPtr reg;
    if (models.denoiser) {
        TensorPtr terms[3];
        for (int t = 0; t < 3; ++t) {
            if (reg_targets) {
                terms[t] = frozen_target_penalty(tape, rectified[t], reg_targets->target[t],
                                                 models.denoiser->sigma());
            } else {
                terms[t] = dae_regularizer(tape, rectified[t], *models.denoiser,
                                           models.denoiser->sigma());
            }
        }
        reg = ops::scale(tape, ops::add(tape, ops::add(tape, terms[0], terms[1]), terms[2]),
                         1.0 / 3.0);
    } else {
        reg = Tensor::scalar(0.0);
    }

    TensorPtr de;
    if (models.rectifier) {
        GridTemplate grid(models.rectifier->grid_n());
        TensorPtr terms[3];
        for (int t = 0; t < 3; ++t) terms[t] = deformation_loss(tape, residuals[t], grid);
        de = ops::scale(tape, ops::add(tape, ops::add(tape, terms[0], terms[1]), terms[2]),
                        1.0 / 3.0);
    } else {
        de = Tensor::scalar(0.0);
    }

    auto total = ops::add(tape, recog,
                          ops::add(tape, ops::scale(tape, reg, weights.lambda_reg),
                                   ops::scale(tape, de, weights.lambda_de)));

    LossBreakdown out;
    out.recog = recog->value();
    out.reg = reg->value();
    out.de = de->value();
    out.total = total->value();
    out.weights = weights;
    if (total_node) *total_node = total;
    return out;
}

}  // namespace gridface
