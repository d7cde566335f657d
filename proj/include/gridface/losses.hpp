#pragma once

#include "gridface/dae.hpp"
#include "gridface/warp.hpp"

namespace gridface {

struct ObjectiveWeights {
    double lambda_reg = 10.0;
    double lambda_de = 1.0;
    double alpha = 0.3;
};

struct LossBreakdown {
    double recog = 0.0;
    double reg = 0.0;
    double de = 0.0;
    double total = 0.0;
    ObjectiveWeights weights;
};

// Mean over cell corners of the summed pairwise distances among each
// corner's images under its adjacent cells' homographies. Zero exactly when
// the shared-corner mappings coincide. Gradients flow to every residual
// entry through the projective jacobians.
TensorPtr deformation_loss(Tape* tape, const TensorPtr& params, const GridTemplate& grid);

// Score-based regularizer node. Forward reports ||h(I) - I||^2 / (2 sigma^2 P)
// with P the raster size; backward injects (I - h(I)) / (sigma^2 P), i.e.
// the stop-gradient derivative of the forward value with h held constant.
// The denoiser must be frozen and trained at the same sigma.
TensorPtr dae_regularizer(Tape* tape, const TensorPtr& rectified, const DenoiserModel& denoiser,
                          double sigma);

// Differentiable stand-in for the regularizer used by finite-difference
// checks: same value and same gradient at the point where `target` was
// captured (target = h(I) there), but an honest function of I.
TensorPtr frozen_target_penalty(Tape* tape, const TensorPtr& rectified,
                                const std::vector<double>& target, double sigma);

// max(0, d_pos - d_neg + alpha) with subgradient 0 at the hinge point.
TensorPtr triplet_loss(Tape* tape, const TensorPtr& d_pos, const TensorPtr& d_neg, double alpha);

// Euclidean distance between two embedding vectors as a scalar node.
TensorPtr embedding_distance(Tape* tape, const TensorPtr& a, const TensorPtr& b);

struct TripletImages {
    TensorPtr anchor;
    TensorPtr positive;
    TensorPtr negative;
};

struct JointModels {
    const RectifierNet* rectifier = nullptr;  // null for the no-rectifier baseline
    ParameterStore* theta = nullptr;          // rectifier params
    const EmbeddingNet* embedder = nullptr;
    ParameterStore* phi = nullptr;            // embedding params
    const DenoiserModel* denoiser = nullptr;  // null disables the reg term
};

// Denoiser outputs captured at a fixed parameter point; lets the objective
// be rebuilt as an honest function of the parameters for finite-difference
// checks (the targets stay put while the parameters move).
struct RegTargets {
    std::array<std::vector<double>, 3> target;
};

RegTargets capture_reg_targets(const TripletImages& triplet, const JointModels& models);

// Builds the full objective on the tape: all three images rectified with
// shared theta, embedded with shared phi; the reg and deformation terms are
// averaged over the three images. With reg_targets supplied the reg term
// takes the frozen-target form: same value and gradient at the capture
// point, finite-differentiable everywhere.
LossBreakdown joint_objective(Tape* tape, const TripletImages& triplet, const JointModels& models,
                              const ObjectiveWeights& weights, TensorPtr* total_node,
                              const RegTargets* reg_targets = nullptr);

}  // namespace gridface
