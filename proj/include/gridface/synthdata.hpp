#pragma once

#include <array>
#include <string>
#include <vector>

#include "gridface/geometry.hpp"
#include "gridface/rng.hpp"

namespace gridface {

// Shape and albedo parameters of one synthetic identity, drawn from fixed
// ranges by the seed. Same seed, same face.
struct IdentitySpec {
    uint64_t seed = 0;
    double eye_sep = 0.34;      // interocular distance (normalized units)
    double eye_radius = 0.055;
    double nose_len = 0.13;
    double nose_width = 0.033;
    double mouth_width = 0.26;
    double mouth_curve = 0.02;
    double face_aspect = 0.95;
    double skin_albedo = 0.72;
    double eye_albedo = 0.08;
    double nose_albedo = 0.38;
    double mouth_albedo = 0.27;
    double bg_albedo = 0.95;

    static IdentitySpec from_seed(uint64_t seed);
};

// Canonical template ordinates shared by all identities: eyes on one
// horizontal line, nose tip and mouth line at fixed heights.
inline constexpr double kEyeLineY = 0.40;
inline constexpr double kNoseTipY = 0.54;
inline constexpr double kMouthY = 0.66;

// Landmark order: left eye, right eye, nose tip, left mouth corner, right
// mouth corner ("left" = smaller x).
using Landmarks = std::array<Point2, 5>;

Landmarks canonical_landmarks(const IdentitySpec& spec);

struct LabeledImage {
    std::vector<double> pixels;  // [H*W], grayscale, values in [0,1]
    int height = 0;
    int width = 0;
    Landmarks landmarks{};       // true landmark positions in this image
    int identity = 0;
    Homography transform;        // canonical content coords -> this image
    double noise_level = 0.0;    // sigma_lm in units of the interocular distance
};

// Deterministic anti-aliased rasterization of the identity at canonical
// pose. Landmarks are the canonical template positions.
LabeledImage render_canonical(const IdentitySpec& spec, int resolution);

struct PerturbationSpec {
    double sigma_lm_rel = 0.0;       // landmark noise, units of interocular distance
    double projective_jitter = 0.0;  // stddev of the h7/h8 entries
};

struct PerturbStats {
    int regenerated = 0;
    Landmarks noisy_landmarks{};  // the landmark noise draw behind the accepted fit
};

// Simulates alignment against noisy landmarks: draw iid Gaussian noise on
// each landmark coordinate, fit the least-squares similarity from the
// canonical landmarks to the noisy ones, and resample the image through
// that fit (optionally composed with a projective jitter). The returned
// landmarks are the true positions mapped through the applied transform,
// and `transform` records the exact content map. Degenerate or
// out-of-frame draws are regenerated with a derived seed and counted.
LabeledImage perturb(const LabeledImage& canonical, const PerturbationSpec& spec, uint64_t seed,
                     PerturbStats* stats = nullptr);

// Bypass mode: apply a known content map directly (no noise, no fitting).
LabeledImage apply_content_transform(const LabeledImage& canonical, const Homography& content_map);

// Least-squares similarity (scale+rotation+translation) mapping src points
// onto dst points. Throws NumericError when the source spread is
// degenerate.
Homography fit_similarity(const Landmarks& src, const Landmarks& dst);

struct Triplet {
    int anchor = 0;
    int positive = 0;
    int negative = 0;
};

// Uniform triplet sampling: anchor identity, two distinct images of it,
// then a different identity for the negative. Needs >= 2 identities with
// >= 2 images each among the anchors.
std::vector<Triplet> sample_triplets(const std::vector<LabeledImage>& dataset, int count,
                                     Rng& rng);

// Dataset persistence: one PGM per image plus manifest.csv with columns
// id, path, 10 landmark coordinates, 9 row-major transform entries, noise
// level. Values round-trip exactly.
void write_dataset(const std::string& dir, const std::vector<LabeledImage>& images);
std::vector<LabeledImage> load_dataset(const std::string& dir);

}  // namespace gridface
