#include "gridface/synthdata.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gridface/image_io.hpp"
#include "gridface/warp.hpp"

namespace gridface {

IdentitySpec IdentitySpec::from_seed(uint64_t seed) {
    Rng rng(Rng::derive(seed, 0x1DF));
    IdentitySpec s;
    s.seed = seed;
    s.eye_sep = rng.uniform(0.28, 0.40);
    s.eye_radius = rng.uniform(0.040, 0.065);
    s.nose_len = rng.uniform(0.10, 0.16);
    s.nose_width = rng.uniform(0.022, 0.045);
    s.mouth_width = rng.uniform(0.20, 0.32);
    s.mouth_curve = rng.uniform(-0.035, 0.07);
    s.face_aspect = rng.uniform(0.88, 1.05);
    s.skin_albedo = rng.uniform(0.60, 0.82);
    s.eye_albedo = rng.uniform(0.03, 0.15);
    s.nose_albedo = rng.uniform(0.30, 0.48);
    s.mouth_albedo = rng.uniform(0.20, 0.35);
    s.bg_albedo = rng.uniform(0.90, 1.00);
    return s;
}

Landmarks canonical_landmarks(const IdentitySpec& spec) {
    Landmarks lm;
    lm[0] = {0.5 - spec.eye_sep / 2.0, kEyeLineY};
    lm[1] = {0.5 + spec.eye_sep / 2.0, kEyeLineY};
    lm[2] = {0.5, kNoseTipY};
    lm[3] = {0.5 - spec.mouth_width / 2.0, kMouthY};
    lm[4] = {0.5 + spec.mouth_width / 2.0, kMouthY};
    return lm;
}

namespace {

// Point-in-shape tests for the cartoon face, evaluated per subsample.
struct FacePainter {
    const IdentitySpec& s;
    Landmarks lm;
    double face_cx = 0.5, face_cy = 0.52;
    double face_rx, face_ry;
    double mouth_half;

    explicit FacePainter(const IdentitySpec& spec) : s(spec) {
        lm = canonical_landmarks(spec);
        face_rx = 0.34 * spec.face_aspect;
        face_ry = 0.42;
        mouth_half = spec.mouth_width / 2.0;
    }

    double shade(double x, double y) const {
        double v = s.bg_albedo;
        double ex = (x - face_cx) / face_rx;
        double ey = (y - face_cy) / face_ry;
        if (ex * ex + ey * ey <= 1.0) v = s.skin_albedo;
        for (int e = 0; e < 2; ++e) {
            double dx = x - lm[e].x, dy = y - lm[e].y;
            if (dx * dx + dy * dy <= s.eye_radius * s.eye_radius) v = s.eye_albedo;
        }
        // Nose: triangle with apex above the tip, base through the tip line.
        double apex_y = kNoseTipY - s.nose_len;
        if (y >= apex_y && y <= kNoseTipY) {
            double t = (y - apex_y) / s.nose_len;  // 0 at apex, 1 at base
            if (std::abs(x - 0.5) <= t * s.nose_width) v = s.nose_albedo;
        }
        // Mouth: thick quadratic band between the two corners.
        if (std::abs(x - 0.5) <= mouth_half) {
            double t = (x - 0.5) / mouth_half;
            double yc = kMouthY + s.mouth_curve * (1.0 - t * t);
            if (std::abs(y - yc) <= 0.016) v = s.mouth_albedo;
        }
        return v;
    }
};

constexpr int kAaGrid = 3;  // 3x3 subsamples per pixel

}  // namespace

LabeledImage render_canonical(const IdentitySpec& spec, int resolution) {
    GF_REQUIRE(resolution >= 16, "render_canonical: resolution too small");
    FacePainter painter(spec);
    LabeledImage img;
    img.height = resolution;
    img.width = resolution;
    img.pixels.assign(static_cast<size_t>(resolution) * resolution, 0.0);
    const double inv = 1.0 / resolution;
    const double sub = 1.0 / kAaGrid;
    for (int py = 0; py < resolution; ++py) {
        for (int px = 0; px < resolution; ++px) {
            double acc = 0.0;
            for (int sy = 0; sy < kAaGrid; ++sy) {
                for (int sx = 0; sx < kAaGrid; ++sx) {
                    double x = (px + (sx + 0.5) * sub) * inv;
                    double y = (py + (sy + 0.5) * sub) * inv;
                    acc += painter.shade(x, y);
                }
            }
            img.pixels[static_cast<size_t>(py) * resolution + px] = acc / (kAaGrid * kAaGrid);
        }
    }
    img.landmarks = painter.lm;
    img.identity = static_cast<int>(spec.seed);
    img.transform = Homography::identity();
    img.noise_level = 0.0;
    return img;
}

Homography fit_similarity(const Landmarks& src, const Landmarks& dst) {
    double mx = 0, my = 0, ux = 0, uy = 0;
    for (int i = 0; i < 5; ++i) {
        mx += src[i].x;
        my += src[i].y;
        ux += dst[i].x;
        uy += dst[i].y;
    }
    mx /= 5;
    my /= 5;
    ux /= 5;
    uy /= 5;
    double denom = 0, a_num = 0, b_num = 0;
    for (int i = 0; i < 5; ++i) {
        double xc = src[i].x - mx, yc = src[i].y - my;
        double uc = dst[i].x - ux, vc = dst[i].y - uy;
        denom += xc * xc + yc * yc;
        a_num += xc * uc + yc * vc;
        b_num += xc * vc - yc * uc;
    }
    if (denom <= 1e-12) throw NumericError("fit_similarity: degenerate source points");
    double a = a_num / denom, b = b_num / denom;
    Homography h;
    h.m = {a, -b, ux - (a * mx - b * my), b, a, uy - (b * mx + a * my), 0.0, 0.0, 1.0};
    return h;
}

LabeledImage apply_content_transform(const LabeledImage& canonical, const Homography& content_map) {
    LabeledImage out = canonical;
    Homography pullback = content_map.inverse();
    // out(q) = canonical(W^{-1} q), sampled at pixel centers.
    ResidualParams rp = pullback.to_residual();
    GridTemplate grid(1);
    WarpField field = build_warp_field({rp}, grid, canonical.height, canonical.width);
    out.pixels = sample_bilinear_plain(canonical.pixels, 1, canonical.height, canonical.width,
                                       field);
    for (auto& lm : out.landmarks) lm = content_map.apply(lm);
    out.transform = content_map.compose(canonical.transform);
    return out;
}

LabeledImage perturb(const LabeledImage& canonical, const PerturbationSpec& spec, uint64_t seed,
                     PerturbStats* stats) {
    GF_REQUIRE(spec.sigma_lm_rel >= 0.0 && spec.projective_jitter >= 0.0,
               "perturb: amplitudes must be non-negative");
    const Landmarks& lm = canonical.landmarks;
    double d = std::hypot(lm[1].x - lm[0].x, lm[1].y - lm[0].y);  // interocular
    double sigma = spec.sigma_lm_rel * d;

    const int max_attempts = 100;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        Rng rng(Rng::derive(seed, 0x9E2 + attempt));
        Landmarks noisy;
        for (int i = 0; i < 5; ++i) {
            noisy[i] = {lm[i].x + sigma * rng.normal(), lm[i].y + sigma * rng.normal()};
        }
        Homography content_map;
        try {
            Homography t = fit_similarity(lm, noisy);
            content_map = t.inverse();
            if (spec.projective_jitter > 0.0) {
                Homography hj;
                hj.m[6] = rng.normal(0.0, spec.projective_jitter);
                hj.m[7] = rng.normal(0.0, spec.projective_jitter);
                content_map = hj.compose(content_map);
            }
        } catch (const NumericError&) {
            if (stats) stats->regenerated++;
            continue;
        }
        // Reject fits that would push content out of frame.
        double sx = std::hypot(content_map.m[0], content_map.m[3]);
        if (sx < 0.4 || sx > 2.5) {
            if (stats) stats->regenerated++;
            continue;
        }
        LabeledImage out;
        try {
            out = apply_content_transform(canonical, content_map);
        } catch (const NumericError&) {
            if (stats) stats->regenerated++;
            continue;
        }
        bool in_frame = true;
        for (const auto& p : out.landmarks) {
            if (!(p.x >= 0.02 && p.x < 0.98 && p.y >= 0.02 && p.y < 0.98)) in_frame = false;
        }
        if (!in_frame) {
            if (stats) stats->regenerated++;
            continue;
        }
        out.noise_level = spec.sigma_lm_rel;
        if (stats) stats->noisy_landmarks = noisy;
        return out;
    }
    throw NumericError("perturb: could not produce a valid perturbation after retries");
}

std::vector<Triplet> sample_triplets(const std::vector<LabeledImage>& dataset, int count,
                                     Rng& rng) {
    GF_REQUIRE(count >= 1, "sample_triplets: count must be positive");
    std::map<int, std::vector<int>> by_id;
    for (size_t i = 0; i < dataset.size(); ++i) {
        by_id[dataset[i].identity].push_back(static_cast<int>(i));
    }
    std::vector<int> ids;
    std::vector<int> anchor_ids;  // identities with >= 2 images
    for (const auto& [id, idxs] : by_id) {
        ids.push_back(id);
        if (idxs.size() >= 2) anchor_ids.push_back(id);
    }
    GF_REQUIRE(ids.size() >= 2 && !anchor_ids.empty(),
               "sample_triplets: need >= 2 identities and an identity with >= 2 images");

    std::vector<Triplet> out;
    out.reserve(count);
    for (int t = 0; t < count; ++t) {
        int aid = anchor_ids[rng.below(anchor_ids.size())];
        const auto& pool = by_id[aid];
        int a = static_cast<int>(rng.below(pool.size()));
        int p = static_cast<int>(rng.below(pool.size() - 1));
        if (p >= a) ++p;
        int nid = aid;
        while (nid == aid) nid = ids[rng.below(ids.size())];
        const auto& npool = by_id[nid];
        int n = static_cast<int>(rng.below(npool.size()));
        out.push_back({pool[a], pool[p], npool[n]});
    }
    return out;
}

void write_dataset(const std::string& dir, const std::vector<LabeledImage>& images) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::ofstream manifest(fs::path(dir) / "manifest.csv", std::ios::binary);
    if (!manifest) throw IoError("write_dataset: cannot open manifest in " + dir);
    manifest << "id,path";
    for (int i = 0; i < 5; ++i) manifest << ",lm" << i << "x,lm" << i << "y";
    for (int i = 0; i < 9; ++i) manifest << ",t" << i;
    manifest << ",noise\n";
    char buf[64];
    for (size_t i = 0; i < images.size(); ++i) {
        const auto& img = images[i];
        std::snprintf(buf, sizeof(buf), "img_%06zu.pgm", i);
        std::string name = buf;
        write_pnm((fs::path(dir) / name).string(), img.pixels, 1, img.height, img.width);
        manifest << img.identity << "," << name;
        auto put = [&](double v) {
            std::snprintf(buf, sizeof(buf), "%.17g", v);
            manifest << "," << buf;
        };
        for (const auto& p : img.landmarks) {
            put(p.x);
            put(p.y);
        }
        for (double v : img.transform.m) put(v);
        put(img.noise_level);
        manifest << "\n";
    }
    if (!manifest) throw IoError("write_dataset: manifest write failed in " + dir);
}

std::vector<LabeledImage> load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    std::ifstream manifest(fs::path(dir) / "manifest.csv", std::ios::binary);
    if (!manifest) throw IoError("load_dataset: cannot open manifest in " + dir);
    std::string line;
    if (!std::getline(manifest, line)) throw IoError("load_dataset: empty manifest");
    std::vector<LabeledImage> out;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cols.push_back(cell);
        if (cols.size() != 2 + 10 + 9 + 1) throw IoError("load_dataset: malformed manifest row");
        LabeledImage img;
        img.identity = std::stoi(cols[0]);
        int c, h, w;
        img.pixels = read_pnm((fs::path(dir) / cols[1]).string(), &c, &h, &w);
        if (c != 1) throw IoError("load_dataset: expected grayscale image");
        img.height = h;
        img.width = w;
        int k = 2;
        for (int i = 0; i < 5; ++i) {
            img.landmarks[i].x = std::strtod(cols[k++].c_str(), nullptr);
            img.landmarks[i].y = std::strtod(cols[k++].c_str(), nullptr);
        }
        for (int i = 0; i < 9; ++i) img.transform.m[i] = std::strtod(cols[k++].c_str(), nullptr);
        img.noise_level = std::strtod(cols[k++].c_str(), nullptr);
        out.push_back(std::move(img));
    }
    return out;
}

}  // namespace gridface
