#include "gridface/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>

#include "gridface/image_io.hpp"

namespace fs = std::filesystem;

namespace gridface {

namespace {

constexpr uint64_t kTagIdentity = 11;
constexpr uint64_t kTagPerturb = 13;
constexpr uint64_t kTagTheta = 17;
constexpr uint64_t kTagPhi = 19;
constexpr uint64_t kTagTrainStream = 23;
constexpr uint64_t kTagValTriplets = 29;
constexpr uint64_t kTagDae = 31;

DenoiserArch face_denoiser_arch() {
    DenoiserArch arch;
    arch.in_channels = 1;
    arch.enc1_channels = 8;
    arch.enc2_channels = 12;
    arch.stride = 2;
    arch.fc_bottleneck = 256;  // anchors absolute layout, which convs alone cannot
    return arch;
}

std::vector<LabeledImage> make_split(const ExperimentConfig& cfg, int first_identity, int count,
                                     double noise_rel, double jitter, bool canonical_only) {
    std::vector<LabeledImage> out;
    out.reserve(static_cast<size_t>(count) *
                (canonical_only ? 1 : cfg.images_per_identity));
    for (int id = first_identity; id < first_identity + count; ++id) {
        IdentitySpec spec = IdentitySpec::from_seed(Rng::derive(cfg.seed, kTagIdentity) + id);
        LabeledImage canon = render_canonical(spec, cfg.resolution);
        canon.identity = id;
        if (canonical_only) {
            out.push_back(std::move(canon));
            continue;
        }
        PerturbationSpec pspec;
        pspec.sigma_lm_rel = noise_rel;
        pspec.projective_jitter = noise_rel > 0.0 ? jitter : 0.0;
        for (int k = 0; k < cfg.images_per_identity; ++k) {
            if (noise_rel == 0.0) {
                LabeledImage img = canon;
                out.push_back(std::move(img));
            } else {
                uint64_t seed = Rng::derive(cfg.seed, kTagPerturb) ^
                                (static_cast<uint64_t>(id) << 20) ^ static_cast<uint64_t>(k);
                LabeledImage img = perturb(canon, pspec, seed);
                img.identity = id;
                out.push_back(std::move(img));
            }
        }
    }
    return out;
}

TensorPtr image_tensor(const LabeledImage& img) {
    return Tensor::create({1, img.height, img.width}, img.pixels);
}

struct LoadedData {
    std::vector<LabeledImage> train;
    std::vector<LabeledImage> val;
};

std::string level_suffix(int level_index) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "s%03d", static_cast<int>(kNoiseLevels[level_index] * 100));
    return buf;
}

}  // namespace

std::string test_split_dir(const std::string& data_dir, int level_index) {
    return (fs::path(data_dir) / ("test_" + level_suffix(level_index))).string();
}

void run_synth(const ExperimentConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);
    int train_n = cfg.train_identities();
    int val_first = train_n;
    int test_first = train_n + cfg.val_identities;

    // Canonical views of the train+val identities feed the denoiser.
    auto canonical = make_split(cfg, 0, train_n + cfg.val_identities, 0.0, 0.0, true);
    write_dataset((fs::path(out_dir) / "canonical").string(), canonical);

    auto train = make_split(cfg, 0, train_n, cfg.train_noise, cfg.projective_jitter, false);
    write_dataset((fs::path(out_dir) / "train").string(), train);

    auto val = make_split(cfg, val_first, cfg.val_identities, cfg.train_noise,
                          cfg.projective_jitter, false);
    write_dataset((fs::path(out_dir) / "val").string(), val);

    for (int lvl = 0; lvl < 4; ++lvl) {
        auto test = make_split(cfg, test_first, cfg.test_identities, kNoiseLevels[lvl],
                               cfg.projective_jitter, false);
        write_dataset(test_split_dir(out_dir, lvl), test);
    }
}

void run_train_dae(const ExperimentConfig& cfg, const std::string& data_dir,
                   const std::string& out_ckpt) {
    cfg.validate();
    auto canonical = load_dataset((fs::path(data_dir) / "canonical").string());
    GF_REQUIRE(!canonical.empty(), "train-dae: canonical split is empty");
    std::vector<std::vector<double>> images;
    images.reserve(canonical.size());
    for (auto& img : canonical) images.push_back(img.pixels);

    DaeTrainOptions opts;
    opts.sigma = cfg.dae_sigma;
    opts.epochs = cfg.dae_epochs;
    opts.lr = cfg.dae_lr;
    opts.batch = cfg.dae_batch;
    opts.seed = Rng::derive(cfg.seed, kTagDae);
    opts.arch = face_denoiser_arch();
    DenoiserModel model =
        train_dae(images, 1, cfg.resolution, cfg.resolution, opts, nullptr);

    Checkpoint ck;
    ck.config_text = cfg.serialize();
    ck.put_store(model.params_view());
    save_checkpoint(out_ckpt, ck);
}

DenoiserModel load_dae_checkpoint(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    ExperimentConfig cfg = ExperimentConfig::parse_text(ck.config_text);
    DenoiserModel model(face_denoiser_arch(), cfg.resolution, cfg.resolution, cfg.dae_sigma);
    Rng rng(1);
    model.net().init_params(model.params(), rng);
    int filled = ck.fill_store("dae.", model.params());
    GF_REQUIRE(filled == static_cast<int>(model.params_view().size()),
               "dae checkpoint: missing tensors");
    model.freeze();
    return model;
}

TrainedModel load_model_checkpoint(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    TrainedModel m;
    m.config = ExperimentConfig::parse_text(ck.config_text);
    m.theta = std::make_shared<ParameterStore>();
    m.phi = std::make_shared<ParameterStore>();
    m.embedder = std::make_shared<EmbeddingNet>(1, m.config.resolution);
    Rng rng(1);
    m.embedder->init_params(*m.phi, rng);
    GF_REQUIRE(ck.fill_store("emb.", *m.phi) == static_cast<int>(m.phi->size()),
               "model checkpoint: missing embedding tensors");
    if (m.config.cells > 0) {
        m.rectifier = std::make_shared<RectifierNet>(m.config.cells, 1, m.config.resolution);
        Rng rng2(2);
        m.rectifier->init_params(*m.theta, rng2);
        GF_REQUIRE(ck.fill_store("rect.", *m.theta) == static_cast<int>(m.theta->size()),
                   "model checkpoint: missing rectifier tensors");
    }
    return m;
}

namespace {

struct TrainState {
    uint64_t epoch = 0;
    double lr = 0.0;
    double best_val = std::numeric_limits<double>::infinity();
    uint32_t plateau = 0;
};

void save_model_checkpoint(const std::string& path, const ExperimentConfig& cfg,
                           const ParameterStore& theta, const ParameterStore& phi,
                           const Rng& rng, const TrainState& st) {
    Checkpoint ck;
    ck.config_text = cfg.serialize();
    ck.rng_state = rng.state();
    ck.epoch = st.epoch;
    ck.lr = st.lr;
    ck.best_val = st.best_val;
    ck.plateau = st.plateau;
    ck.put_store(theta);
    ck.put_store(phi);
    save_checkpoint(path, ck);
}

double tar_or_skip(const VerificationScores& scores, double far) {
    if (static_cast<double>(scores.impostor.size()) < 1.0 / far) return -1.0;
    return tar_at_far(scores.genuine, scores.impostor, far);
}

}  // namespace

void run_train_joint(const ExperimentConfig& cfg, const std::string& data_dir,
                     const std::string& dae_ckpt, const std::string& out_ckpt,
                     const std::string& metrics_csv, const std::string& resume_from,
                     int stop_after_epochs) {
    cfg.validate();
    auto train = load_dataset((fs::path(data_dir) / "train").string());
    auto val = load_dataset((fs::path(data_dir) / "val").string());
    GF_REQUIRE(!train.empty() && !val.empty(), "train: empty dataset splits");

    TrainedModel model;
    model.config = cfg;
    model.theta = std::make_shared<ParameterStore>();
    model.phi = std::make_shared<ParameterStore>();
    model.embedder = std::make_shared<EmbeddingNet>(1, cfg.resolution);
    {
        Rng rng(Rng::derive(cfg.seed, kTagPhi));
        model.embedder->init_params(*model.phi, rng);
    }
    if (cfg.cells > 0) {
        model.rectifier = std::make_shared<RectifierNet>(cfg.cells, 1, cfg.resolution);
        Rng rng(Rng::derive(cfg.seed, kTagTheta));
        model.rectifier->init_params(*model.theta, rng);
    }

    std::optional<DenoiserModel> dae;
    bool wants_reg = cfg.cells > 0 && !cfg.no_reg && cfg.lambda_reg > 0.0;
    if (wants_reg) {
        if (dae_ckpt.empty() || !fs::exists(dae_ckpt)) {
            throw ConfigError(
                "train: regularization needs a denoiser checkpoint; run `gridface train-dae` "
                "first or pass --no-reg");
        }
        dae.emplace(load_dae_checkpoint(dae_ckpt));
        GF_REQUIRE(dae->sigma() == cfg.dae_sigma,
                   "train: dae checkpoint sigma differs from config dae_sigma");
        GF_REQUIRE(dae->height() == cfg.resolution, "train: dae resolution mismatch");
    }

    Rng train_rng(Rng::derive(cfg.seed, kTagTrainStream));
    TrainState st;
    st.lr = cfg.lr;

    if (!resume_from.empty()) {
        Checkpoint ck = load_checkpoint(resume_from);
        if (fnv1a64(ck.config_text) != cfg.digest()) {
            throw ConfigError("train: resume refused, checkpoint config digest mismatch");
        }
        ck.fill_store("rect.", *model.theta);
        ck.fill_store("emb.", *model.phi);
        train_rng.set_state(ck.rng_state);
        st.epoch = ck.epoch;
        st.lr = ck.lr;
        st.best_val = ck.best_val;
        st.plateau = ck.plateau;
    }

    // Fixed validation triplets, same list every epoch.
    std::vector<Triplet> val_triplets;
    {
        Rng vrng(Rng::derive(cfg.seed, kTagValTriplets));
        val_triplets = sample_triplets(val, std::min<int>(64, cfg.batch * 2), vrng);
    }

    ObjectiveWeights weights;
    weights.lambda_reg = cfg.no_reg ? 0.0 : cfg.lambda_reg;
    weights.lambda_de = cfg.lambda_de;
    weights.alpha = cfg.alpha;

    MetricsWriter metrics(metrics_csv);

    const int phase1_epochs = cfg.sequential ? (cfg.epochs + 1) / 2 : 0;
    auto set_theta_trainable = [&](bool trainable) {
        for (auto& [name, t] : model.theta->items()) t->requires_grad = trainable;
    };

    uint64_t last_epoch = static_cast<uint64_t>(cfg.epochs);
    if (stop_after_epochs > 0) {
        last_epoch = std::min<uint64_t>(last_epoch, static_cast<uint64_t>(stop_after_epochs));
    }
    for (uint64_t epoch = st.epoch; epoch < last_epoch; ++epoch) {
        bool phase1 = cfg.sequential && epoch < static_cast<uint64_t>(phase1_epochs);
        bool phase2 = cfg.sequential && !phase1;
        if (phase2) set_theta_trainable(false);

        double mean_recog = 0, mean_reg = 0, mean_de = 0, mean_total = 0;
        int samples = 0;

        for (int step = 0; step < cfg.steps_per_epoch; ++step) {
            if (phase1) {
                // Rectifier alone, supervised by the prior and deformation terms.
                GF_REQUIRE(model.rectifier != nullptr, "sequential: rectifier required");
                model.theta->zero_grads();
                GridTemplate grid(cfg.cells);
                for (int b = 0; b < cfg.batch; ++b) {
                    const LabeledImage& img = train[train_rng.below(train.size())];
                    Tape tape;
                    auto x = image_tensor(img);
                    auto params = model.rectifier->predict(&tape, *model.theta, x);
                    auto rectified = rectify(&tape, x, params, grid);
                    TensorPtr reg = dae ? dae_regularizer(&tape, rectified, *dae, dae->sigma())
                                        : Tensor::scalar(0.0);
                    auto de = deformation_loss(&tape, params, grid);
                    auto loss = ops::add(&tape, ops::scale(&tape, reg, weights.lambda_reg),
                                         ops::scale(&tape, de, weights.lambda_de));
                    mean_reg += reg->value();
                    mean_de += de->value();
                    mean_total += loss->value();
                    ++samples;
                    tape.backward(ops::scale(&tape, loss, 1.0 / cfg.batch));
                }
                sgd_step(*model.theta, st.lr);
                continue;
            }

            auto triplets = sample_triplets(train, cfg.batch, train_rng);
            if (model.rectifier && !phase2) model.theta->zero_grads();
            model.phi->zero_grads();
            for (const auto& trip : triplets) {
                Tape tape;
                TripletImages imgs;
                imgs.anchor = image_tensor(train[trip.anchor]);
                imgs.positive = image_tensor(train[trip.positive]);
                imgs.negative = image_tensor(train[trip.negative]);
                JointModels jm;
                jm.rectifier = model.rectifier.get();
                jm.theta = model.theta.get();
                jm.embedder = model.embedder.get();
                jm.phi = model.phi.get();
                jm.denoiser = (dae && !phase2) ? &*dae : nullptr;
                TensorPtr total;
                LossBreakdown bd = joint_objective(&tape, imgs, jm, weights, &total);
                mean_recog += bd.recog;
                mean_reg += bd.reg;
                mean_de += bd.de;
                mean_total += bd.total;
                ++samples;
                tape.backward(ops::scale(&tape, total, 1.0 / cfg.batch));
            }
            if (model.rectifier && !phase2) sgd_step(*model.theta, st.lr);
            sgd_step(*model.phi, st.lr);
        }

        mean_recog /= samples;
        mean_reg /= samples;
        mean_de /= samples;
        mean_total /= samples;
        metrics.row(epoch, "train", mean_recog, mean_reg, mean_de, mean_total, -1, -1);

        // Validation pass: loss on the fixed triplets plus verification TAR.
        double v_recog = 0, v_reg = 0, v_de = 0, v_total = 0;
        for (const auto& trip : val_triplets) {
            TripletImages imgs;
            imgs.anchor = image_tensor(val[trip.anchor]);
            imgs.positive = image_tensor(val[trip.positive]);
            imgs.negative = image_tensor(val[trip.negative]);
            JointModels jm;
            jm.rectifier = model.rectifier.get();
            jm.theta = model.theta.get();
            jm.embedder = model.embedder.get();
            jm.phi = model.phi.get();
            jm.denoiser = dae ? &*dae : nullptr;
            LossBreakdown bd = joint_objective(nullptr, imgs, jm, weights, nullptr);
            v_recog += bd.recog;
            v_reg += bd.reg;
            v_de += bd.de;
            v_total += bd.total;
        }
        double inv = 1.0 / static_cast<double>(val_triplets.size());
        v_recog *= inv;
        v_reg *= inv;
        v_de *= inv;
        v_total *= inv;
        VerificationScores vs = verification_scores(model, val);
        metrics.row(epoch, "val", v_recog, v_reg, v_de, v_total, tar_or_skip(vs, 0.1),
                    tar_or_skip(vs, 0.01));

        if (v_total < st.best_val - 1e-12) {
            st.best_val = v_total;
            st.plateau = 0;
        } else if (++st.plateau >= static_cast<uint32_t>(cfg.patience)) {
            st.lr /= cfg.lr_decay;
            st.plateau = 0;
        }

        st.epoch = epoch + 1;
        save_model_checkpoint(out_ckpt, cfg, *model.theta, *model.phi, train_rng, st);
    }
    // Leave theta trainable for later runs against the same stores.
    set_theta_trainable(true);
}

std::vector<ResidualParams> predict_residuals(const TrainedModel& model, const LabeledImage& img) {
    GF_REQUIRE(model.rectifier != nullptr, "predict_residuals: model has no rectifier");
    auto x = image_tensor(img);
    auto params = model.rectifier->predict(nullptr, *model.theta, x);
    int cells = model.rectifier->grid_n() * model.rectifier->grid_n();
    std::vector<ResidualParams> out(cells);
    for (int c = 0; c < cells; ++c) {
        for (int k = 0; k < 8; ++k) out[c].h[k] = params->data[8 * c + k];
    }
    return out;
}

std::vector<double> rectified_pixels(const TrainedModel& model, const LabeledImage& img) {
    auto x = image_tensor(img);
    if (!model.rectifier) return img.pixels;
    GridTemplate grid(model.rectifier->grid_n());
    auto params = model.rectifier->predict(nullptr, *model.theta, x);
    return rectify(nullptr, x, params, grid)->data;
}

std::vector<double> embed_image(const TrainedModel& model, const LabeledImage& img) {
    auto x = image_tensor(img);
    TensorPtr input = x;
    if (model.rectifier) {
        GridTemplate grid(model.rectifier->grid_n());
        auto params = model.rectifier->predict(nullptr, *model.theta, x);
        input = rectify(nullptr, x, params, grid);
    }
    return model.embedder->embed(nullptr, *model.phi, input)->data;
}

VerificationScores verification_scores(const TrainedModel& model,
                                       const std::vector<LabeledImage>& images) {
    std::vector<std::vector<double>> emb;
    emb.reserve(images.size());
    for (const auto& img : images) emb.push_back(embed_image(model, img));
    VerificationScores out;
    for (size_t i = 0; i < images.size(); ++i) {
        for (size_t j = i + 1; j < images.size(); ++j) {
            double acc = 0;
            for (size_t k = 0; k < emb[i].size(); ++k) {
                double d = emb[i][k] - emb[j][k];
                acc += d * d;
            }
            double dist = std::sqrt(acc);
            if (images[i].identity == images[j].identity) {
                out.genuine.push_back(dist);
            } else {
                out.impostor.push_back(dist);
            }
        }
    }
    return out;
}

LandmarkSpread landmark_spread(const TrainedModel& model,
                               const std::vector<LabeledImage>& images) {
    std::map<int, std::vector<const LabeledImage*>> by_id;
    for (const auto& img : images) by_id[img.identity].push_back(&img);

    LandmarkSpread out;
    int groups = 0;
    for (const auto& [id, members] : by_id) {
        if (members.size() < 2) continue;
        for (int lm = 0; lm < 5; ++lm) {
            std::vector<Point2> raw_pts, rect_pts;
            for (const auto* img : members) {
                raw_pts.push_back(img->landmarks[lm]);
                if (model.rectifier) {
                    auto params = predict_residuals(model, *img);
                    GridTemplate grid(model.rectifier->grid_n());
                    auto res = map_landmark_to_rectified(img->landmarks[lm], params, grid);
                    if (res.approximate) out.approximate++;
                    rect_pts.push_back(res.q);
                } else {
                    rect_pts.push_back(img->landmarks[lm]);
                }
            }
            out.raw += point_spread(raw_pts);
            out.rectified += point_spread(rect_pts);
            ++groups;
        }
    }
    GF_REQUIRE(groups > 0, "landmark_spread: no identity with >= 2 images");
    out.raw /= groups;
    out.rectified /= groups;
    return out;
}

double mean_denoiser_residual(const TrainedModel& model, const DenoiserModel& dae,
                              const std::vector<LabeledImage>& images) {
    GF_REQUIRE(!images.empty(), "mean_denoiser_residual: empty set");
    double acc = 0;
    for (const auto& img : images) {
        auto rect = rectified_pixels(model, img);
        auto h = dae.apply(rect);
        double s = 0;
        for (size_t i = 0; i < h.size(); ++i) {
            double d = h[i] - rect[i];
            s += d * d;
        }
        acc += s / static_cast<double>(h.size());
    }
    return acc / static_cast<double>(images.size());
}

EvalReport run_eval(const std::string& ckpt_path, const std::string& data_dir,
                    const std::string& report_csv, const std::string& dae_ckpt) {
    TrainedModel model = load_model_checkpoint(ckpt_path);
    std::optional<DenoiserModel> dae;
    if (!dae_ckpt.empty()) dae.emplace(load_dae_checkpoint(dae_ckpt));

    EvalReport report;
    std::ofstream csv;
    if (!report_csv.empty()) {
        csv.open(report_csv, std::ios::binary | std::ios::trunc);
        if (!csv) throw IoError("eval: cannot open report " + report_csv);
        csv << "# gridface-report v1\n";
        csv << "level,tar_far1e1,tar_far1e2,lm_std_rect,lm_std_raw,approx_landmarks,"
               "reg_residual\n";
    }
    for (int lvl = 0; lvl < 4; ++lvl) {
        std::string dir = test_split_dir(data_dir, lvl);
        if (!fs::exists(fs::path(dir) / "manifest.csv")) continue;
        auto test = load_dataset(dir);
        LevelEval le;
        le.noise_level = kNoiseLevels[lvl];
        auto scores = verification_scores(model, test);
        le.tar_far1e1 = tar_or_skip(scores, 0.1);
        le.tar_far1e2 = tar_or_skip(scores, 0.01);
        auto spread = landmark_spread(model, test);
        le.lm_std_rect = spread.rectified;
        le.lm_std_raw = spread.raw;
        le.approx_landmarks = spread.approximate;
        if (dae) le.reg_residual = mean_denoiser_residual(model, *dae, test);
        report.levels.push_back(le);
        if (csv.is_open()) {
            csv << format_double(le.noise_level) << "," << format_double(le.tar_far1e1) << ","
                << format_double(le.tar_far1e2) << "," << format_double(le.lm_std_rect) << ","
                << format_double(le.lm_std_raw) << "," << le.approx_landmarks << ","
                << format_double(le.reg_residual) << "\n";
        }
    }
    GF_REQUIRE(!report.levels.empty(), "eval: no test splits found under " + data_dir);
    return report;
}

void run_warp_cmd(const std::string& ckpt_path, const std::string& in_path,
                  const std::string& out_path) {
    TrainedModel model = load_model_checkpoint(ckpt_path);
    GF_REQUIRE(model.rectifier != nullptr, "warp: checkpoint has no rectifier (baseline model)");
    int c, h, w;
    auto pixels = read_pnm(in_path, &c, &h, &w);
    GF_REQUIRE(c == 1, "warp: expected a grayscale image");
    GF_REQUIRE(h == model.config.resolution && w == model.config.resolution,
               "warp: image resolution does not match the model");
    LabeledImage img;
    img.pixels = std::move(pixels);
    img.height = h;
    img.width = w;
    auto rect = rectified_pixels(model, img);
    write_pnm(out_path, rect, 1, h, w);
}

namespace {

void write_contact_sheet(const std::string& path, const TrainedModel& model,
                         const std::vector<LabeledImage>& test, int count) {
    int res = model.config.resolution;
    int cols = std::min<int>(count, static_cast<int>(test.size()));
    GF_REQUIRE(cols > 0, "contact sheet: no test images");
    const int gap = 2;
    int sheet_w = cols * res + (cols - 1) * gap;
    int sheet_h = 2 * res + gap;
    std::vector<double> sheet(static_cast<size_t>(sheet_w) * sheet_h, 1.0);
    // Spread picks across identities.
    size_t stride = std::max<size_t>(1, test.size() / cols);
    for (int k = 0; k < cols; ++k) {
        const LabeledImage& img = test[k * stride];
        auto rect = rectified_pixels(model, img);
        int x0 = k * (res + gap);
        for (int y = 0; y < res; ++y) {
            for (int x = 0; x < res; ++x) {
                sheet[static_cast<size_t>(y) * sheet_w + x0 + x] =
                    img.pixels[static_cast<size_t>(y) * res + x];
                sheet[static_cast<size_t>(y + res + gap) * sheet_w + x0 + x] =
                    rect[static_cast<size_t>(y) * res + x];
            }
        }
    }
    write_pnm(path, sheet, 1, sheet_h, sheet_w);
}

}  // namespace

void run_ablation(const ExperimentConfig& cfg, const std::string& data_dir,
                  const std::string& dae_ckpt, const std::string& axis,
                  const std::string& out_dir) {
    fs::create_directories(out_dir);
    struct Variant {
        std::string name;
        ExperimentConfig cfg;
    };
    std::vector<Variant> variants;
    auto with = [&](const std::string& name, auto&& mutate) {
        ExperimentConfig c = cfg;
        mutate(c);
        variants.push_back({name, c});
    };
    if (axis == "cells") {
        for (int n : {1, 2, 4, 8}) {
            with("grid" + std::to_string(n), [&](ExperimentConfig& c) { c.cells = n; });
        }
    } else if (axis == "reg") {
        with("grid8", [](ExperimentConfig& c) { c.cells = 8; c.no_reg = false; });
        with("grid8_noreg", [](ExperimentConfig& c) { c.cells = 8; c.no_reg = true; });
    } else if (axis == "joint") {
        with("grid8_joint", [](ExperimentConfig& c) { c.cells = 8; c.sequential = false; });
        with("grid8_sequential", [](ExperimentConfig& c) { c.cells = 8; c.sequential = true; });
    } else {
        throw ConfigError("ablate: unknown axis " + axis + " (use cells, reg or joint)");
    }

    std::ofstream csv(fs::path(out_dir) / "ablation.csv", std::ios::binary | std::ios::trunc);
    if (!csv) throw IoError("ablate: cannot open ablation.csv");
    csv << "# gridface-ablation v1\n";
    csv << "variant,level,tar_far1e1,tar_far1e2,lm_std_rect,lm_std_raw,reg_residual\n";

    auto test_mid = load_dataset(test_split_dir(data_dir, 2));  // the 0.10d split
    for (const auto& v : variants) {
        std::string ckpt = (fs::path(out_dir) / (v.name + ".ckpt")).string();
        std::string metrics = (fs::path(out_dir) / (v.name + "_metrics.csv")).string();
        if (fs::exists(metrics)) fs::remove(metrics);
        run_train_joint(v.cfg, data_dir, dae_ckpt, ckpt, metrics);
        EvalReport rep = run_eval(ckpt, data_dir, "", dae_ckpt);
        for (const auto& le : rep.levels) {
            csv << v.name << "," << format_double(le.noise_level) << ","
                << format_double(le.tar_far1e1) << "," << format_double(le.tar_far1e2) << ","
                << format_double(le.lm_std_rect) << "," << format_double(le.lm_std_raw) << ","
                << format_double(le.reg_residual) << "\n";
        }
        TrainedModel model = load_model_checkpoint(ckpt);
        if (model.rectifier) {
            write_contact_sheet((fs::path(out_dir) / ("sheet_" + v.name + ".pgm")).string(),
                                model, test_mid, 8);
        }
    }
}

}  // namespace gridface
