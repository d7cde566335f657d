#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "gridface/checkpoint.hpp"
#include "gridface/config.hpp"
#include "gridface/losses.hpp"
#include "gridface/metrics.hpp"
#include "gridface/synthdata.hpp"

namespace gridface {

// Perturbation levels of the test splits, in units of the interocular
// distance. Level 0 is the pristine canonical rendering.
inline constexpr double kNoiseLevels[4] = {0.0, 0.05, 0.10, 0.15};

std::string test_split_dir(const std::string& data_dir, int level_index);

// Generates canonical/, train/, val/ and the four test_s* splits with
// disjoint identity ranges. Deterministic in the config seed.
void run_synth(const ExperimentConfig& cfg, const std::string& out_dir);

// Trains the face denoiser on the canonical split and writes a checkpoint.
void run_train_dae(const ExperimentConfig& cfg, const std::string& data_dir,
                   const std::string& out_ckpt);

DenoiserModel load_dae_checkpoint(const std::string& path);

// A rectifier+embedding pair restored from (or about to be written to) a
// checkpoint. rectifier is null for the no-rectifier baseline (cells = 0).
struct TrainedModel {
    ExperimentConfig config;
    std::shared_ptr<RectifierNet> rectifier;
    std::shared_ptr<EmbeddingNet> embedder;
    std::shared_ptr<ParameterStore> theta;
    std::shared_ptr<ParameterStore> phi;
};

TrainedModel load_model_checkpoint(const std::string& path);

// Joint (or sequential/baseline, per config) training. Appends per-epoch
// rows to metrics_csv and writes a resumable checkpoint after every epoch.
// stop_after_epochs > 0 interrupts the run early (the checkpoint stays
// resumable); -1 runs to cfg.epochs.
void run_train_joint(const ExperimentConfig& cfg, const std::string& data_dir,
                     const std::string& dae_ckpt, const std::string& out_ckpt,
                     const std::string& metrics_csv, const std::string& resume_from = "",
                     int stop_after_epochs = -1);

// Inference helpers.
std::vector<ResidualParams> predict_residuals(const TrainedModel& model, const LabeledImage& img);
std::vector<double> rectified_pixels(const TrainedModel& model, const LabeledImage& img);
std::vector<double> embed_image(const TrainedModel& model, const LabeledImage& img);

struct VerificationScores {
    std::vector<double> genuine;
    std::vector<double> impostor;
};
VerificationScores verification_scores(const TrainedModel& model,
                                       const std::vector<LabeledImage>& images);

struct LandmarkSpread {
    double rectified = 0.0;  // mean spread after mapping through the model
    double raw = 0.0;        // mean spread of the stored landmarks
    int approximate = 0;     // fold-over fallbacks encountered
};
LandmarkSpread landmark_spread(const TrainedModel& model, const std::vector<LabeledImage>& images);

// Mean per-pixel ||h(I) - I||^2 over rectified test images.
double mean_denoiser_residual(const TrainedModel& model, const DenoiserModel& dae,
                              const std::vector<LabeledImage>& images);

struct LevelEval {
    double noise_level = 0.0;
    double tar_far1e1 = 0.0;
    double tar_far1e2 = 0.0;
    double lm_std_rect = 0.0;
    double lm_std_raw = 0.0;
    int approx_landmarks = 0;
    double reg_residual = -1.0;  // -1 when no denoiser was supplied
};

struct EvalReport {
    std::vector<LevelEval> levels;
};

EvalReport run_eval(const std::string& ckpt_path, const std::string& data_dir,
                    const std::string& report_csv, const std::string& dae_ckpt = "");

void run_warp_cmd(const std::string& ckpt_path, const std::string& in_path,
                  const std::string& out_path);

// Trains and evaluates the variants of one ablation axis ("cells", "reg" or
// "joint") under shared seeds, writing ablation.csv and per-variant contact
// sheets into out_dir.
void run_ablation(const ExperimentConfig& cfg, const std::string& data_dir,
                  const std::string& dae_ckpt, const std::string& axis,
                  const std::string& out_dir);

}  // namespace gridface
