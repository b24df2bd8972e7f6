#pragma once

// Desk-scale ablation of the mosaic + generalized-loss recipe.
//
// Scenes are synthetic intensity fields holding Gaussian blobs of two classes
// that differ in width. The counter is a four-parameter matched filter: the
// correlation of each softly normalized query patch with the (blurred)
// reference template, mapped through
//   exp(log_scale) * softplus(exp(log_gain) * (corr - threshold)).
// Trained on single-class scenes it fires on both classes; multi-class
// training with a random target per step teaches it to ignore the other
// class, and the generalized loss calibrates the mass per object.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "countforge/core.hpp"
#include "countforge/gl.hpp"
#include "countforge/metrics.hpp"
#include "countforge/random.hpp"

namespace countforge::demo {

struct BlobClass {
    std::string name;
    double sigma = 1.0;  ///< blob width in cells
};

struct CountRange {
    int min = 1;
    int max = 1;
};

struct BlobSceneSpec {
    int grid_h = 32;
    int grid_w = 32;
    std::array<BlobClass, 2> classes{BlobClass{"spot", 0.9}, BlobClass{"disc", 1.4}};
    std::array<CountRange, 2> counts{CountRange{2, 5}, CountRange{2, 5}};
    int template_radius = 3;  ///< templates are (2r+1) x (2r+1)
    int margin = 3;           ///< cells kept free along every border
    double min_separation = 5.0;
    double noise = 0.05;       ///< additive Gaussian noise std
    double amplitude_jitter = 0.2;  ///< blob peak drawn from 1 +/- jitter

    void validate() const;
};

struct BlobScene {
    int height = 0;
    int width = 0;
    std::vector<double> intensity;  ///< row-major
    std::array<PointSet, 2> class_points;  ///< blob centers in cell units
    int reference_class = 0;
    bool multi_class = false;

    std::size_t gt_count() const { return class_points[static_cast<std::size_t>(reference_class)].size(); }
};

/// Single-class scenes hold only the reference class; multi-class scenes put
/// one class on each half of the grid (side chosen at random). The reference
/// class is drawn uniformly among classes whose count range allows objects,
/// unless given.
BlobScene synth_scene(const BlobSceneSpec& spec, bool multi_class, Rng& rng,
                      std::optional<int> reference_class = std::nullopt);

/// Zero-mean, unit-norm sampled Gaussian profile of the given width.
std::vector<double> blob_template(double sigma, int radius);

struct ToyModelParams {
    double log_gain = 3.0;
    double threshold = 0.55;  ///< correlation at which the response turns on
    double bandwidth = 0.3;  ///< extra blur applied to the reference template
    double log_scale = -1.9;

    friend bool operator==(const ToyModelParams&, const ToyModelParams&) = default;
};

inline constexpr double kMinBandwidth = 0.05;

/// Patches are scaled by 1 / sqrt(|q|^2 + floor^2) rather than 1 / |q|, so
/// flat background patches correlate weakly with every template.
inline constexpr double kPatchNormFloor = 0.5;

/// Per-scene cache of the zero-mean, softly normalized query patches; predictions then cost a
/// single matrix-vector product.
class SceneFeatures {
public:
    SceneFeatures(const BlobScene& scene, int template_radius);

    int height() const { return height_; }
    int width() const { return width_; }
    std::size_t cells() const { return static_cast<std::size_t>(height_) * width_; }
    std::size_t patch_size() const { return patch_; }
    const double* patch(std::size_t cell) const { return patches_.data() + cell * patch_; }

private:
    int height_;
    int width_;
    std::size_t patch_;
    std::vector<double> patches_;
};

struct Prediction {
    std::vector<double> density;
    /// d density_i / d (log_gain, threshold, bandwidth, log_scale)
    std::vector<std::array<double, 4>> jacobian;
};

/// Density for the reference class `template_class`, with its Jacobian.
Prediction predict_with_jacobian(const ToyModelParams& params, const SceneFeatures& features,
                                 const BlobSceneSpec& spec, int template_class);

/// Density grid (stride 1) predicted for the scene's reference class.
DensityGrid predict(const ToyModelParams& params, const BlobScene& scene, const BlobSceneSpec& spec);
DensityGrid predict(const ToyModelParams& params, const BlobScene& scene, const BlobSceneSpec& spec,
                    int template_class);

struct AblationSetting {
    bool use_ma = false;
    bool use_gl = false;

    std::string name() const;  ///< S1..S4
};

inline constexpr std::array<AblationSetting, 4> kAblationSettings{
    AblationSetting{false, false}, AblationSetting{true, false}, AblationSetting{false, true},
    AblationSetting{true, true}};

struct TrainOptions {
    int epochs = 250;
    double step_size = 0.1;
    double gt_sigma = kDefaultSigma;  ///< L2 ground-truth kernel width
    GlConfig gl;
    ToyModelParams init;
};

struct TrainResult {
    ToyModelParams params;
    std::vector<double> loss_trace;  ///< mean training loss per epoch
};

/// Full-batch Adam on the mean per-scene loss. Multi-class training scenes get
/// a fresh random target each epoch when use_ma is set. Throws NumericalError
/// (message includes the trace so far) if the loss becomes non-finite.
TrainResult train_toy(const AblationSetting& setting, const std::vector<BlobScene>& train_scenes,
                      const BlobSceneSpec& spec, const TrainOptions& options, Rng& rng);

struct EvalResult {
    MetricReport report;
    double mean_pred = 0.0;
    double mean_gt = 0.0;
    /// Share of predicted mass within `radius` cells of a target point.
    double near_mass_fraction = 0.0;
};

EvalResult evaluate_toy(const ToyModelParams& params, const std::vector<BlobScene>& eval_scenes,
                        const BlobSceneSpec& spec, double radius = 2.0);

struct DemoConfig {
    BlobSceneSpec scene;
    TrainOptions train;
    int train_scenes = 24;
    int eval_scenes = 60;
    double near_radius = 2.0;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
};

DemoConfig demo_config_from_json(const std::string& text);

struct AblationRow {
    std::uint64_t seed = 0;
    AblationSetting setting;
    EvalResult eval;
    std::vector<double> loss_trace;
};

struct AblationSummary {
    std::vector<AblationRow> rows;             ///< seed-major, S1..S4 per seed
    std::array<EvalResult, 4> mean;            ///< per setting, averaged over seeds
    bool ordering_asserted = true;             ///< false when epochs == 0
    bool s4_best = false;                      ///< mean NAE of S4 below S1..S3
    bool s1_overcounts = false;                ///< S1 mean prediction above mean gt
};

/// Trains and evaluates all four settings for every seed. Runs are
/// independent and may execute in parallel; results do not depend on it.
AblationSummary run_ablation(const DemoConfig& config);

std::string ablation_csv(const AblationSummary& summary);
std::string trace_csv(const AblationSummary& summary);

}  // namespace countforge::demo
