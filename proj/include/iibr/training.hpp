#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "iibr/disparity.hpp"
#include "iibr/epi.hpp"
#include "iibr/error.hpp"
#include "iibr/light_field.hpp"
#include "iibr/renderer.hpp"
#include "iibr/transformer.hpp"

namespace iibr {

struct LossWeights {
    double lambda_c = 100.0;
    double lambda_w = 1.0;
    double lambda_epi = 0.1;
    void validate() const;
};

struct LossComponents {
    double color = 0.0;
    double entropy = 0.0;
    double epi = 0.0;
    double total(const LossWeights& lw) const
    {
        return lw.lambda_c * color + lw.lambda_w * entropy + lw.lambda_epi * epi;
    }
};

/// Squared L2 over channels.
double loss_color(const Rgb& c, const Rgb& c_hat);
double loss_entropy(const WeightVector& w);

/// A target ray with its ground-truth color and candidate sources.
struct TrainRay {
    TargetRay target;
    Rgb color = Rgb::Zero();
    std::vector<Candidate> candidates;
    bool occluded = false; // not visible from the input view
};

/// Horizontal EPI strip: rows are views (v, 0..U-1) at image row y,
/// columns are pixels x0 .. x0 + width - 1.
struct EpiStrip {
    int angular = 0;
    int spatial = 0;
    std::vector<TrainRay> rays; // row-major [a][s]
    StructureTensorField reference;
};

struct TrainBatch {
    const SourceRaySet* sources = nullptr;
    std::vector<TrainRay> rays;
    std::vector<EpiStrip> strips;
    StructureTensorConfig tensor;
    /// Entropy term only over rays visible from the input view.
    bool entropy_visible_only = false;
};

/// One training scene: ground-truth LF, the center view cast as sources with
/// its disparity, and the k nearest candidates of every pixel of every view.
class TrainScene {
public:
    TrainScene(const LightField4D& gt, const DisparityMap& center_disparity, int k_sources,
               std::vector<Mask> occlusion = {});

    const LightField4D& light_field() const { return gt_; }
    const SourceRaySet& sources() const { return sources_; }
    int k_sources() const { return k_; }
    TrainRay ray(ViewIndex view, int y, int x) const;
    EpiStrip strip(int v, int y, int x0, int width, const StructureTensorConfig& cfg) const;

private:
    LightField4D gt_;
    SourceRaySet sources_;
    int k_;
    std::vector<std::vector<std::vector<Candidate>>> candidates_; // [view][pixel]
    std::vector<Mask> occlusion_;
};

struct LossResult {
    LossComponents components;
    double total = 0.0;
};

LossResult total_loss(const TrainBatch& batch, const RayTransformerParams& params, const LossWeights& lw);

/// Loss and its gradient. `grads` is reset to zeros shaped like `params`.
LossResult backward(const TrainBatch& batch, const RayTransformerParams& params, const LossWeights& lw,
                    RayTransformerParams& grads);

struct AdamConfig {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double eps = 1e-8;
};

struct OptimizerState {
    AdamConfig cfg;
    RayTransformerParams m, v;
    long step = 0;
    explicit OptimizerState(const RayTransformerParams& like, AdamConfig c = {});
};

/// Bias-corrected Adam update; parameters are rounded to float32 afterwards.
void adam_step(OptimizerState& state, RayTransformerParams& params, const RayTransformerParams& grads);

/// Scales grads so their global L2 norm is at most max_norm; returns the norm before clipping.
double clip_global_norm(RayTransformerParams& grads, double max_norm);

struct TrainLogEntry {
    int iteration = 0;
    LossComponents components;
    double total = 0.0;
    double seconds = 0.0;
};

struct TrainLog {
    std::uint64_t seed = 0;
    std::vector<TrainLogEntry> entries;
    /// iteration,total,color,entropy,epi[,seconds]
    std::string csv(bool with_time = false) const;
};

class DivergenceError : public NumericError {
public:
    DivergenceError(const std::string& what, TrainLog log) : NumericError(what), log(std::move(log)) {}
    TrainLog log;
};

struct FitConfig {
    AttentionConfig net;
    LossWeights loss;
    AdamConfig adam;
    int iterations = 5000;
    int rays = 32;
    int strips = 1;
    int strip_width = 16;
    double clip = 1.0;
    std::uint64_t seed = 42;
    bool entropy_visible_only = false;
    StructureTensorConfig tensor;
    void validate() const;
};

struct FitResult {
    RayTransformerParams params;
    TrainLog log;
};

using FitCallback = std::function<void(int iteration, const LossResult&)>;

/// Seeded training loop; identical inputs give bit-identical parameters.
FitResult fit(const std::vector<const TrainScene*>& scenes, const FitConfig& cfg, const FitCallback& on_step = {});

/// Random training batch drawn from one scene.
TrainBatch sample_batch(const TrainScene& scene, const FitConfig& cfg, std::uint64_t& rng_state);

/// Central-difference gradient of total_loss with respect to every parameter.
RayTransformerParams finite_difference_gradient(const TrainBatch& batch, const RayTransformerParams& params,
                                                const LossWeights& lw, double h = 1e-3);

} // namespace iibr
