#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <set>
#include <tuple>
#include <vector>

#include "iibr/disparity.hpp"
#include "iibr/geometry.hpp"
#include "iibr/image.hpp"
#include "iibr/transformer.hpp"

namespace iibr {

enum class Provenance : std::uint8_t { input, inpainted };

/// One cast pixel. `slab` holds raw pixel / view-index coordinates.
struct SourceRayRecord {
    PluckerRay ray;
    LightSlabCoord slab;
    Rgb color = Rgb::Zero();
    double disp_x = 0.0;
    double disp_y = 0.0;
    Provenance provenance = Provenance::input;
    int generation = 0;

    double disparity() const { return 0.5 * (disp_x + disp_y); }
};

/// Growing set of source rays with a key index that rejects duplicates.
class SourceRaySet {
public:
    /// Adds a record; returns false (and ignores it) for a duplicate (slab, provenance) entry.
    bool add(const SourceRayRecord& r);

    size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }
    const SourceRayRecord& operator[](size_t i) const { return records_[i]; }
    const std::vector<SourceRayRecord>& records() const { return records_; }

    /// Records cast from every pixel of a view, with disparity per pixel.
    static SourceRaySet from_view(const GridGeometry& g, ViewIndex view, const RgbImage& image,
                                  const DisparityMap& disp_x, const DisparityMap& disp_y);
    static SourceRaySet from_view(const GridGeometry& g, ViewIndex view, const RgbImage& image, const DisparityMap& disp)
    {
        return from_view(g, view, image, disp, disp);
    }

private:
    using Key = std::tuple<double, double, double, double, int, int>;
    std::vector<SourceRayRecord> records_;
    std::set<Key> keys_;
};

/// Reprojection offset of a source into a target ray: where the source's
/// surface point lands in the target view minus the target position.
inline double reprojection_distance(const SourceRayRecord& s, const LightSlabCoord& t)
{
    double dx = s.slab.x + s.disp_x * (t.u - s.slab.u) - t.x;
    double dy = s.slab.y + s.disp_y * (t.v - s.slab.v) - t.y;
    return std::abs(dx) + std::abs(dy);
}

RayEmbedding embed_ray(const PluckerRay& target, const SourceRayRecord& source);

struct Candidate {
    int index = 0;       // into the SourceRaySet
    double distance = 0; // reprojection distance
};

/// k records nearest in reprojection distance; ties prefer larger disparity,
/// then the smaller record index. Returns everything when |s| < k.
std::vector<Candidate> select_k_nearest(const LightSlabCoord& target, const SourceRaySet& s, int k);

struct WeightVector {
    std::vector<double> weights;
    std::vector<int> indices;
};

struct AnalyticWeightConfig {
    double sigma = 0.1;
    double gamma = 4.0;
    /// Sources farther than this are "misses": their distance term is clamped
    /// to the radius and they get no disparity bonus. Infinity disables it.
    double hit_radius = 0.5;
};

/// softmax over candidates of -min(dist, r)^2 / (2 sigma^2) + gamma * disp * [dist <= r].
WeightVector analytic_weights(const SourceRaySet& s, const std::vector<Candidate>& subset,
                              const AnalyticWeightConfig& cfg = {});

Rgb render_ray(const WeightVector& w, const SourceRaySet& s);

/// Natural-log entropy; 0 log 0 = 0.
double entropy(const std::vector<double>& w);
inline double entropy(const WeightVector& w) { return entropy(w.weights); }

/// Target ray handed to a weighter.
struct TargetRay {
    LightSlabCoord slab;
    PluckerRay ray;
};

/// Strategy producing blending weights for candidate sets.
class Weighter {
public:
    virtual ~Weighter() = default;
    virtual int k_sources() const = 0;
    /// Weights for many targets at once. `sources` supplies the (possibly
    /// displaced) record for each candidate index.
    virtual std::vector<WeightVector> weigh(const std::vector<TargetRay>& targets,
                                            const std::vector<std::vector<Candidate>>& candidates,
                                            const std::function<const SourceRayRecord&(int)>& sources) const = 0;
};

class AnalyticWeighter : public Weighter {
public:
    explicit AnalyticWeighter(AnalyticWeightConfig cfg = {}, int k = 5) : cfg_(cfg), k_(k) {}
    int k_sources() const override { return k_; }
    std::vector<WeightVector> weigh(const std::vector<TargetRay>& targets,
                                    const std::vector<std::vector<Candidate>>& candidates,
                                    const std::function<const SourceRayRecord&(int)>& sources) const override;

private:
    AnalyticWeightConfig cfg_;
    int k_;
};

class LearnedWeighter : public Weighter {
public:
    explicit LearnedWeighter(const RayTransformerParams& params) : params_(params) {}
    int k_sources() const override { return params_.config().k_sources; }
    std::vector<WeightVector> weigh(const std::vector<TargetRay>& targets,
                                    const std::vector<std::vector<Candidate>>& candidates,
                                    const std::function<const SourceRayRecord&(int)>& sources) const override;

private:
    const RayTransformerParams& params_;
};

/// Positional distortion of source rays used for view-dependent effects.
struct SpecularWarp {
    enum class Profile { quadratic, table };
    double amplitude = 0.0;
    Profile profile = Profile::quadratic;
    /// Offsets at integer |angular offset| 0, 1, 2, ... (table profile), linearly interpolated.
    std::vector<double> table;
    /// Normalizing angular radius for the quadratic profile (offset = amplitude at this offset).
    double radius = 1.0;
    /// Optional: only sources cast from input pixels with region(y, x) set are displaced.
    Mask region;

    double profile_at(double rel) const;
};

struct RenderConfig {
    int threads = 1;
};

struct RenderResult {
    RgbImage image;
    ScalarField entropy;
    ScalarField disparity; // weighted source disparity
    Grid<int> dominant;    // record index carrying the largest weight
    /// Per pixel: the selected candidates and their weights.
    std::vector<WeightVector> weights;
};

/// Renders every pixel of `target` from the source set.
RenderResult render_view(const SourceRaySet& s, ViewIndex target, const GridGeometry& g, const Weighter& weighter,
                         const RenderConfig& cfg = {});

/// render_view with each source displaced by `warp` before selection and embedding.
RenderResult render_specular(const SourceRaySet& s, ViewIndex target, const GridGeometry& g, const SpecularWarp& warp,
                             const Weighter& weighter, const RenderConfig& cfg = {});

/// Spatial bucket index of source positions reprojected into one target view;
/// answers select_k_nearest for that view's pixels without a full scan.
class ProjectedIndex {
public:
    ProjectedIndex(const std::vector<SourceRayRecord>& records, const GridGeometry& g, double target_v, double target_u);
    std::vector<Candidate> nearest(const LightSlabCoord& target, int k) const;

private:
    const std::vector<SourceRayRecord>& records_;
    int H_, W_;
    std::vector<double> px_, py_;
    std::vector<int> start_, items_;
};

} // namespace iibr
