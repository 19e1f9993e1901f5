#pragma once

#include <functional>
#include <string>
#include <vector>

#include "iibr/disparity.hpp"
#include "iibr/light_field.hpp"
#include "iibr/renderer.hpp"

namespace iibr {

/// true = occluded, needs inpainting.
using OcclusionMask = Mask;

struct OcclusionConfig {
    enum class Mode { absolute, relative };
    Mode mode = Mode::relative;
    double k = 2.3;
    double ratio = 0.8;

    /// Absolute k = 2.3 when n_sources >= 10, otherwise relative 0.8 ln N.
    static OcclusionConfig defaults_for(int n_sources);
    /// Threshold for sets of n_sources candidates.
    double threshold(int n_sources) const;
};

/// Bits set where entropy >= threshold.
OcclusionMask detect_mask(const ScalarField& entropy, const OcclusionConfig& cfg, int n_sources);

/// Iterative nearest-valid dilation, then a 3x3 box blur over the filled pixels only.
RgbImage naive_inpaint(const RgbImage& img, const OcclusionMask& mask);

class Inpainter {
public:
    virtual ~Inpainter() = default;
    /// Must return `img` unchanged outside `mask`.
    virtual RgbImage fill(const RgbImage& img, const OcclusionMask& mask) const = 0;
};

class NaiveInpainter : public Inpainter {
public:
    RgbImage fill(const RgbImage& img, const OcclusionMask& mask) const override { return naive_inpaint(img, mask); }
};

/// Adds one inpainted record per masked pixel of `view`; returns how many were added.
int update_source_set(SourceRaySet& s, const GridGeometry& g, const RgbImage& view, ViewIndex pose,
                      const DisparityMap& disp, const OcclusionMask& mask, int generation);

/// Non-center views by decreasing distance from the grid center; ties by (v, u).
std::vector<ViewIndex> plan_view_order(const GridGeometry& g);

/// Masked pixels take the smaller disparity of the nearest unmasked pixels to
/// their left and right in the same row (disocclusions expose background).
DisparityMap fill_background_disparity(const DisparityMap& d, const OcclusionMask& mask);

/// Disparity for a freshly inpainted view. Receives the view, its mask and the
/// weighted source disparity the renderer produced.
using DisparityProvider =
    std::function<DisparityMap(ViewIndex view, const RgbImage& image, const OcclusionMask& mask,
                               const ScalarField& rendered_disparity)>;

struct GenerateConfig {
    OcclusionConfig occlusion;
    bool occlusion_set = false; // false: OcclusionConfig::defaults_for(k_sources)
    int passes = 1;
    RenderConfig render;
};

struct GeneratedLightField {
    LightField4D lf;
    /// Row-major over (v, u); the center entries are empty masks / zero fields.
    std::vector<OcclusionMask> masks;
    std::vector<ScalarField> entropy;
    std::vector<ScalarField> disparity;
    std::vector<ViewIndex> order;
    size_t source_count = 0;
};

/// Farthest-first generation from a single center image.
GeneratedLightField generate_light_field(const RgbImage& input, const DisparityMap& disp, const GridGeometry& g,
                                         const Weighter& weighter, const Inpainter& inpainter,
                                         const GenerateConfig& cfg = {}, const DisparityProvider& provider = {});

} // namespace iibr
