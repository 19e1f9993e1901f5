#pragma once

#include <vector>

#include "iibr/light_field.hpp"
#include "iibr/renderer.hpp"

namespace iibr {

/// Views entering the synthetic aperture and their weights.
struct ApertureSpec {
    struct Entry {
        ViewIndex view;
        double weight = 1.0;
    };
    std::vector<Entry> entries;

    /// Every view, uniform.
    static ApertureSpec full(const GridGeometry& g);
    /// Views within `radius` (angular steps) of the grid center, uniform.
    static ApertureSpec disk(const GridGeometry& g, double radius);
    static ApertureSpec single(ViewIndex v) { return {{{v, 1.0}}}; }
};

enum class BorderPolicy { renorm, zero };

/// Shift-and-add: sum over the aperture of w * L(v, u, y + d_f (v - v_c), x + d_f (u - u_c)).
/// Weights are normalized to sum 1; with `renorm` samples falling outside a
/// view drop out of the weight sum, with `zero` they contribute black.
RgbImage refocus(const LightField4D& lf, double d_f, const ApertureSpec& ap, BorderPolicy border = BorderPolicy::renorm,
                 double max_disparity = 8.0);

/// View at continuous angular position (v, u): bilinear blend of the four
/// surrounding views, each reprojected through the plane at disparity focal_d.
RgbImage free_view(const LightField4D& lf, double v, double u, double focal_d);

/// Mean squared luma gradient (forward differences) over the interior.
double gradient_energy(const RgbImage& img, int border = 0);

} // namespace iibr
