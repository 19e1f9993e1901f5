#pragma once

#include <utility>
#include <vector>

#include "iibr/image.hpp"
#include "iibr/light_field.hpp"

namespace iibr {

enum class EpiAxis { horizontal, vertical };

/// Epipolar-plane image: A angular rows by S spatial columns.
/// Row 0 is the lowest angular index.
struct Epi {
    RgbImage pixels;
    EpiAxis axis = EpiAxis::horizontal;

    int angular() const { return pixels.rows(); }
    int spatial() const { return pixels.cols(); }
};

/// true = no source ray landed on this EPI pixel.
using HoleMask = Mask;

struct StructureTensorField {
    ScalarField jxx, jxu, juu;
};

/// Slope in pixels per view (dx/du) and its confidence in [0,1].
struct SlopeField {
    ScalarField slope;
    ScalarField coherence;
};

struct Correspondence {
    double x;
    double u;
};
using CorrespondenceSet = std::vector<Correspondence>;

struct StructureTensorConfig {
    double sigma_grad = 0.8;
    double sigma_smooth = 1.6;
};

/// Horizontal: EPI[a][s] = view(fixed_angular, a)(fixed_spatial, s).
/// Vertical:   EPI[a][s] = view(a, fixed_angular)(s, fixed_spatial).
Epi extract_epi(const LightField4D& lf, int fixed_spatial, int fixed_angular, EpiAxis axis);

/// Points (x + d (u_i - u), u_i) of the line through (x, u) with slope d.
CorrespondenceSet correspondence_set(double x, double u, double d, const std::vector<double>& angular_range);

/// Forward-warps one row into A angular rows. Sources landing within half a
/// pixel of a target compete; the largest disparity wins.
std::pair<Epi, HoleMask> synthesize_epi(const std::vector<Rgb>& row, const std::vector<double>& disp, int angular,
                                        int source_row, EpiAxis axis = EpiAxis::horizontal);

enum class OutOfRange { error, clamp };

/// Linear interpolation at fractional x. With OutOfRange::clamp the position is
/// clamped into range and `clamped` (if given) reports whether that happened.
Rgb sample_subpixel(const std::vector<Rgb>& row, double x, OutOfRange policy = OutOfRange::error,
                    bool* clamped = nullptr);
Rgb sample_subpixel(const Epi& e, int angular_row, double x, OutOfRange policy = OutOfRange::error,
                    bool* clamped = nullptr);

StructureTensorField structure_tensor(const Epi& e, const StructureTensorConfig& cfg = {});
/// Same on a luma raster directly.
StructureTensorField structure_tensor(const ScalarField& luma, const StructureTensorConfig& cfg = {});

SlopeField slopes_from_tensor(const StructureTensorField& st);

double epi_structure_loss(const Epi& e, const Epi& e_gt, const StructureTensorConfig& cfg = {});

/// Loss between the tensor of `luma` and a reference tensor, with the gradient
/// of the loss with respect to every luma sample written to `grad` when non-null.
double epi_structure_loss(const ScalarField& luma, const StructureTensorField& reference,
                          const StructureTensorConfig& cfg, ScalarField* grad);

} // namespace iibr
