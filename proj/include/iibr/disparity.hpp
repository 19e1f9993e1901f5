#pragma once

#include "iibr/epi.hpp"
#include "iibr/image.hpp"
#include "iibr/light_field.hpp"

namespace iibr {

/// Depth-like values known only up to an affine map of true disparity.
struct RelativeDepthMap {
    ScalarField values;
};

/// Disparity in pixels per view.
struct DisparityMap {
    ScalarField values;
};

struct DisparityCalibration {
    double alpha = 1.0;
    double beta = 0.0;
};

struct CalibrationFit {
    DisparityCalibration calibration;
    double residual = 0.0; // weighted RMS of (alpha f + beta - slope)
    int pixels = 0;        // confident pixels used
};

inline constexpr double default_max_disparity = 8.0;

/// alpha * f + beta. Throws DomainError naming the offending extent when a
/// value exceeds `max_disparity` in magnitude.
DisparityMap apply_calibration(const RelativeDepthMap& f, const DisparityCalibration& c,
                               double max_disparity = default_max_disparity);

/// Weighted least squares of slope against f over pixels with coherence >=
/// min_coherence, weights = coherence.
CalibrationFit calibrate(const RelativeDepthMap& f, const SlopeField& reference, double min_coherence = 0.9);

/// Per-pixel slopes of the center view, read off the EPIs through it.
SlopeField center_view_slopes(const LightField4D& lf, const StructureTensorConfig& cfg = {},
                              EpiAxis axis = EpiAxis::horizontal);

} // namespace iibr
