#pragma once

#include <optional>
#include <string>
#include <vector>

#include "iibr/light_field.hpp"

namespace iibr {

inline constexpr double psnr_cap = 99.0;

/// 10 log10(1 / MSE) over channels in [0,1]; with a mask, MSE over set pixels only.
/// MSE below 1e-10 reports the cap.
double psnr(const RgbImage& a, const RgbImage& b);
double psnr(const RgbImage& a, const RgbImage& b, const Mask& mask);
double psnr_from_mse(double mse);

/// Single-scale SSIM on luma: 11x11 Gaussian window (sigma 1.5), K1 0.01,
/// K2 0.03, L 1, averaged over window centers fully inside the image.
double ssim(const RgbImage& a, const RgbImage& b);

struct ViewMetrics {
    ViewIndex view;
    double psnr = 0.0;
    double ssim = 0.0;
    std::optional<double> psnr_masked; // over pixels not flagged in the GT mask
};

struct MetricReport {
    static constexpr int schema_version = 1;
    std::vector<ViewMetrics> views;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    std::optional<double> mean_psnr_masked;
    double runtime_seconds = 0.0;

    std::string to_json() const;
    std::string to_csv() const;
};

/// Metrics for every view except the center (the input).
/// `gt_masks` (row-major, true = occluded) adds non-occluded-only PSNR.
MetricReport evaluate_center_protocol(const LightField4D& gt, const LightField4D& pred,
                                      const std::vector<Mask>* gt_masks = nullptr);

} // namespace iibr
