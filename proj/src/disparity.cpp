#include "iibr/disparity.hpp"

#include <cmath>
#include <sstream>

namespace iibr {

DisparityMap apply_calibration(const RelativeDepthMap& f, const DisparityCalibration& c, double max_disparity)
{
    if (c.alpha == 0.0 || !std::isfinite(c.alpha) || !std::isfinite(c.beta))
        throw DomainError("invalid disparity calibration (alpha must be finite and non-zero)");
    DisparityMap out{ScalarField(f.values.rows(), f.values.cols())};
    int bad = 0;
    double worst = 0.0;
    for (size_t i = 0; i < f.values.size(); ++i) {
        double d = c.alpha * f.values[i] + c.beta;
        if (!std::isfinite(d) || std::abs(d) > max_disparity) {
            ++bad;
            worst = std::max(worst, std::isfinite(d) ? std::abs(d) : HUGE_VAL);
        }
        out.values[i] = d;
    }
    if (bad > 0) {
        std::ostringstream msg;
        msg << "calibrated disparity exceeds max_disparity " << max_disparity << " at " << bad
            << " pixels (largest magnitude " << worst << ")";
        throw DomainError(msg.str());
    }
    return out;
}

CalibrationFit calibrate(const RelativeDepthMap& f, const SlopeField& reference, double min_coherence)
{
    if (!f.values.same_shape(reference.slope) || !f.values.same_shape(reference.coherence))
        throw DomainError("relative depth and slope field differ in shape");

    auto usable = [&](size_t i) {
        double w = reference.coherence[i];
        return w > 0.0 && w >= min_coherence && std::isfinite(reference.slope[i]) && std::isfinite(f.values[i]);
    };

    double sw = 0.0, sf = 0.0, ss = 0.0;
    int n = 0;
    for (size_t i = 0; i < f.values.size(); ++i) {
        if (!usable(i))
            continue;
        double w = reference.coherence[i];
        sw += w;
        sf += w * f.values[i];
        ss += w * reference.slope[i];
        ++n;
    }
    if (n < 2)
        throw NumericError("calibration needs at least two confident pixels");
    double fm = sf / sw, sm = ss / sw;
    double sff = 0.0, sfs = 0.0, fscale = 0.0;
    for (size_t i = 0; i < f.values.size(); ++i) {
        if (!usable(i))
            continue;
        double w = reference.coherence[i];
        double df = f.values[i] - fm;
        sff += w * df * df;
        sfs += w * df * (reference.slope[i] - sm);
        fscale = std::max(fscale, std::abs(f.values[i]));
    }
    if (!(sff > 1e-24 * std::max(1.0, fscale * fscale) * sw))
        throw NumericError("calibration is rank deficient: relative depth is constant on the confident set");

    CalibrationFit fit;
    fit.calibration.alpha = sfs / sff;
    fit.calibration.beta = sm - fit.calibration.alpha * fm;
    if (fit.calibration.alpha == 0.0)
        throw NumericError("calibration produced alpha = 0");
    double r2 = 0.0;
    for (size_t i = 0; i < f.values.size(); ++i) {
        if (!usable(i))
            continue;
        double r = fit.calibration.alpha * f.values[i] + fit.calibration.beta - reference.slope[i];
        r2 += reference.coherence[i] * r * r;
    }
    fit.residual = std::sqrt(r2 / sw);
    fit.pixels = n;
    return fit;
}

SlopeField center_view_slopes(const LightField4D& lf, const StructureTensorConfig& cfg, EpiAxis axis)
{
    const GridGeometry& g = lf.geometry();
    const ViewIndex c = g.center_view();
    SlopeField out{ScalarField(g.H(), g.W(), 0.0), ScalarField(g.H(), g.W(), 0.0)};
    if (axis == EpiAxis::horizontal) {
        for (int y = 0; y < g.H(); ++y) {
            SlopeField s = slopes_from_tensor(structure_tensor(extract_epi(lf, y, c.v, axis), cfg));
            for (int x = 0; x < g.W(); ++x) {
                out.slope.at(y, x) = s.slope.at(c.u, x);
                out.coherence.at(y, x) = s.coherence.at(c.u, x);
            }
        }
    } else {
        for (int x = 0; x < g.W(); ++x) {
            SlopeField s = slopes_from_tensor(structure_tensor(extract_epi(lf, x, c.u, axis), cfg));
            for (int y = 0; y < g.H(); ++y) {
                out.slope.at(y, x) = s.slope.at(c.v, y);
                out.coherence.at(y, x) = s.coherence.at(c.v, y);
            }
        }
    }
    return out;
}

} // namespace iibr
