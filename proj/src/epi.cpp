#include "iibr/epi.hpp"

#include <cmath>
#include <string>

namespace iibr {

Epi extract_epi(const LightField4D& lf, int fixed_spatial, int fixed_angular, EpiAxis axis)
{
    const GridGeometry& g = lf.geometry();
    Epi e;
    e.axis = axis;
    if (axis == EpiAxis::horizontal) {
        if (fixed_angular < 0 || fixed_angular >= g.V() || fixed_spatial < 0 || fixed_spatial >= g.H())
            throw DomainError("horizontal EPI index out of range");
        e.pixels = RgbImage(g.U(), g.W());
        for (int a = 0; a < g.U(); ++a) {
            const RgbImage& view = lf.view(fixed_angular, a);
            for (int s = 0; s < g.W(); ++s)
                e.pixels.at(a, s) = view.at(fixed_spatial, s);
        }
    } else {
        if (fixed_angular < 0 || fixed_angular >= g.U() || fixed_spatial < 0 || fixed_spatial >= g.W())
            throw DomainError("vertical EPI index out of range");
        e.pixels = RgbImage(g.V(), g.H());
        for (int a = 0; a < g.V(); ++a) {
            const RgbImage& view = lf.view(a, fixed_angular);
            for (int s = 0; s < g.H(); ++s)
                e.pixels.at(a, s) = view.at(s, fixed_spatial);
        }
    }
    return e;
}

CorrespondenceSet correspondence_set(double x, double u, double d, const std::vector<double>& angular_range)
{
    CorrespondenceSet out;
    out.reserve(angular_range.size());
    for (double ui : angular_range)
        out.push_back({x + d * (ui - u), ui});
    return out;
}

std::pair<Epi, HoleMask> synthesize_epi(const std::vector<Rgb>& row, const std::vector<double>& disp, int angular,
                                        int source_row, EpiAxis axis)
{
    if (row.size() != disp.size())
        throw DomainError("row and disparity lengths differ");
    if (row.empty())
        throw DomainError("empty row");
    if (source_row < 0 || source_row >= angular)
        throw DomainError("source row outside the angular range");

    const int S = static_cast<int>(row.size());
    Epi e;
    e.axis = axis;
    e.pixels = RgbImage(angular, S, Rgb::Zero());
    HoleMask holes(angular, S, 1);

    std::vector<int> winner(S);
    for (int u = 0; u < angular; ++u) {
        std::fill(winner.begin(), winner.end(), -1);
        const double du = u - source_row;
        for (int x = 0; x < S; ++x) {
            double p = x + disp[x] * du;
            int lo = std::max(0, static_cast<int>(std::ceil(p - 0.5)));
            int hi = std::min(S - 1, static_cast<int>(std::floor(p + 0.5)));
            for (int t = lo; t <= hi; ++t) {
                int w = winner[t];
                if (w < 0 || disp[x] > disp[w])
                    winner[t] = x;
            }
        }
        for (int t = 0; t < S; ++t) {
            int w = winner[t];
            if (w < 0)
                continue;
            holes.at(u, t) = 0;
            if (du == 0.0) {
                e.pixels.at(u, t) = row[t];
                continue;
            }
            double src = std::clamp(t - disp[w] * du, 0.0, static_cast<double>(S - 1));
            e.pixels.at(u, t) = lerp_row(row.data(), S, src);
        }
    }
    return {std::move(e), std::move(holes)};
}

Rgb sample_subpixel(const std::vector<Rgb>& row, double x, OutOfRange policy, bool* clamped)
{
    if (row.empty())
        throw DomainError("empty row");
    const double hi = static_cast<double>(row.size() - 1);
    bool outside = !(x >= 0.0 && x <= hi);
    if (clamped)
        *clamped = outside;
    if (outside) {
        if (policy == OutOfRange::error || std::isnan(x))
            throw DomainError("sub-pixel position " + std::to_string(x) + " outside [0, " + std::to_string(hi) + "]");
        x = std::clamp(x, 0.0, hi);
    }
    return lerp_row(row.data(), static_cast<int>(row.size()), x);
}

Rgb sample_subpixel(const Epi& e, int angular_row, double x, OutOfRange policy, bool* clamped)
{
    if (angular_row < 0 || angular_row >= e.angular())
        throw DomainError("EPI row out of range");
    std::vector<Rgb> row(e.pixels.data().begin() + static_cast<long>(angular_row) * e.spatial(),
                         e.pixels.data().begin() + static_cast<long>(angular_row + 1) * e.spatial());
    return sample_subpixel(row, x, policy, clamped);
}

namespace {

std::vector<double> gaussian_taps(double sigma, int radius, bool normalize)
{
    std::vector<double> k(2 * radius + 1);
    double sum = 0.0;
    for (int j = -radius; j <= radius; ++j) {
        double w = sigma > 0.0 ? std::exp(-0.5 * j * j / (sigma * sigma)) : (j == 0 ? 1.0 : 0.0);
        k[j + radius] = w;
        sum += w;
    }
    if (normalize)
        for (double& w : k)
            w /= sum;
    return k;
}

// Sampled derivative of a Gaussian, scaled to differentiate a unit ramp exactly.
// Falls back to the central difference when sigma is 0.
std::vector<double> gaussian_derivative_taps(double sigma, int radius)
{
    std::vector<double> k(2 * radius + 1, 0.0);
    if (sigma <= 0.0) {
        k[radius - 1] = -0.5;
        k[radius + 1] = 0.5;
        return k;
    }
    double moment = 0.0;
    for (int j = -radius; j <= radius; ++j) {
        k[j + radius] = j * std::exp(-0.5 * j * j / (sigma * sigma));
        moment += j * k[j + radius];
    }
    for (double& w : k)
        w /= moment;
    return k;
}

// Separable structure tensor on an A x S luma raster.
//
// Gradients are derivative-of-Gaussian filters evaluated only where the whole
// stencil fits inside the raster ("valid" region), so no padded data ever
// enters a gradient. A sampled Gaussian derivative stays close to the ideal
// derivative up to high frequencies, which keeps steep EPI lines (several
// pixels per view) from being flattened. The tensor products are then spread
// with a normalized Gaussian over the valid pixels, which keeps every output
// pixel an average of genuine gradient outer products.
class TensorOperator {
public:
    TensorOperator(int A, int S, const StructureTensorConfig& cfg) : A_(A), S_(S)
    {
        if (A < 3 || S < 3)
            throw DomainError("EPI too small for a structure tensor (need at least 3x3)");
        if (cfg.sigma_grad < 0.0 || cfg.sigma_smooth <= 0.0)
            throw DomainError("structure tensor scales must be positive");
        int r = std::max(1, static_cast<int>(std::ceil(3.0 * cfg.sigma_grad)));
        ru_ = std::min(r, (A - 1) / 2);
        rx_ = std::min(r, (S - 1) / 2);
        gu_k_ = gaussian_taps(cfg.sigma_grad, ru_, true);
        gx_k_ = gaussian_taps(cfg.sigma_grad, rx_, true);
        du_k_ = gaussian_derivative_taps(cfg.sigma_grad, ru_);
        dx_k_ = gaussian_derivative_taps(cfg.sigma_grad, rx_);
        rs_ = static_cast<int>(std::ceil(3.0 * cfg.sigma_smooth));
        ks_ = gaussian_taps(cfg.sigma_smooth, rs_, false);

        valid_ = ScalarField(A, S, 0.0);
        for (int u = ru_; u < A - ru_; ++u)
            for (int x = rx_; x < S - rx_; ++x)
                valid_.at(u, x) = 1.0;
        den_ = smooth(valid_);
    }

    StructureTensorField forward(const ScalarField& Y)
    {
        gx_ = filter(Y, dx_k_, gu_k_);
        gu_ = filter(Y, gx_k_, du_k_);
        ScalarField jxx(A_, S_, 0.0), jxu(A_, S_, 0.0), juu(A_, S_, 0.0);
        for (size_t i = 0; i < Y.size(); ++i) {
            if (valid_[i] == 0.0)
                continue;
            jxx[i] = gx_[i] * gx_[i];
            jxu[i] = gx_[i] * gu_[i];
            juu[i] = gu_[i] * gu_[i];
        }
        return {normalize(smooth(jxx)), normalize(smooth(jxu)), normalize(smooth(juu))};
    }

    // Adjoint of forward() at the last evaluated point.
    ScalarField backward(const StructureTensorField& grad_out) const
    {
        ScalarField dxx = smooth(normalize(grad_out.jxx));
        ScalarField dxu = smooth(normalize(grad_out.jxu));
        ScalarField duu = smooth(normalize(grad_out.juu));
        ScalarField dgx(A_, S_, 0.0), dgu(A_, S_, 0.0);
        for (size_t i = 0; i < dgx.size(); ++i) {
            if (valid_[i] == 0.0)
                continue;
            dgx[i] = 2.0 * gx_[i] * dxx[i] + gu_[i] * dxu[i];
            dgu[i] = gx_[i] * dxu[i] + 2.0 * gu_[i] * duu[i];
        }
        ScalarField dY = filter_adjoint(dgx, dx_k_, gu_k_);
        ScalarField dY2 = filter_adjoint(dgu, gx_k_, du_k_);
        for (size_t i = 0; i < dY.size(); ++i)
            dY[i] += dY2[i];
        return dY;
    }

private:
    // Valid-mode separable correlation: kx along x, then ku along u.
    ScalarField filter(const ScalarField& Y, const std::vector<double>& kx, const std::vector<double>& ku) const
    {
        ScalarField tmp(A_, S_, 0.0), out(A_, S_, 0.0);
        for (int u = 0; u < A_; ++u)
            for (int x = rx_; x < S_ - rx_; ++x) {
                double s = 0.0;
                for (int j = -rx_; j <= rx_; ++j)
                    s += kx[j + rx_] * Y.at(u, x + j);
                tmp.at(u, x) = s;
            }
        for (int u = ru_; u < A_ - ru_; ++u)
            for (int x = rx_; x < S_ - rx_; ++x) {
                double s = 0.0;
                for (int i = -ru_; i <= ru_; ++i)
                    s += ku[i + ru_] * tmp.at(u + i, x);
                out.at(u, x) = s;
            }
        return out;
    }

    ScalarField filter_adjoint(const ScalarField& dOut, const std::vector<double>& kx,
                               const std::vector<double>& ku) const
    {
        ScalarField dtmp(A_, S_, 0.0), dY(A_, S_, 0.0);
        for (int u = ru_; u < A_ - ru_; ++u)
            for (int x = rx_; x < S_ - rx_; ++x) {
                double g = dOut.at(u, x);
                if (g == 0.0)
                    continue;
                for (int i = -ru_; i <= ru_; ++i)
                    dtmp.at(u + i, x) += ku[i + ru_] * g;
            }
        for (int u = 0; u < A_; ++u)
            for (int x = rx_; x < S_ - rx_; ++x) {
                double g = dtmp.at(u, x);
                if (g == 0.0)
                    continue;
                for (int j = -rx_; j <= rx_; ++j)
                    dY.at(u, x + j) += kx[j + rx_] * g;
            }
        return dY;
    }

    // Zero-padded separable Gaussian; symmetric, hence self-adjoint.
    ScalarField smooth(const ScalarField& in) const
    {
        ScalarField tmp(A_, S_, 0.0), out(A_, S_, 0.0);
        for (int u = 0; u < A_; ++u)
            for (int x = 0; x < S_; ++x) {
                double s = 0.0;
                for (int j = std::max(-rs_, -x); j <= std::min(rs_, S_ - 1 - x); ++j)
                    s += ks_[j + rs_] * in.at(u, x + j);
                tmp.at(u, x) = s;
            }
        for (int u = 0; u < A_; ++u)
            for (int x = 0; x < S_; ++x) {
                double s = 0.0;
                for (int i = std::max(-rs_, -u); i <= std::min(rs_, A_ - 1 - u); ++i)
                    s += ks_[i + rs_] * tmp.at(u + i, x);
                out.at(u, x) = s;
            }
        return out;
    }

    ScalarField normalize(const ScalarField& in) const
    {
        ScalarField out(A_, S_, 0.0);
        for (size_t i = 0; i < in.size(); ++i)
            out[i] = den_[i] > 1e-300 ? in[i] / den_[i] : 0.0;
        return out;
    }

    int A_, S_;
    int ru_ = 0, rx_ = 0, rs_ = 0;
    std::vector<double> gu_k_, gx_k_, du_k_, dx_k_, ks_;
    ScalarField valid_, den_;
    ScalarField gx_, gu_;
};

} // namespace

StructureTensorField structure_tensor(const ScalarField& luma, const StructureTensorConfig& cfg)
{
    TensorOperator op(luma.rows(), luma.cols(), cfg);
    return op.forward(luma);
}

StructureTensorField structure_tensor(const Epi& e, const StructureTensorConfig& cfg)
{
    return structure_tensor(luma_of(e.pixels), cfg);
}

SlopeField slopes_from_tensor(const StructureTensorField& st)
{
    const int A = st.jxx.rows(), S = st.jxx.cols();
    SlopeField out{ScalarField(A, S, 0.0), ScalarField(A, S, 0.0)};
    for (size_t i = 0; i < st.jxx.size(); ++i) {
        double a = st.jxx[i], b = st.jxu[i], c = st.juu[i];
        double trace = a + c;
        if (!(trace >= 1e-12)) {
            out.slope[i] = 0.0;
            out.coherence[i] = 0.0;
            continue;
        }
        double disc = std::sqrt((a - c) * (a - c) + 4.0 * b * b);
        double lmin = 0.5 * (trace - disc);
        // Minor eigenvector (ex, eu) is the along-line direction; slope = ex / eu.
        // Two equivalent forms; take the better conditioned one.
        double ex, eu;
        if (std::abs(a - lmin) >= std::abs(c - lmin)) {
            ex = -b;
            eu = a - lmin;
        } else {
            ex = c - lmin;
            eu = -b;
        }
        double slope;
        if (eu != 0.0)
            slope = ex / eu;
        else
            slope = ex == 0.0 ? 0.0 : std::copysign(HUGE_VAL, ex);
        out.slope[i] = slope;
        out.coherence[i] = std::clamp((disc / trace) * (disc / trace), 0.0, 1.0);
    }
    return out;
}

double epi_structure_loss(const ScalarField& luma, const StructureTensorField& reference,
                          const StructureTensorConfig& cfg, ScalarField* grad)
{
    if (!luma.same_shape(reference.jxx))
        throw DomainError("EPI shapes differ");
    TensorOperator op(luma.rows(), luma.cols(), cfg);
    StructureTensorField st = op.forward(luma);
    const double n = 3.0 * static_cast<double>(luma.size());
    double loss = 0.0;
    StructureTensorField d{ScalarField(luma.rows(), luma.cols(), 0.0), ScalarField(luma.rows(), luma.cols(), 0.0),
                           ScalarField(luma.rows(), luma.cols(), 0.0)};
    auto term = [&](const ScalarField& a, const ScalarField& b, ScalarField& da) {
        for (size_t i = 0; i < a.size(); ++i) {
            double r = a[i] - b[i];
            loss += std::abs(r);
            da[i] = (r > 0.0 ? 1.0 : (r < 0.0 ? -1.0 : 0.0)) / n;
        }
    };
    term(st.jxx, reference.jxx, d.jxx);
    term(st.jxu, reference.jxu, d.jxu);
    term(st.juu, reference.juu, d.juu);
    if (grad)
        *grad = op.backward(d);
    return loss / n;
}

double epi_structure_loss(const Epi& e, const Epi& e_gt, const StructureTensorConfig& cfg)
{
    if (!e.pixels.same_shape(e_gt.pixels))
        throw DomainError("EPI shapes differ");
    return epi_structure_loss(luma_of(e.pixels), structure_tensor(e_gt, cfg), cfg, nullptr);
}

} // namespace iibr
