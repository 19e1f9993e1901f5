#include "iibr/photo_fx.hpp"

#include <cmath>

namespace iibr {

ApertureSpec ApertureSpec::full(const GridGeometry& g)
{
    ApertureSpec a;
    for (int v = 0; v < g.V(); ++v)
        for (int u = 0; u < g.U(); ++u)
            a.entries.push_back({{v, u}, 1.0});
    return a;
}

ApertureSpec ApertureSpec::disk(const GridGeometry& g, double radius)
{
    ApertureSpec a;
    for (int v = 0; v < g.V(); ++v)
        for (int u = 0; u < g.U(); ++u)
            if (std::hypot(v - g.center_v(), u - g.center_u()) <= radius + 1e-12)
                a.entries.push_back({{v, u}, 1.0});
    return a;
}

RgbImage refocus(const LightField4D& lf, double d_f, const ApertureSpec& ap, BorderPolicy border, double max_disparity)
{
    const GridGeometry& g = lf.geometry();
    if (ap.entries.empty())
        throw DomainError("aperture is empty");
    if (!(std::abs(d_f) <= max_disparity))
        throw DomainError("focus disparity exceeds the maximum disparity");
    double wsum = 0.0;
    for (const auto& e : ap.entries) {
        if (!g.has_view(e.view.v, e.view.u))
            throw DomainError("aperture view outside the grid");
        if (!(e.weight >= 0.0))
            throw DomainError("aperture weights must be non-negative");
        wsum += e.weight;
    }
    if (!(wsum > 0.0))
        throw DomainError("aperture weights sum to zero");

    // A one-view aperture is a pinhole: nothing to integrate, no registration to the center frame.
    const ViewIndex* only = nullptr;
    int live = 0;
    for (const auto& e : ap.entries)
        if (e.weight > 0.0) {
            only = &e.view;
            ++live;
        }
    if (live == 1)
        return lf.view(*only);

    RgbImage out(g.H(), g.W(), Rgb::Zero());
    ScalarField acc(g.H(), g.W(), 0.0);
    for (const auto& e : ap.entries) {
        const double w = e.weight / wsum;
        if (w == 0.0)
            continue;
        const RgbImage& view = lf.view(e.view);
        const double oy = d_f * (e.view.v - g.center_v()), ox = d_f * (e.view.u - g.center_u());
        for (int y = 0; y < g.H(); ++y)
            for (int x = 0; x < g.W(); ++x) {
                Rgb c;
                if (sample_bilinear(view, y + oy, x + ox, c)) {
                    out.at(y, x) += w * c;
                    acc.at(y, x) += w;
                }
            }
    }
    if (border == BorderPolicy::renorm)
        for (size_t i = 0; i < out.size(); ++i)
            if (acc[i] > 0.0)
                out[i] /= acc[i];
    return out;
}

namespace {

Rgb sample_clamped(const RgbImage& img, double y, double x)
{
    Rgb c;
    y = std::clamp(y, 0.0, double(img.rows() - 1));
    x = std::clamp(x, 0.0, double(img.cols() - 1));
    sample_bilinear(img, y, x, c);
    return c;
}

} // namespace

RgbImage free_view(const LightField4D& lf, double v, double u, double focal_d)
{
    const GridGeometry& g = lf.geometry();
    if (!(v >= 0.0 && v <= g.V() - 1 && u >= 0.0 && u <= g.U() - 1))
        throw DomainError("free view position outside the grid");
    const int v0 = std::min(static_cast<int>(std::floor(v)), g.V() - 1);
    const int u0 = std::min(static_cast<int>(std::floor(u)), g.U() - 1);
    const double tv = v - v0, tu = u - u0;
    if (tv == 0.0 && tu == 0.0)
        return lf.view(v0, u0);

    struct Corner {
        int v, u;
        double w;
    };
    std::vector<Corner> corners;
    for (int dv = 0; dv <= 1; ++dv)
        for (int du = 0; du <= 1; ++du) {
            double w = (dv ? tv : 1.0 - tv) * (du ? tu : 1.0 - tu);
            if (w > 0.0)
                corners.push_back({v0 + dv, u0 + du, w});
        }
    RgbImage out(g.H(), g.W(), Rgb::Zero());
    for (const Corner& c : corners) {
        // A point at disparity focal_d seen at x in view u sits at x + d (u_c - u) in view u_c.
        const double oy = focal_d * (c.v - v), ox = focal_d * (c.u - u);
        const RgbImage& view = lf.view(c.v, c.u);
        for (int y = 0; y < g.H(); ++y)
            for (int x = 0; x < g.W(); ++x)
                out.at(y, x) += c.w * sample_clamped(view, y + oy, x + ox);
    }
    return out;
}

double gradient_energy(const RgbImage& img, int border)
{
    const ScalarField l = luma_of(img);
    double sum = 0.0;
    long n = 0;
    for (int y = border; y + 1 < img.rows() - border; ++y)
        for (int x = border; x + 1 < img.cols() - border; ++x) {
            double gx = l.at(y, x + 1) - l.at(y, x), gy = l.at(y + 1, x) - l.at(y, x);
            sum += gx * gx + gy * gy;
            ++n;
        }
    if (n == 0)
        throw DomainError("image too small for the requested border");
    return sum / double(n);
}

} // namespace iibr
