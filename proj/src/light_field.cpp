#include "iibr/light_field.hpp"

#include <string>

namespace iibr {

LightField4D::LightField4D(const GridGeometry& g, const Rgb& fill)
    : geometry_(g), views_(static_cast<size_t>(g.view_count()), RgbImage(g.H(), g.W(), fill))
{
}

RgbImage& LightField4D::view(int v, int u)
{
    if (!geometry_.has_view(v, u))
        throw DomainError("view index out of range");
    return views_[static_cast<size_t>(v) * geometry_.U() + u];
}

const RgbImage& LightField4D::view(int v, int u) const
{
    if (!geometry_.has_view(v, u))
        throw DomainError("view index out of range");
    return views_[static_cast<size_t>(v) * geometry_.U() + u];
}

void LightField4D::set_view(int v, int u, RgbImage img)
{
    if (img.rows() != geometry_.H() || img.cols() != geometry_.W())
        throw DomainError("view size " + std::to_string(img.rows()) + "x" + std::to_string(img.cols()) +
                          " does not match light field");
    view(v, u) = std::move(img);
}

LightField4D make_light_field(const GridGeometry& g, std::vector<RgbImage> views)
{
    if (views.size() != static_cast<size_t>(g.view_count()))
        throw DomainError("view count does not match grid");
    LightField4D lf(g);
    for (int v = 0; v < g.V(); ++v)
        for (int u = 0; u < g.U(); ++u)
            lf.set_view(v, u, std::move(views[static_cast<size_t>(v) * g.U() + u]));
    return lf;
}

} // namespace iibr
