#pragma once

#include <vector>

#include "iibr/geometry.hpp"
#include "iibr/image.hpp"

namespace iibr {

/// Dense V x U grid of H x W sub-aperture images.
class LightField4D {
public:
    LightField4D() = default;
    explicit LightField4D(const GridGeometry& g, const Rgb& fill = Rgb::Zero());

    const GridGeometry& geometry() const { return geometry_; }

    RgbImage& view(int v, int u);
    const RgbImage& view(int v, int u) const;
    RgbImage& view(ViewIndex i) { return view(i.v, i.u); }
    const RgbImage& view(ViewIndex i) const { return view(i.v, i.u); }

    /// Replaces a view; its size must match the geometry.
    void set_view(int v, int u, RgbImage img);

    const RgbImage& center() const { return view(geometry_.center_view()); }

    bool operator==(const LightField4D& o) const = default;

private:
    GridGeometry geometry_;
    std::vector<RgbImage> views_;
};

/// Builds an LF from a list of views in row-major (v, u) order.
LightField4D make_light_field(const GridGeometry& g, std::vector<RgbImage> views);

} // namespace iibr
