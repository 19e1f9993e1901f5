#include "iibr/geometry.hpp"

#include <cmath>

namespace iibr {

GridGeometry::GridGeometry(int views_v, int views_u, int height, int width)
    : V_(views_v), U_(views_u), H_(height), W_(width)
{
    if (V_ < 1 || U_ < 1)
        throw DomainError("grid needs at least one view along each angular axis");
    if (H_ < 1 || W_ < 1)
        throw DomainError("grid needs a positive spatial size");
}

PluckerRay slab_to_plucker(const LightSlabCoord& c)
{
    Vec3 o(c.u, c.v, 0.0);
    Vec3 p(c.x, c.y, 1.0);
    PluckerRay r;
    r.d = (p - o).normalized();
    r.m = o.cross(r.d);
    return r;
}

PluckerRay plucker_normalize(const PluckerRay& r)
{
    double n = r.d.norm();
    if (!(n > 0.0) || !std::isfinite(n))
        throw DomainError("degenerate Plücker ray: zero direction");
    return {r.d / n, r.m / n};
}

PluckerRay grid_ray(const GridGeometry& g, int v, int u, double y, double x)
{
    if (!g.has_view(v, u))
        throw DomainError("angular index out of range");
    return slab_to_plucker(g.plane_coord(v, u, y, x));
}

LightSlabCoord plucker_to_slab(const PluckerRay& r)
{
    // Point on the ray closest to the origin, then walk to z=0 and z=1.
    double dd = r.d.squaredNorm();
    Vec3 p0 = r.d.cross(r.m) / dd;
    double t0 = -p0.z() / r.d.z();
    double t1 = (1.0 - p0.z()) / r.d.z();
    Vec3 o = p0 + t0 * r.d;
    Vec3 p = p0 + t1 * r.d;
    return {p.x(), p.y(), o.x(), o.y()};
}

} // namespace iibr
