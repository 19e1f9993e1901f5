#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "iibr/error.hpp"

namespace iibr {

using Vec3 = Eigen::Vector3d;

/// Two-plane (light slab) ray coordinates. `x, y` live on the spatial plane
/// (pixels), `u, v` on the angular plane (grid steps, may be fractional).
struct LightSlabCoord {
    double x = 0, y = 0;
    double u = 0, v = 0;
};

/// Plücker ray: unit direction and moment m = o x d.
struct PluckerRay {
    Vec3 d = Vec3(0, 0, 1);
    Vec3 m = Vec3::Zero();
};

/// Integer angular position of a view in the grid.
struct ViewIndex {
    int v = 0;
    int u = 0;
    friend bool operator==(const ViewIndex&, const ViewIndex&) = default;
};

/// Regular grid embedding: angular plane at z=0, spatial plane at z=1.
/// One angular step and one pixel are both one plane unit.
class GridGeometry {
public:
    GridGeometry() = default;
    GridGeometry(int views_v, int views_u, int height, int width);

    int V() const { return V_; }
    int U() const { return U_; }
    int H() const { return H_; }
    int W() const { return W_; }
    double plane_separation() const { return 1.0; }
    double center_v() const { return (V_ - 1) / 2.0; }
    double center_u() const { return (U_ - 1) / 2.0; }
    int view_count() const { return V_ * U_; }

    bool has_view(int v, int u) const { return v >= 0 && v < V_ && u >= 0 && u < U_; }
    /// The stored view nearest to the geometric center.
    ViewIndex center_view() const { return {(V_ - 1) / 2, (U_ - 1) / 2}; }

    /// Slab coordinates of pixel (y, x) in view (v, u), in plane units
    /// centered on the grid (so the central view's central pixel maps to the axis).
    LightSlabCoord plane_coord(double v, double u, double y, double x) const
    {
        return {x - (W_ - 1) / 2.0, y - (H_ - 1) / 2.0, u - center_u(), v - center_v()};
    }

    friend bool operator==(const GridGeometry&, const GridGeometry&) = default;

private:
    int V_ = 1, U_ = 1, H_ = 1, W_ = 1;
};

/// Ray through (u, v, 0) and (x, y, 1), normalized.
PluckerRay slab_to_plucker(const LightSlabCoord& c);

/// Rescales so that |d| = 1. Throws DomainError for a zero direction.
PluckerRay plucker_normalize(const PluckerRay& r);

/// Ray of pixel (y, x) in stored view (v, u).
PluckerRay grid_ray(const GridGeometry& g, int v, int u, double y, double x);

/// Inverse of slab_to_plucker: intersections with z=0 and z=1 (plane units).
/// Requires d.z != 0.
LightSlabCoord plucker_to_slab(const PluckerRay& r);

inline double plucker_constraint(const PluckerRay& r) { return r.d.dot(r.m); }

} // namespace iibr
