#pragma once

#include <cstdint>
#include <vector>

#include "iibr/epi.hpp"
#include "iibr/light_field.hpp"

namespace iibr::synthlf {

enum class TextureKind { value_noise, stripes, checker };
enum class ShapeKind { rects, disks };

/// Procedural, seeded RGB texture defined on the whole plane.
class Texture {
public:
    Texture() = default;
    Texture(TextureKind kind, double feature_size, std::uint64_t seed);

    Rgb at(double x, double y) const;
    TextureKind kind() const { return kind_; }

private:
    double lattice(long ix, long iy, int channel) const;

    TextureKind kind_ = TextureKind::value_noise;
    double feature_ = 12.0;
    std::uint64_t seed_ = 0;
    Rgb color_a_ = Rgb::Constant(0.2), color_b_ = Rgb::Constant(0.8);
    double angle_ = 0.0;
};

struct Shape {
    ShapeKind kind = ShapeKind::rects;
    double cx = 0, cy = 0;         // center (layer frame, pixels)
    double half_w = 0, half_h = 0; // rect half extents; disks use half_w as radius

    bool contains(double x, double y) const;
};

/// Frontoparallel textured plane with constant disparity.
/// Coverage is the union of `shapes`, or everything when `full` is set.
struct Layer {
    Texture texture;
    double disparity = 0.0;
    bool full = false;
    std::vector<Shape> shapes;

    bool covers(double x, double y) const;
};

struct SceneSpec {
    int layers = 2;
    double disparity_min = 0.0;
    double disparity_max = 2.0;
    bool integer_disparity = true;
    TextureKind texture = TextureKind::value_noise;
    ShapeKind shape = ShapeKind::rects;
    int height = 64;
    int width = 64;
    /// Foreground shapes stay this many pixels away from the image border.
    int margin = 8;
    double feature_size = 12.0;
    std::uint64_t seed = 0;
};

/// Layers ordered back to front; disparity strictly increases toward the front.
std::vector<Layer> generate_scene(const SceneSpec& spec);

struct GroundTruth {
    LightField4D lf;
    std::vector<ScalarField> disparity; // row-major over (v, u)
    std::vector<Mask> occlusion;        // true = not visible from the center view

    const ScalarField& disparity_at(ViewIndex i) const { return disparity[index(i)]; }
    const Mask& occlusion_at(ViewIndex i) const { return occlusion[index(i)]; }

private:
    size_t index(ViewIndex i) const { return static_cast<size_t>(i.v) * lf.geometry().U() + i.u; }
};

/// Composites the layers into every view of the grid with exact visibility.
GroundTruth render_ground_truth(const std::vector<Layer>& layers, const GridGeometry& g);

/// One view at a continuous angular offset (dv, du) from the center view.
RgbImage render_view_at(const std::vector<Layer>& layers, int height, int width, double dv, double du,
                        ScalarField* disparity = nullptr);

/// Pixels of view `to` whose visible surface point is also visible in view `from`.
Mask visible_from(const std::vector<Layer>& layers, const GridGeometry& g, ViewIndex from, ViewIndex to);

/// Mean squared luma gradient of a texture sampled on a window; used to reject flat seeds.
double gradient_energy(const Texture& t, int height, int width);

/// Single full-coverage plane at the given disparity.
std::vector<Layer> plane_scene(double disparity, TextureKind kind, double feature_size, std::uint64_t seed);

} // namespace iibr::synthlf
