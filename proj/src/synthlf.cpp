#include "iibr/synthlf.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace iibr::synthlf {

namespace {

std::uint64_t splitmix(std::uint64_t x)
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

double unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

// Portable uniform draws; std distributions are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(eng_()); }
    int integer(int lo, int hi) { return lo + static_cast<int>(unit(eng_()) * (hi - lo + 1)); }
    std::uint64_t next() { return eng_(); }

private:
    std::mt19937_64 eng_;
};

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

Rgb random_color(Rng& rng)
{
    return Rgb(rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9), rng.uniform(0.1, 0.9));
}

} // namespace

Texture::Texture(TextureKind kind, double feature_size, std::uint64_t seed)
    : kind_(kind), feature_(feature_size), seed_(seed)
{
    if (!(feature_size > 0.0))
        throw DomainError("texture feature size must be positive");
    Rng rng(splitmix(seed ^ 0xA5A5A5A5ull));
    color_a_ = random_color(rng);
    color_b_ = random_color(rng);
    // Keep the two colors apart so stripes and checkers carry contrast.
    if ((color_a_ - color_b_).abs().maxCoeff() < 0.3)
        color_b_ = (color_a_ < 0.5).select(color_a_ + 0.4, color_a_ - 0.4);
    angle_ = rng.uniform(0.0, std::numbers::pi);
}

double Texture::lattice(long ix, long iy, int channel) const
{
    std::uint64_t h = splitmix(seed_ ^ splitmix(static_cast<std::uint64_t>(ix) * 0x100000001B3ull ^
                                                splitmix(static_cast<std::uint64_t>(iy) + 7919u * channel)));
    return 0.1 + 0.8 * unit(h);
}

Rgb Texture::at(double x, double y) const
{
    switch (kind_) {
    case TextureKind::value_noise: {
        double fx = x / feature_, fy = y / feature_;
        long ix = static_cast<long>(std::floor(fx)), iy = static_cast<long>(std::floor(fy));
        double tx = smoothstep(fx - ix), ty = smoothstep(fy - iy);
        Rgb out;
        for (int c = 0; c < 3; ++c) {
            double a = lattice(ix, iy, c), b = lattice(ix + 1, iy, c);
            double d = lattice(ix, iy + 1, c), e = lattice(ix + 1, iy + 1, c);
            out[c] = (a * (1 - tx) + b * tx) * (1 - ty) + (d * (1 - tx) + e * tx) * ty;
        }
        return out;
    }
    case TextureKind::stripes: {
        double s = x * std::cos(angle_) + y * std::sin(angle_);
        double t = 0.5 + 0.5 * std::sin(std::numbers::pi * s / feature_);
        return color_a_ * (1 - t) + color_b_ * t;
    }
    case TextureKind::checker: {
        long cx = static_cast<long>(std::floor(x / feature_)), cy = static_cast<long>(std::floor(y / feature_));
        return ((cx + cy) & 1) ? color_a_ : color_b_;
    }
    }
    return Rgb::Zero();
}

bool Shape::contains(double x, double y) const
{
    if (kind == ShapeKind::rects)
        return std::abs(x - cx) <= half_w && std::abs(y - cy) <= half_h;
    double dx = x - cx, dy = y - cy;
    return dx * dx + dy * dy <= half_w * half_w;
}

bool Layer::covers(double x, double y) const
{
    if (full)
        return true;
    for (const Shape& s : shapes)
        if (s.contains(x, y))
            return true;
    return false;
}

double gradient_energy(const Texture& t, int height, int width)
{
    double sum = 0.0;
    int n = 0;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            double gx = luma(t.at(x + 1, y)) - luma(t.at(x, y));
            double gy = luma(t.at(x, y + 1)) - luma(t.at(x, y));
            sum += gx * gx + gy * gy;
            ++n;
        }
    return n ? sum / n : 0.0;
}

namespace {

Texture textured(TextureKind kind, double feature, std::uint64_t seed, int h, int w)
{
    // Reject seeds whose texture is nearly flat; tensors need gradients.
    const double min_energy = 1e-5 * (12.0 / feature) * (12.0 / feature);
    for (int attempt = 0;; ++attempt) {
        Texture t(kind, feature, splitmix(seed + 0x51ull * attempt));
        if (gradient_energy(t, std::min(h, 64), std::min(w, 64)) >= min_energy || attempt >= 32)
            return t;
    }
}

} // namespace

std::vector<Layer> generate_scene(const SceneSpec& spec)
{
    if (spec.layers < 1)
        throw DomainError("scene needs at least one layer");
    if (spec.disparity_max < spec.disparity_min)
        throw DomainError("disparity range is inverted");
    if (spec.height < 1 || spec.width < 1)
        throw DomainError("scene size must be positive");

    Rng rng(splitmix(spec.seed));
    std::vector<Layer> layers(static_cast<size_t>(spec.layers));
    for (int i = 0; i < spec.layers; ++i) {
        Layer& L = layers[static_cast<size_t>(i)];
        double d = spec.layers == 1 ? spec.disparity_min
                                    : spec.disparity_min + (spec.disparity_max - spec.disparity_min) * i / (spec.layers - 1);
        L.disparity = spec.integer_disparity ? std::round(d) : d;
        if (i > 0 && !(L.disparity > layers[static_cast<size_t>(i - 1)].disparity))
            throw DomainError("disparity range too narrow for distinct layer disparities");
        L.texture = textured(spec.texture, spec.feature_size, rng.next(), spec.height, spec.width);
        if (i == 0) {
            L.full = true;
            continue;
        }
        int count = rng.integer(1, 2);
        double lo_x = spec.margin, hi_x = spec.width - 1 - spec.margin;
        double lo_y = spec.margin, hi_y = spec.height - 1 - spec.margin;
        if (hi_x <= lo_x || hi_y <= lo_y)
            throw DomainError("margin leaves no room for foreground shapes");
        for (int k = 0; k < count; ++k) {
            Shape s;
            s.kind = spec.shape;
            double max_half_w = std::max(2.0, (hi_x - lo_x) / 4.0), max_half_h = std::max(2.0, (hi_y - lo_y) / 4.0);
            if (spec.shape == ShapeKind::disks) {
                double r_max = std::min(max_half_w, max_half_h);
                s.half_w = s.half_h = rng.uniform(std::max(2.0, r_max / 2), r_max);
            } else {
                s.half_w = rng.uniform(std::max(2.0, max_half_w / 2), max_half_w);
                s.half_h = rng.uniform(std::max(2.0, max_half_h / 2), max_half_h);
            }
            s.cx = std::round(rng.uniform(lo_x + s.half_w, hi_x - s.half_w));
            s.cy = std::round(rng.uniform(lo_y + s.half_h, hi_y - s.half_h));
            L.shapes.push_back(s);
        }
    }
    return layers;
}

std::vector<Layer> plane_scene(double disparity, TextureKind kind, double feature_size, std::uint64_t seed)
{
    Layer L;
    L.full = true;
    L.disparity = disparity;
    L.texture = textured(kind, feature_size, seed, 64, 64);
    return {L};
}

namespace {

// Index of the front-most layer covering layer-frame point shifted for a view.
int front_layer(const std::vector<Layer>& layers, double y, double x, double dv, double du)
{
    for (int i = static_cast<int>(layers.size()) - 1; i >= 0; --i) {
        const Layer& L = layers[static_cast<size_t>(i)];
        if (L.covers(x - L.disparity * du, y - L.disparity * dv))
            return i;
    }
    return -1;
}

} // namespace

RgbImage render_view_at(const std::vector<Layer>& layers, int height, int width, double dv, double du,
                        ScalarField* disparity)
{
    RgbImage img(height, width, Rgb::Zero());
    if (disparity)
        *disparity = ScalarField(height, width, 0.0);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            int i = front_layer(layers, y, x, dv, du);
            if (i < 0)
                continue;
            const Layer& L = layers[static_cast<size_t>(i)];
            img.at(y, x) = L.texture.at(x - L.disparity * du, y - L.disparity * dv);
            if (disparity)
                disparity->at(y, x) = L.disparity;
        }
    return img;
}

Mask visible_from(const std::vector<Layer>& layers, const GridGeometry& g, ViewIndex from, ViewIndex to)
{
    const ViewIndex c = g.center_view();
    const double fdv = from.v - c.v, fdu = from.u - c.u;
    const double tdv = to.v - c.v, tdu = to.u - c.u;
    Mask m(g.H(), g.W(), 0);
    for (int y = 0; y < g.H(); ++y)
        for (int x = 0; x < g.W(); ++x) {
            int i = front_layer(layers, y, x, tdv, tdu);
            if (i < 0)
                continue;
            double d = layers[static_cast<size_t>(i)].disparity;
            // Same surface point seen from the other view.
            double fy = y + d * (fdv - tdv), fx = x + d * (fdu - tdu);
            double ry = std::round(fy), rx = std::round(fx);
            if (ry < 0 || ry > g.H() - 1 || rx < 0 || rx > g.W() - 1)
                continue;
            if (front_layer(layers, fy, fx, fdv, fdu) == i)
                m.at(y, x) = 1;
        }
    return m;
}

GroundTruth render_ground_truth(const std::vector<Layer>& layers, const GridGeometry& g)
{
    if (layers.empty())
        throw DomainError("no layers");
    GroundTruth gt;
    gt.lf = LightField4D(g);
    const ViewIndex c = g.center_view();
    for (int v = 0; v < g.V(); ++v)
        for (int u = 0; u < g.U(); ++u) {
            ScalarField disp;
            gt.lf.set_view(v, u, render_view_at(layers, g.H(), g.W(), v - c.v, u - c.u, &disp));
            gt.disparity.push_back(std::move(disp));
            Mask vis = visible_from(layers, g, c, {v, u});
            for (auto& b : vis.data())
                b = b ? 0 : 1;
            gt.occlusion.push_back(std::move(vis));
        }
    return gt;
}

} // namespace iibr::synthlf
