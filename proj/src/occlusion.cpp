#include "iibr/occlusion.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace iibr {

OcclusionConfig OcclusionConfig::defaults_for(int n_sources)
{
    OcclusionConfig c;
    c.mode = n_sources >= 10 ? Mode::absolute : Mode::relative;
    return c;
}

double OcclusionConfig::threshold(int n_sources) const
{
    if (mode == Mode::absolute) {
        if (!(k > 0.0))
            throw DomainError("occlusion threshold k must be positive");
        return k;
    }
    if (!(ratio > 0.0))
        throw DomainError("occlusion ratio must be positive");
    if (n_sources < 2)
        throw DomainError("relative threshold needs at least two sources");
    return ratio * std::log(static_cast<double>(n_sources));
}

OcclusionMask detect_mask(const ScalarField& entropy, const OcclusionConfig& cfg, int n_sources)
{
    const double t = cfg.threshold(n_sources);
    OcclusionMask m(entropy.rows(), entropy.cols(), 0);
    for (size_t i = 0; i < entropy.size(); ++i)
        m[i] = entropy[i] >= t ? 1 : 0;
    return m;
}

RgbImage naive_inpaint(const RgbImage& img, const OcclusionMask& mask)
{
    if (!(img.rows() == mask.rows() && img.cols() == mask.cols()))
        throw DomainError("mask does not fit the image");
    if (count_set(mask) == 0)
        return img;
    if (count_set(mask) == static_cast<int>(mask.size()))
        throw DomainError("cannot inpaint a fully masked image");

    const int H = img.rows(), W = img.cols();
    RgbImage out = img;
    Mask known(H, W);
    for (size_t i = 0; i < mask.size(); ++i)
        known[i] = mask[i] ? 0 : 1;

    // Each sweep fills the unknown pixels bordering known ones with the mean of
    // their known 4-neighbours, growing the known region one ring at a time.
    const int dy[4] = {-1, 1, 0, 0}, dx[4] = {0, 0, -1, 1};
    std::vector<std::pair<int, int>> ring;
    for (;;) {
        ring.clear();
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                if (known.at(y, x))
                    continue;
                for (int n = 0; n < 4; ++n)
                    if (known.contains(y + dy[n], x + dx[n]) && known.at(y + dy[n], x + dx[n])) {
                        ring.emplace_back(y, x);
                        break;
                    }
            }
        if (ring.empty())
            break;
        for (auto [y, x] : ring) {
            Rgb sum = Rgb::Zero();
            int cnt = 0;
            for (int n = 0; n < 4; ++n)
                if (known.contains(y + dy[n], x + dx[n]) && known.at(y + dy[n], x + dx[n])) {
                    sum += out.at(y + dy[n], x + dx[n]);
                    ++cnt;
                }
            out.at(y, x) = sum / cnt;
        }
        for (auto [y, x] : ring)
            known.at(y, x) = 1;
    }

    RgbImage blurred = out;
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            if (!mask.at(y, x))
                continue;
            Rgb sum = Rgb::Zero();
            int cnt = 0;
            for (int yy = y - 1; yy <= y + 1; ++yy)
                for (int xx = x - 1; xx <= x + 1; ++xx)
                    if (mask.contains(yy, xx) && mask.at(yy, xx)) {
                        sum += out.at(yy, xx);
                        ++cnt;
                    }
            blurred.at(y, x) = sum / cnt;
        }
    return blurred;
}

int update_source_set(SourceRaySet& s, const GridGeometry& g, const RgbImage& view, ViewIndex pose,
                      const DisparityMap& disp, const OcclusionMask& mask, int generation)
{
    if (view.rows() != g.H() || view.cols() != g.W() || mask.rows() != g.H() || mask.cols() != g.W() ||
        disp.values.rows() != g.H() || disp.values.cols() != g.W())
        throw DomainError("view, mask and disparity sizes must match the geometry");
    if (!g.has_view(pose.v, pose.u))
        throw DomainError("view pose outside the grid");
    int added = 0;
    for (int y = 0; y < g.H(); ++y)
        for (int x = 0; x < g.W(); ++x) {
            if (!mask.at(y, x))
                continue;
            SourceRayRecord r;
            r.ray = grid_ray(g, pose.v, pose.u, y, x);
            r.slab = {static_cast<double>(x), static_cast<double>(y), static_cast<double>(pose.u),
                      static_cast<double>(pose.v)};
            r.color = view.at(y, x);
            r.disp_x = r.disp_y = disp.values.at(y, x);
            r.provenance = Provenance::inpainted;
            r.generation = generation;
            if (s.add(r))
                ++added;
        }
    return added;
}

std::vector<ViewIndex> plan_view_order(const GridGeometry& g)
{
    std::vector<ViewIndex> views;
    const ViewIndex c = g.center_view();
    for (int v = 0; v < g.V(); ++v)
        for (int u = 0; u < g.U(); ++u)
            if (!(ViewIndex{v, u} == c))
                views.push_back({v, u});
    auto dist2 = [&](ViewIndex i) {
        double dv = i.v - g.center_v(), du = i.u - g.center_u();
        return dv * dv + du * du;
    };
    std::stable_sort(views.begin(), views.end(), [&](ViewIndex a, ViewIndex b) { return dist2(a) > dist2(b); });
    return views;
}

DisparityMap fill_background_disparity(const DisparityMap& d, const OcclusionMask& mask)
{
    const int H = d.values.rows(), W = d.values.cols();
    DisparityMap out = d;
    for (int y = 0; y < H; ++y) {
        std::vector<double> left(static_cast<size_t>(W), std::numeric_limits<double>::quiet_NaN()), right = left;
        double last = std::numeric_limits<double>::quiet_NaN();
        for (int x = 0; x < W; ++x) {
            if (!mask.at(y, x))
                last = d.values.at(y, x);
            left[static_cast<size_t>(x)] = last;
        }
        last = std::numeric_limits<double>::quiet_NaN();
        for (int x = W - 1; x >= 0; --x) {
            if (!mask.at(y, x))
                last = d.values.at(y, x);
            right[static_cast<size_t>(x)] = last;
        }
        for (int x = 0; x < W; ++x) {
            if (!mask.at(y, x))
                continue;
            double l = left[static_cast<size_t>(x)], r = right[static_cast<size_t>(x)];
            if (std::isnan(l) && std::isnan(r))
                continue; // whole row masked: keep the rendered value
            out.values.at(y, x) = std::isnan(l) ? r : std::isnan(r) ? l : std::min(l, r);
        }
    }
    return out;
}

GeneratedLightField generate_light_field(const RgbImage& input, const DisparityMap& disp, const GridGeometry& g,
                                         const Weighter& weighter, const Inpainter& inpainter,
                                         const GenerateConfig& cfg, const DisparityProvider& provider)
{
    if (cfg.passes < 1)
        throw DomainError("passes must be at least 1");
    const ViewIndex c = g.center_view();
    SourceRaySet sources = SourceRaySet::from_view(g, c, input, disp);
    OcclusionConfig occ = cfg.occlusion_set ? cfg.occlusion : OcclusionConfig::defaults_for(weighter.k_sources());

    GeneratedLightField out;
    out.lf = LightField4D(g);
    out.lf.set_view(c.v, c.u, input);
    const size_t n = static_cast<size_t>(g.view_count());
    out.masks.assign(n, OcclusionMask(g.H(), g.W(), 0));
    out.entropy.assign(n, ScalarField(g.H(), g.W(), 0.0));
    out.disparity.assign(n, ScalarField(g.H(), g.W(), 0.0));
    out.disparity[static_cast<size_t>(c.v) * g.U() + c.u] = disp.values;
    out.order = plan_view_order(g);

    int generation = 0;
    for (int pass = 0; pass < cfg.passes; ++pass)
        for (ViewIndex view : out.order) {
            ++generation;
            RenderResult r = render_view(sources, view, g, weighter, cfg.render);
            OcclusionMask mask = detect_mask(r.entropy, occ, weighter.k_sources());
            if (count_set(mask) == static_cast<int>(mask.size()))
                throw DomainError("view (" + std::to_string(view.v) + ", " + std::to_string(view.u) +
                                  ") is fully occluded");
            RgbImage image = inpainter.fill(r.image, mask);
            DisparityMap d = provider ? provider(view, image, mask, r.disparity)
                                      : fill_background_disparity(DisparityMap{r.disparity}, mask);
            update_source_set(sources, g, image, view, d, mask, generation);

            const size_t i = static_cast<size_t>(view.v) * g.U() + view.u;
            out.lf.set_view(view.v, view.u, std::move(image));
            out.masks[i] = std::move(mask);
            out.entropy[i] = std::move(r.entropy);
            out.disparity[i] = std::move(d.values);
        }
    out.source_count = sources.size();
    return out;
}

} // namespace iibr
