#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "iibr/epi.hpp"
#include "iibr/synthlf.hpp"

namespace iibr::synthlf {
namespace {

std::vector<Layer> RectOverPlane(double fg_d, double bg_d)
{
    Layer bg;
    bg.full = true;
    bg.disparity = bg_d;
    bg.texture = Texture(TextureKind::value_noise, 4, 1);
    Layer fg;
    fg.disparity = fg_d;
    fg.texture = Texture(TextureKind::value_noise, 4, 2);
    fg.shapes.push_back({ShapeKind::rects, 15, 10, 4, 4});
    return {bg, fg};
}

TEST(GenerateScene, SingleLayerIsFullPlane)
{
    SceneSpec s;
    s.layers = 1;
    auto layers = generate_scene(s);
    ASSERT_EQ(layers.size(), 1u);
    EXPECT_TRUE(layers[0].full);
}

TEST(GenerateScene, Deterministic)
{
    SceneSpec s;
    s.seed = 99;
    GridGeometry g(3, 3, 32, 32);
    s.height = s.width = 32;
    auto a = render_ground_truth(generate_scene(s), g);
    auto b = render_ground_truth(generate_scene(s), g);
    EXPECT_TRUE(a.lf == b.lf);
    s.seed = 100;
    auto c = render_ground_truth(generate_scene(s), g);
    EXPECT_FALSE(a.lf == c.lf);
}

TEST(GenerateScene, ThreeDistinctIncreasingDisparities)
{
    SceneSpec s;
    s.layers = 3;
    s.disparity_min = 0;
    s.disparity_max = 2;
    auto layers = generate_scene(s);
    ASSERT_EQ(layers.size(), 3u);
    EXPECT_TRUE(layers[0].full);
    for (size_t i = 1; i < layers.size(); ++i) {
        EXPECT_GT(layers[i].disparity, layers[i - 1].disparity);
        EXPECT_GE(layers[i].disparity, 0.0);
        EXPECT_LE(layers[i].disparity, 2.0);
    }
}

TEST(GenerateScene, RejectsInvalidSpecs)
{
    SceneSpec s;
    s.layers = 0;
    EXPECT_THROW(generate_scene(s), DomainError);
    s.layers = 3;
    s.disparity_min = 0;
    s.disparity_max = 1; // 0, 0.5, 1 round to 0, 1, 1
    EXPECT_THROW(generate_scene(s), DomainError);
}

TEST(GenerateScene, TexturesAreNotFlat)
{
    for (auto kind : {TextureKind::value_noise, TextureKind::stripes, TextureKind::checker})
        for (std::uint64_t seed = 0; seed < 10; ++seed) {
            SceneSpec s;
            s.texture = kind;
            s.seed = seed;
            for (const auto& L : generate_scene(s))
                EXPECT_GT(gradient_energy(L.texture, 64, 64), 1e-5);
        }
}

TEST(RenderGroundTruth, ZeroDisparityViewsIdentical)
{
    auto layers = plane_scene(0.0, TextureKind::value_noise, 6, 3);
    GridGeometry g(3, 3, 16, 16);
    auto gt = render_ground_truth(layers, g);
    for (int v = 0; v < 3; ++v)
        for (int u = 0; u < 3; ++u) {
            EXPECT_TRUE(gt.lf.view(v, u) == gt.lf.center());
            EXPECT_EQ(count_set(gt.occlusion_at({v, u})), 0);
        }
}

TEST(RenderGroundTruth, UnitDisparityShiftsOnePixel)
{
    auto layers = plane_scene(1.0, TextureKind::value_noise, 6, 3);
    GridGeometry g(3, 3, 16, 16);
    auto gt = render_ground_truth(layers, g);
    const auto& c = gt.lf.center();
    const auto& right = gt.lf.view(1, 2);
    const auto& below = gt.lf.view(2, 1);
    for (int y = 0; y < 15; ++y)
        for (int x = 0; x < 15; ++x) {
            EXPECT_TRUE((right.at(y, x + 1) == c.at(y, x)).all());
            EXPECT_TRUE((below.at(y + 1, x) == c.at(y, x)).all());
        }
    // The newly exposed column came from outside the center frame.
    EXPECT_TRUE(gt.occlusion_at({1, 2}).at(5, 0));
    EXPECT_FALSE(gt.occlusion_at({1, 2}).at(5, 1));
}

TEST(RenderGroundTruth, DisocclusionBandWidth)
{
    auto layers = RectOverPlane(2, 0);
    GridGeometry g(1, 5, 21, 40);
    auto gt = render_ground_truth(layers, g);
    // Rect spans x in [11, 19] in the center; at du = +k it spans [11+2k, 19+2k]
    // and exposes background x in [11, 11+2k).
    for (int k = 1; k <= 2; ++k) {
        const Mask& occ = gt.occlusion_at({0, 2 + k});
        for (int x = 5; x < 35; ++x) {
            bool expected = x >= 11 && x < 11 + 2 * k;
            EXPECT_EQ(occ.at(10, x) != 0, expected) << "du " << k << " x " << x;
        }
        EXPECT_EQ(count_set(occ), 2 * k * 9);
        const auto& d = gt.disparity_at({0, 2 + k});
        EXPECT_EQ(d.at(10, 11 + 2 * k), 2.0);
        EXPECT_EQ(d.at(10, 11), 0.0);
    }
}

// With one foreground layer over a full background, a view pixel receives no
// forward-warped source exactly when its surface is hidden from the center.
// With more layers a hidden middle surface can sit in front of a background
// source that does land, so only holes => occluded holds, plus exact colors
// wherever the pixel is visible from the center.
void CheckOcclusionAgainstHoles(int n_layers, bool expect_equal)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        SceneSpec s;
        s.height = s.width = 40;
        s.margin = 6;
        s.seed = seed;
        s.disparity_min = -1;
        s.disparity_max = 2;
        s.layers = n_layers;
        auto layers = generate_scene(s);
        GridGeometry g(1, 7, 40, 40);
        auto gt = render_ground_truth(layers, g);
        const auto& cd = gt.disparity_at(g.center_view());
        for (int y = 0; y < 40; ++y) {
            std::vector<Rgb> row;
            std::vector<double> disp;
            for (int x = 0; x < 40; ++x) {
                row.push_back(gt.lf.center().at(y, x));
                disp.push_back(cd.at(y, x));
            }
            auto [e, holes] = synthesize_epi(row, disp, 7, 3);
            for (int u = 0; u < 7; ++u)
                for (int x = 0; x < 40; ++x) {
                    const bool hole = holes.at(u, x) != 0;
                    const bool occluded = gt.occlusion_at({0, u}).at(y, x) != 0;
                    if (expect_equal)
                        ASSERT_EQ(hole, occluded) << "seed " << seed << " y " << y << " u " << u << " x " << x;
                    else if (hole)
                        ASSERT_TRUE(occluded) << "seed " << seed << " y " << y << " u " << u << " x " << x;
                    if (!occluded)
                        ASSERT_TRUE((e.pixels.at(u, x) == gt.lf.view(0, u).at(y, x)).all());
                }
        }
    }
}

TEST(RenderGroundTruth, OcclusionMatchesSynthesizedHolesTwoLayers) { CheckOcclusionAgainstHoles(2, true); }

TEST(RenderGroundTruth, HolesAreOccludedThreeLayers) { CheckOcclusionAgainstHoles(3, false); }

TEST(RenderGroundTruth, EpiSlopesEqualLayerDisparity)
{
    for (double d : {-1.0, 0.5, 2.0}) {
        auto layers = plane_scene(d, TextureKind::value_noise, 4, 11);
        GridGeometry g(1, 9, 24, 64);
        auto gt = render_ground_truth(layers, g);
        int confident = 0, good = 0;
        for (int y = 2; y < 22; y += 4) {
            auto sl = slopes_from_tensor(structure_tensor(extract_epi(gt.lf, y, 0, EpiAxis::horizontal)));
            for (int a = 0; a < 9; ++a)
                for (int x = 12; x < 52; ++x) {
                    size_t i = static_cast<size_t>(a) * 64 + x;
                    if (sl.coherence[i] > 0.9) {
                        ++confident;
                        good += std::abs(sl.slope[i] - d) <= 0.05;
                    }
                }
        }
        ASSERT_GT(confident, 100);
        EXPECT_GE(good, 0.95 * confident) << d;
    }
}

TEST(VisibleFrom, CenterSeesItself)
{
    auto layers = RectOverPlane(2, 0);
    GridGeometry g(3, 3, 21, 30);
    Mask m = visible_from(layers, g, g.center_view(), g.center_view());
    EXPECT_EQ(count_set(m), 21 * 30);
}

TEST(RenderViewAt, ContinuousOffsetInterpolatesGeometry)
{
    auto layers = plane_scene(1.0, TextureKind::value_noise, 6, 5);
    RgbImage half = render_view_at(layers, 8, 8, 0, 0.5);
    const auto& tex = layers[0].texture;
    for (int x = 0; x < 8; ++x) {
        Rgb expected = tex.at(x - 0.5, 3);
        EXPECT_TRUE((half.at(3, x) == expected).all());
    }
}

} // namespace
} // namespace iibr::synthlf
