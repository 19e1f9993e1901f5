#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "iibr/occlusion.hpp"
#include "iibr/synthlf.hpp"
#include "test_support.hpp"

namespace iibr {
namespace {

// Uniform weights over whatever candidates arrive.
class UniformWeighter : public Weighter {
public:
    int k_sources() const override { return 5; }
    std::vector<WeightVector> weigh(const std::vector<TargetRay>&, const std::vector<std::vector<Candidate>>& cands,
                                    const std::function<const SourceRayRecord&(int)>&) const override
    {
        std::vector<WeightVector> out;
        for (const auto& c : cands) {
            WeightVector w;
            for (const auto& x : c) {
                w.indices.push_back(x.index);
                w.weights.push_back(1.0 / double(c.size()));
            }
            out.push_back(w);
        }
        return out;
    }
};

// Checks the inpainter contract on every call.
class CheckingInpainter : public Inpainter {
public:
    mutable int calls = 0;
    RgbImage fill(const RgbImage& img, const OcclusionMask& mask) const override
    {
        ++calls;
        RgbImage out = naive_inpaint(img, mask);
        for (size_t i = 0; i < img.size(); ++i)
            if (!mask[i])
                EXPECT_TRUE((out[i] == img[i]).all());
        return out;
    }
};

TEST(OcclusionConfig, DefaultsAndThresholds)
{
    OcclusionConfig small = OcclusionConfig::defaults_for(5);
    EXPECT_EQ(small.mode, OcclusionConfig::Mode::relative);
    EXPECT_EQ(small.threshold(5), 0.8 * std::log(5.0));
    EXPECT_NEAR(small.threshold(5), 1.2876, 1e-4);
    OcclusionConfig big = OcclusionConfig::defaults_for(10);
    EXPECT_EQ(big.mode, OcclusionConfig::Mode::absolute);
    EXPECT_EQ(big.threshold(10), 2.3);
    OcclusionConfig bad;
    bad.ratio = 0;
    EXPECT_THROW(bad.threshold(5), DomainError);
    EXPECT_THROW(OcclusionConfig{}.threshold(1), DomainError);
}

TEST(DetectMask, AbsoluteThreshold)
{
    ScalarField e(1, 2);
    e[0] = 1.0;
    e[1] = 2.5;
    OcclusionConfig cfg{OcclusionConfig::Mode::absolute, 2.3, 0.8};
    Mask m = detect_mask(e, cfg, 10);
    EXPECT_FALSE(m[0]);
    EXPECT_TRUE(m[1]);
    EXPECT_EQ(count_set(detect_mask(ScalarField(4, 4, 0.0), cfg, 10)), 0);
}

TEST(DetectMask, BoundaryIsInclusive)
{
    ScalarField e(1, 3);
    e[0] = std::nextafter(2.3, 0.0);
    e[1] = 2.3;
    e[2] = std::nextafter(2.3, 3.0);
    Mask m = detect_mask(e, {OcclusionConfig::Mode::absolute, 2.3, 0.8}, 10);
    EXPECT_FALSE(m[0]);
    EXPECT_TRUE(m[1]);
    EXPECT_TRUE(m[2]);
}

TEST(DetectMask, RelativeFlagsUniformPixel)
{
    ScalarField e(1, 2);
    e[0] = std::log(5.0);
    e[1] = 1.2;
    Mask m = detect_mask(e, OcclusionConfig::defaults_for(5), 5);
    EXPECT_TRUE(m[0]);
    EXPECT_FALSE(m[1]);
}

TEST(NaiveInpaint, EmptyMaskIsIdentity)
{
    RgbImage img = testing::random_image(6, 7, 1);
    EXPECT_TRUE(naive_inpaint(img, Mask(6, 7, 0)) == img);
}

TEST(NaiveInpaint, SingleHoleInConstantRegion)
{
    RgbImage img(9, 9, Rgb(0.3, 0.6, 0.9));
    img.at(4, 4) = Rgb(1, 0, 0);
    Mask m(9, 9, 0);
    m.at(4, 4) = 1;
    RgbImage out = naive_inpaint(img, m);
    EXPECT_LT((out.at(4, 4) - Rgb(0.3, 0.6, 0.9)).abs().maxCoeff(), 1e-12);
}

TEST(NaiveInpaint, StripStaysInHullAndOutsideUntouched)
{
    RgbImage img(8, 12);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 12; ++x)
            img.at(y, x) = x < 6 ? Rgb(1, 0, 0) : Rgb(0, 0, 1);
    Mask m(8, 12, 0);
    for (int y = 0; y < 8; ++y)
        for (int x = 4; x < 8; ++x) {
            m.at(y, x) = 1;
            img.at(y, x) = Rgb(0, 1, 0);
        }
    RgbImage out = naive_inpaint(img, m);
    for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 12; ++x) {
            const Rgb& c = out.at(y, x);
            if (!m.at(y, x)) {
                EXPECT_TRUE((c == img.at(y, x)).all());
                continue;
            }
            EXPECT_NEAR(c[1], 0.0, 1e-12);
            EXPECT_NEAR(c[0] + c[2], 1.0, 1e-12);
            EXPECT_GE(c.minCoeff(), -1e-12);
        }
}

TEST(NaiveInpaint, RandomMasksKeepUnmaskedBitExact)
{
    std::mt19937_64 eng(3);
    for (int t = 0; t < 10; ++t) {
        RgbImage img = testing::random_image(16, 16, 50 + t);
        Mask m(16, 16, 0);
        for (auto& b : m.data())
            b = (eng() % 3) == 0;
        RgbImage out = naive_inpaint(img, m);
        for (size_t i = 0; i < img.size(); ++i) {
            if (!m[i])
                EXPECT_TRUE((out[i] == img[i]).all());
            EXPECT_TRUE(out[i].isFinite().all());
        }
    }
}

TEST(NaiveInpaint, RejectsFullMaskAndShapeMismatch)
{
    RgbImage img(4, 4);
    EXPECT_THROW(naive_inpaint(img, Mask(4, 4, 1)), DomainError);
    EXPECT_THROW(naive_inpaint(img, Mask(4, 5, 0)), DomainError);
}

TEST(UpdateSourceSet, AddsOneRecordPerMaskedPixel)
{
    GridGeometry g(3, 3, 5, 6);
    RgbImage img = testing::random_image(5, 6, 4);
    SourceRaySet s = SourceRaySet::from_view(g, {1, 1}, img, DisparityMap{ScalarField(5, 6, 0.5)});
    auto before = s.records();
    EXPECT_EQ(update_source_set(s, g, img, {0, 2}, DisparityMap{ScalarField(5, 6, 1.0)}, Mask(5, 6, 0), 1), 0);
    EXPECT_EQ(s.size(), before.size());
    Mask m(5, 6, 0);
    m.at(0, 0) = m.at(2, 3) = m.at(4, 5) = 1;
    ScalarField d(5, 6, 1.0);
    d.at(2, 3) = 1.75;
    EXPECT_EQ(update_source_set(s, g, img, {0, 2}, DisparityMap{d}, m, 3), 3);
    ASSERT_EQ(s.size(), before.size() + 3);
    for (size_t i = 0; i < before.size(); ++i)
        EXPECT_EQ(s[i].slab.x, before[i].slab.x);
    const auto& r = s[before.size() + 1];
    EXPECT_EQ(r.provenance, Provenance::inpainted);
    EXPECT_EQ(r.generation, 3);
    EXPECT_EQ(r.disparity(), 1.75);
    EXPECT_EQ(r.slab.u, 2.0);
    EXPECT_EQ(r.slab.v, 0.0);
    PluckerRay expected = grid_ray(g, 0, 2, 2, 3);
    EXPECT_EQ(r.ray.d, expected.d);
    EXPECT_TRUE((r.color == img.at(2, 3)).all());
}

TEST(PlanViewOrder, FarthestFirst)
{
    auto o = plan_view_order(GridGeometry(3, 3, 2, 2));
    ASSERT_EQ(o.size(), 8u);
    std::vector<ViewIndex> expect = {{0, 0}, {0, 2}, {2, 0}, {2, 2}, {0, 1}, {1, 0}, {1, 2}, {2, 1}};
    EXPECT_EQ(o, expect);
    EXPECT_TRUE(plan_view_order(GridGeometry(1, 1, 2, 2)).empty());
    auto n = plan_view_order(GridGeometry(9, 9, 2, 2));
    EXPECT_EQ(n.size(), 80u);
    EXPECT_EQ(n.front(), (ViewIndex{0, 0}));
}

TEST(FillBackgroundDisparity, TakesSmallerNeighbour)
{
    ScalarField d(1, 7, 9.0);
    d[0] = 0.5;
    d[1] = 0.5;
    d[5] = 2.0;
    d[6] = 2.0;
    Mask m(1, 7, 0);
    m[2] = m[3] = m[4] = 1;
    DisparityMap out = fill_background_disparity({d}, m);
    for (int x = 2; x <= 4; ++x)
        EXPECT_EQ(out.values[static_cast<size_t>(x)], 0.5);
    EXPECT_EQ(out.values[5], 2.0);
    Mask edge(1, 7, 0);
    edge[0] = 1;
    EXPECT_EQ(fill_background_disparity({d}, edge).values[0], 0.5);
}

TEST(GenerateLightField, SingleViewGridReturnsInput)
{
    RgbImage img = testing::random_image(6, 6, 8);
    GridGeometry g(1, 1, 6, 6);
    auto res = generate_light_field(img, {ScalarField(6, 6, 1.0)}, g, AnalyticWeighter(), NaiveInpainter());
    EXPECT_TRUE(res.lf.center() == img);
    EXPECT_TRUE(res.order.empty());
}

TEST(GenerateLightField, ZeroDisparityReplicatesInput)
{
    RgbImage img = testing::random_image(10, 10, 9);
    GridGeometry g(3, 3, 10, 10);
    auto res = generate_light_field(img, {ScalarField(10, 10, 0.0)}, g, AnalyticWeighter(), NaiveInpainter());
    EXPECT_TRUE(res.lf.center() == img);
    for (int v = 0; v < 3; ++v)
        for (int u = 0; u < 3; ++u) {
            EXPECT_LT(testing::max_abs_diff(res.lf.view(v, u), img), 1e-4);
            EXPECT_EQ(count_set(res.masks[static_cast<size_t>(v * 3 + u)]), 0);
        }
    EXPECT_EQ(res.source_count, 100u);
}

TEST(GenerateLightField, FullyOccludedViewIsAnError)
{
    RgbImage img = testing::random_image(6, 6, 10);
    GridGeometry g(3, 3, 6, 6);
    EXPECT_THROW(generate_light_field(img, {ScalarField(6, 6, 0.0)}, g, UniformWeighter(), NaiveInpainter()),
                 DomainError);
    GenerateConfig cfg;
    cfg.passes = 0;
    EXPECT_THROW(generate_light_field(img, {ScalarField(6, 6, 0.0)}, g, AnalyticWeighter(), NaiveInpainter(), cfg),
                 DomainError);
}

TEST(GenerateLightField, InpainterNeverTouchesUnmaskedPixels)
{
    synthlf::SceneSpec sp;
    sp.height = sp.width = 32;
    sp.margin = 6;
    sp.seed = 4;
    GridGeometry g(5, 5, 32, 32);
    auto gt = synthlf::render_ground_truth(synthlf::generate_scene(sp), g);
    CheckingInpainter inpainter;
    auto res = generate_light_field(gt.lf.center(), {gt.disparity_at(g.center_view())}, g, AnalyticWeighter(),
                                    inpainter);
    EXPECT_EQ(inpainter.calls, 24);
    size_t masked = 0;
    for (const auto& m : res.masks)
        masked += static_cast<size_t>(count_set(m));
    EXPECT_EQ(res.source_count, 32u * 32u + masked);
}

TEST(GenerateLightField, SecondPassAddsGenerations)
{
    synthlf::SceneSpec sp;
    sp.height = sp.width = 24;
    sp.margin = 5;
    sp.seed = 6;
    GridGeometry g(3, 3, 24, 24);
    auto gt = synthlf::render_ground_truth(synthlf::generate_scene(sp), g);
    GenerateConfig two;
    two.passes = 2;
    auto a = generate_light_field(gt.lf.center(), {gt.disparity_at(g.center_view())}, g, AnalyticWeighter(),
                                  NaiveInpainter());
    auto b = generate_light_field(gt.lf.center(), {gt.disparity_at(g.center_view())}, g, AnalyticWeighter(),
                                  NaiveInpainter(), two);
    EXPECT_GE(b.source_count, a.source_count);
}

TEST(GenerateLightField, MaskedCountTrendsDownAlongSweep)
{
    // Per scene: least-squares slope of masked-pixel count against sweep index.
    std::vector<double> slopes;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        synthlf::SceneSpec sp;
        sp.height = sp.width = 32;
        sp.margin = 6;
        sp.seed = seed;
        GridGeometry g(5, 5, 32, 32);
        auto gt = synthlf::render_ground_truth(synthlf::generate_scene(sp), g);
        auto res = generate_light_field(gt.lf.center(), {gt.disparity_at(g.center_view())}, g, AnalyticWeighter(),
                                        NaiveInpainter());
        const double n = double(res.order.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (size_t i = 0; i < res.order.size(); ++i) {
            double c = count_set(res.masks[static_cast<size_t>(res.order[i].v * 5 + res.order[i].u)]);
            sx += double(i);
            sy += c;
            sxx += double(i) * double(i);
            sxy += double(i) * c;
        }
        slopes.push_back((n * sxy - sx * sy) / (n * sxx - sx * sx));
    }
    std::nth_element(slopes.begin(), slopes.begin() + 10, slopes.end());
    EXPECT_LE(slopes[10], 0.0);
}

} // namespace
} // namespace iibr
