#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "iibr/synthlf.hpp"
#include "iibr/training.hpp"

namespace iibr {
namespace {

struct SmallScene {
    synthlf::GroundTruth gt;
    std::unique_ptr<TrainScene> scene;

    explicit SmallScene(std::uint64_t seed, int size = 24)
    {
        synthlf::SceneSpec sp;
        sp.height = sp.width = size;
        sp.margin = 4;
        sp.feature_size = 4;
        sp.disparity_max = 1;
        sp.seed = seed;
        GridGeometry g(3, 5, size, size);
        gt = synthlf::render_ground_truth(synthlf::generate_scene(sp), g);
        scene = std::make_unique<TrainScene>(gt.lf, DisparityMap{gt.disparity_at(g.center_view())}, 5, gt.occlusion);
    }
};

RayTransformerParams SpreadParams(const AttentionConfig& cfg, std::uint64_t seed)
{
    RayTransformerParams p(cfg);
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> nd;
    for (auto& t : p.tensors()) {
        bool gain = t.name.find("gain") != std::string::npos;
        bool vec = t.value.rows() == 1;
        for (Eigen::Index i = 0; i < t.value.size(); ++i) {
            double z = nd(eng);
            t.value.data()[i] = gain ? 1.0 + 0.1 * z : vec ? 0.1 * z : z / std::sqrt(double(t.value.rows()));
        }
    }
    p.round_to_float();
    return p;
}

double MaxAbs(const RayTransformerParams& p)
{
    double m = 0;
    for (const auto& t : p.tensors())
        m = std::max(m, t.value.cwiseAbs().maxCoeff());
    return m;
}

TEST(Losses, ColorReferenceValues)
{
    EXPECT_EQ(loss_color(Rgb(0.3, 0.2, 0.1), Rgb(0.3, 0.2, 0.1)), 0.0);
    EXPECT_DOUBLE_EQ(loss_color(Rgb(1, 1, 1), Rgb(0, 0, 0)), 3.0);
    EXPECT_DOUBLE_EQ(loss_color(Rgb(0.5, 0, 0), Rgb(0, 0, 0)), 0.25);
}

TEST(Losses, EntropyReferenceValues)
{
    EXPECT_NEAR(loss_entropy({std::vector<double>(5, 0.2), {}}), std::log(5.0), 1e-12);
    EXPECT_EQ(loss_entropy({{1, 0, 0, 0, 0}, {}}), 0.0);
    EXPECT_NEAR(loss_entropy({{0.5, 0.5, 0, 0, 0}, {}}), std::log(2.0), 1e-12);
}

TEST(Losses, WeightedTotal)
{
    LossWeights lw;
    EXPECT_EQ(LossComponents{}.total(lw), 0.0);
    LossComponents c{0.01, std::log(5.0), 0.0};
    EXPECT_NEAR(c.total(lw), 2.6094, 1e-4);
    lw.lambda_c = -1;
    EXPECT_THROW(lw.validate(), DomainError);
}

TEST(TotalLoss, EpiOnlyBatchDecomposes)
{
    SmallScene s(1);
    FitConfig fc;
    fc.net = {8, 2, 1, 5};
    fc.rays = 0;
    fc.strips = 1;
    fc.strip_width = 8;
    std::uint64_t rng = 3;
    TrainBatch b = sample_batch(*s.scene, fc, rng);
    auto p = SpreadParams(fc.net, 2);
    LossWeights lw;
    LossResult r = total_loss(b, p, lw);
    EXPECT_EQ(r.components.color, 0.0);
    EXPECT_EQ(r.components.entropy, 0.0);

    // Render the strip by hand and compare against the structure loss directly.
    const EpiStrip& st = b.strips[0];
    ScalarField l(st.angular, st.spatial);
    for (size_t i = 0; i < st.rays.size(); ++i) {
        std::vector<RayEmbedding> set;
        for (const auto& c : st.rays[i].candidates)
            set.push_back(embed_ray(st.rays[i].target.ray, s.scene->sources()[static_cast<size_t>(c.index)]));
        auto w = transformer_weights(p, set);
        Rgb c = Rgb::Zero();
        for (size_t a = 0; a < w.size(); ++a)
            c += w[a] * s.scene->sources()[static_cast<size_t>(st.rays[i].candidates[a].index)].color;
        l[i] = luma(c);
    }
    double direct = epi_structure_loss(l, st.reference, b.tensor, nullptr);
    EXPECT_NEAR(r.total, lw.lambda_epi * direct, 1e-12);
    EXPECT_GT(direct, 0.0);
}

TEST(TotalLoss, InvariantToCandidateOrder)
{
    SmallScene s(2);
    FitConfig fc;
    fc.net = {8, 2, 2, 5};
    fc.rays = 8;
    fc.strips = 1;
    fc.strip_width = 8;
    std::uint64_t rng = 5;
    TrainBatch b = sample_batch(*s.scene, fc, rng);
    auto p = SpreadParams(fc.net, 3);
    LossResult a = total_loss(b, p, {});
    std::mt19937_64 eng(1);
    for (auto& r : b.rays)
        std::shuffle(r.candidates.begin(), r.candidates.end(), eng);
    for (auto& st : b.strips)
        for (auto& r : st.rays)
            std::shuffle(r.candidates.begin(), r.candidates.end(), eng);
    LossResult c = total_loss(b, p, {});
    EXPECT_NEAR(a.total, c.total, 1e-12);
    EXPECT_NEAR(a.components.epi, c.components.epi, 1e-12);
}

TEST(Backward, ZeroLambdasGiveZeroGradients)
{
    SmallScene s(3);
    FitConfig fc;
    fc.net = {8, 2, 1, 5};
    fc.rays = 6;
    fc.strip_width = 8;
    std::uint64_t rng = 7;
    TrainBatch b = sample_batch(*s.scene, fc, rng);
    RayTransformerParams g;
    backward(b, SpreadParams(fc.net, 4), {0, 0, 0}, g);
    EXPECT_EQ(MaxAbs(g), 0.0);
}

TEST(Backward, SingletonSourceHasNoGradient)
{
    SmallScene s(4);
    FitConfig fc;
    fc.net = {8, 2, 1, 5};
    fc.rays = 6;
    fc.strips = 0;
    std::uint64_t rng = 9;
    TrainBatch b = sample_batch(*s.scene, fc, rng);
    for (auto& r : b.rays)
        r.candidates.resize(1);
    RayTransformerParams g;
    LossResult r = backward(b, SpreadParams(fc.net, 5), {}, g);
    EXPECT_EQ(r.components.entropy, 0.0);
    EXPECT_LT(MaxAbs(g), 1e-12);
}

TEST(Backward, MatchesFiniteDifferencesBlockwise)
{
    SmallScene s(5);
    FitConfig fc;
    fc.net = {8, 2, 2, 5};
    fc.rays = 6;
    fc.strip_width = 8;
    std::uint64_t rng = 11;
    TrainBatch b = sample_batch(*s.scene, fc, rng);
    auto p = SpreadParams(fc.net, 6);
    LossWeights lw;
    RayTransformerParams ga;
    backward(b, p, lw, ga);
    RayTransformerParams gf = finite_difference_gradient(b, p, lw, 1e-3);
    for (size_t t = 0; t < ga.tensors().size(); ++t) {
        const auto& a = ga.tensors()[t].value;
        const auto& f = gf.tensors()[t].value;
        double scale = std::max(a.norm(), f.norm());
        if (scale < 1e-8)
            EXPECT_LT((a - f).norm(), 1e-8) << ga.tensors()[t].name;
        else
            EXPECT_LE((a - f).norm() / scale, 1e-4) << ga.tensors()[t].name;
    }
}

TEST(Backward, Deterministic)
{
    SmallScene s(6);
    FitConfig fc;
    fc.net = {8, 2, 1, 5};
    fc.strip_width = 8;
    std::uint64_t rng = 13;
    TrainBatch b = sample_batch(*s.scene, fc, rng);
    auto p = SpreadParams(fc.net, 7);
    RayTransformerParams g1, g2;
    backward(b, p, {}, g1);
    backward(b, p, {}, g2);
    EXPECT_TRUE(g1 == g2);
}

TEST(Adam, ZeroGradientLeavesParams)
{
    auto p = RayTransformerParams::initialize({8, 2, 1, 5}, 1);
    auto before = p;
    OptimizerState st(p);
    adam_step(st, p, RayTransformerParams(p.config()));
    EXPECT_TRUE(p == before);
    EXPECT_EQ(st.step, 1);
}

TEST(Adam, FirstStepIsSignedLearningRate)
{
    AttentionConfig cfg{8, 2, 1, 5};
    RayTransformerParams p(cfg);
    RayTransformerParams g = SpreadParams(cfg, 8);
    OptimizerState st(p);
    adam_step(st, p, g);
    const double lr = st.cfg.lr;
    for (size_t t = 0; t < p.tensors().size(); ++t)
        for (Eigen::Index i = 0; i < p.tensors()[t].value.size(); ++i) {
            double gi = g.tensors()[t].value.data()[i];
            double d = p.tensors()[t].value.data()[i];
            double lo = lr * std::abs(gi) / (std::abs(gi) + st.cfg.eps);
            EXPECT_GE(std::abs(d), lo - 1e-11);
            EXPECT_LE(std::abs(d), lr + 1e-11);
            if (gi != 0.0)
                EXPECT_EQ(std::signbit(d), !std::signbit(gi));
        }
}

TEST(Adam, RepeatedGradientDoesNotGrowStep)
{
    AttentionConfig cfg{8, 2, 1, 5};
    RayTransformerParams p(cfg);
    RayTransformerParams g = SpreadParams(cfg, 9);
    OptimizerState st(p);
    adam_step(st, p, g);
    RayTransformerParams after1 = p;
    adam_step(st, p, g);
    for (size_t t = 0; t < p.tensors().size(); ++t)
        for (Eigen::Index i = 0; i < p.tensors()[t].value.size(); ++i) {
            double d1 = std::abs(after1.tensors()[t].value.data()[i]);
            double d2 = std::abs(p.tensors()[t].value.data()[i] - after1.tensors()[t].value.data()[i]);
            EXPECT_LE(d2, d1 + 1e-9);
        }
}

TEST(Adam, RejectsShapeMismatch)
{
    RayTransformerParams p({8, 2, 1, 5});
    OptimizerState st(p);
    EXPECT_THROW(adam_step(st, p, RayTransformerParams({8, 2, 2, 5})), DomainError);
}

TEST(ClipGlobalNorm, ScalesOnlyAboveThreshold)
{
    AttentionConfig cfg{8, 2, 1, 5};
    RayTransformerParams g = SpreadParams(cfg, 10);
    double n = clip_global_norm(g, 1.0);
    EXPECT_GT(n, 1.0);
    double sq = 0;
    for (const auto& t : g.tensors())
        sq += t.value.squaredNorm();
    EXPECT_NEAR(std::sqrt(sq), 1.0, 1e-12);
    RayTransformerParams h = g;
    clip_global_norm(h, 5.0);
    EXPECT_TRUE(h == g);
}

TEST(Fit, ZeroIterationsReturnsInitialParams)
{
    SmallScene s(7);
    FitConfig fc;
    fc.net = {8, 2, 1, 5};
    fc.iterations = 0;
    FitResult r = fit({s.scene.get()}, fc);
    EXPECT_TRUE(r.params == RayTransformerParams::initialize(fc.net, fc.seed));
    EXPECT_TRUE(r.log.entries.empty());
}

TEST(Fit, SameSeedIsBitIdentical)
{
    SmallScene s(8);
    FitConfig fc;
    fc.net = {8, 2, 1, 5};
    fc.iterations = 30;
    fc.rays = 8;
    fc.strip_width = 8;
    FitResult a = fit({s.scene.get()}, fc);
    FitResult b = fit({s.scene.get()}, fc);
    EXPECT_TRUE(a.params == b.params);
    EXPECT_EQ(a.log.csv(), b.log.csv());
    fc.seed = 43;
    FitResult c = fit({s.scene.get()}, fc);
    EXPECT_FALSE(a.params == c.params);
}

TEST(Fit, RejectsInvalidConfigs)
{
    SmallScene s(9);
    FitConfig fc;
    fc.net = {8, 2, 1, 5};
    fc.rays = 0;
    fc.strips = 0;
    EXPECT_THROW(fit({s.scene.get()}, fc), DomainError);
    fc.rays = 4;
    fc.net.k_sources = 3;
    EXPECT_THROW(fit({s.scene.get()}, fc), DomainError);
    fc.net.k_sources = 5;
    EXPECT_THROW(fit({}, fc), DomainError);
}

TEST(Fit, DivergenceCarriesTheLog)
{
    SmallScene s(10);
    FitConfig fc;
    fc.net = {8, 2, 1, 5};
    fc.iterations = 5;
    fc.rays = 4;
    fc.strips = 0;
    fc.loss.lambda_c = std::numeric_limits<double>::infinity();
    try {
        fit({s.scene.get()}, fc);
        FAIL() << "expected DivergenceError";
    } catch (const DivergenceError& e) {
        EXPECT_NE(std::string(e.what()).find("iteration 0"), std::string::npos);
        EXPECT_TRUE(e.log.entries.empty());
    }
}

TEST(TrainLog, CsvLayout)
{
    TrainLog log;
    TrainLogEntry e;
    e.iteration = 3;
    e.total = 0.5;
    e.components = {0.25, 0.125, 1.0};
    e.seconds = 2.5;
    log.entries.push_back(e);
    EXPECT_EQ(log.csv(), "iteration,total,color,entropy,epi\n3,0.5,0.25,0.125,1\n");
    EXPECT_EQ(log.csv(true), "iteration,total,color,entropy,epi,seconds\n3,0.5,0.25,0.125,1,2.500000\n");
}

TEST(Fit, EntropyWeightTrend)
{
    // Mean entropy on non-occluded training rays falls as lambda_w grows.
    SmallScene s(11, 20);
    std::vector<double> mean_entropy;
    for (double lw : {0.0, 1.0, 10.0}) {
        FitConfig fc;
        fc.net = {8, 2, 1, 5};
        fc.iterations = 300;
        fc.rays = 16;
        fc.strips = 0;
        fc.adam.lr = 3e-3;
        fc.loss.lambda_w = lw;
        FitResult r = fit({s.scene.get()}, fc);
        const GridGeometry& g = s.gt.lf.geometry();
        double sum = 0;
        int n = 0;
        for (int v = 0; v < g.V(); ++v)
            for (int u = 0; u < g.U(); ++u)
                for (int y = 0; y < g.H(); y += 2)
                    for (int x = 0; x < g.W(); x += 2) {
                        TrainRay ray = s.scene->ray({v, u}, y, x);
                        if (ray.occluded)
                            continue;
                        std::vector<RayEmbedding> set;
                        for (const auto& c : ray.candidates)
                            set.push_back(embed_ray(ray.target.ray, s.scene->sources()[static_cast<size_t>(c.index)]));
                        sum += entropy(transformer_weights(r.params, set));
                        ++n;
                    }
        mean_entropy.push_back(sum / n);
    }
    EXPECT_GT(mean_entropy[0], mean_entropy[1]);
    EXPECT_GT(mean_entropy[1], mean_entropy[2]);
}

} // namespace
} // namespace iibr
