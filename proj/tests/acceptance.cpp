// Acceptance harness: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <string>

#include "iibr/disparity.hpp"
#include "iibr/epi.hpp"
#include "iibr/io.hpp"
#include "iibr/occlusion.hpp"
#include "iibr/photo_fx.hpp"
#include "iibr/synthlf.hpp"
#include "iibr/training.hpp"
#include "test_support.hpp"

using namespace iibr;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double psnr_of(double se, long n) { return n > 0 && se > 0 ? 10 * std::log10(double(n) / se) : 99.0; }

struct Outcome {
    bool pass = false;
    std::string detail;
};

Outcome make(bool pass, const char* fmt, ...) __attribute__((format(printf, 2, 3)));
Outcome make(bool pass, const char* fmt, ...)
{
    char buf[512];
    va_list ap;
    va_start(ap, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, ap);
    va_end(ap);
    return {pass, buf};
}

synthlf::SceneSpec epi_scene(std::uint64_t seed)
{
    synthlf::SceneSpec sp;
    sp.layers = 2;
    sp.disparity_min = -1;
    sp.disparity_max = 1;
    sp.height = sp.width = 64;
    sp.margin = 8;
    sp.seed = seed;
    return sp;
}

// ---- A1: extracted EPIs equal forward-warped center rows

Outcome a1()
{
    double worst = 0, slowest = 0;
    long compared = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto t0 = Clock::now();
        auto gt = synthlf::render_ground_truth(synthlf::generate_scene(epi_scene(seed)), GridGeometry(9, 9, 64, 64));
        const auto& g = gt.lf.geometry();
        const ViewIndex c = g.center_view();
        const RgbImage& center = gt.lf.center();
        const ScalarField& disp = gt.disparity_at(c);
        for (auto axis : {EpiAxis::horizontal, EpiAxis::vertical}) {
            const bool h = axis == EpiAxis::horizontal;
            const int lines = h ? g.H() : g.W(), len = h ? g.W() : g.H();
            for (int s = 0; s < lines; ++s) {
                std::vector<Rgb> row(static_cast<size_t>(len));
                std::vector<double> d(static_cast<size_t>(len));
                for (int i = 0; i < len; ++i) {
                    row[static_cast<size_t>(i)] = h ? center.at(s, i) : center.at(i, s);
                    d[static_cast<size_t>(i)] = h ? disp.at(s, i) : disp.at(i, s);
                }
                auto [syn, holes] = synthesize_epi(row, d, h ? g.U() : g.V(), h ? c.u : c.v, axis);
                Epi ext = extract_epi(gt.lf, s, h ? c.v : c.u, axis);
                for (size_t i = 0; i < ext.pixels.size(); ++i)
                    if (!holes[i]) {
                        worst = std::max(worst, (ext.pixels[i] - syn.pixels[i]).abs().maxCoeff());
                        ++compared;
                    }
            }
        }
        slowest = std::max(slowest, seconds_since(t0));
    }
    return make(worst <= 1.0 / 255 && slowest < 1.0 && compared > 0,
                "20 scenes, %ld EPI pixels, max error %.3g (<= %.3g), slowest scene %.3fs (< 1s)", compared, worst,
                1.0 / 255, slowest);
}

// ---- A2: slope recovery and calibration

Outcome a2()
{
    long confident = 0, good = 0;
    double worst_cal = 0;
    std::mt19937_64 eng(2024);
    std::uniform_real_distribution<double> ua(-4, 4), ub(-10, 10);
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto gt = synthlf::render_ground_truth(synthlf::generate_scene(epi_scene(seed)), GridGeometry(9, 9, 64, 64));
        const ScalarField& d = gt.disparity_at(gt.lf.geometry().center_view());
        for (auto axis : {EpiAxis::horizontal, EpiAxis::vertical}) {
            SlopeField s = center_view_slopes(gt.lf, {}, axis);
            for (size_t i = 0; i < d.size(); ++i)
                if (s.coherence[i] > 0.9) {
                    ++confident;
                    good += std::abs(s.slope[i] - d[i]) <= 0.05;
                }
        }
        SlopeField exact{d, ScalarField(d.rows(), d.cols(), 1.0)};
        double a = ua(eng), b = ub(eng);
        if (std::abs(a) < 0.1)
            a = 0.1;
        ScalarField f = d;
        for (auto& v : f.data())
            v = a * v + b;
        CalibrationFit fit = calibrate({f}, exact);
        worst_cal = std::max({worst_cal, std::abs(fit.calibration.alpha - 1 / a),
                              std::abs(fit.calibration.beta + b / a)});
    }
    double frac = confident ? double(good) / double(confident) : 0.0;
    return make(frac >= 0.95 && worst_cal <= 1e-9,
                "%.2f%% of %ld confident pixels within 0.05 px/view (>= 95%%), calibration error %.3g (<= 1e-9)",
                100 * frac, confident, worst_cal);
}

// ---- A3: oracle rendering with analytic weights and GT disparity

Outcome a3()
{
    synthlf::SceneSpec sp;
    sp.height = sp.width = 128;
    sp.margin = 10;
    sp.seed = 1;
    auto layers = synthlf::generate_scene(sp);
    GridGeometry g(9, 9, 128, 128);
    auto gt = synthlf::render_ground_truth(layers, g);
    auto t0 = Clock::now();
    AnalyticWeighter w({}, 5);
    NaiveInpainter inp;
    DisparityProvider gt_disp = [&](ViewIndex v, const RgbImage&, const Mask&, const ScalarField&) {
        return DisparityMap{gt.disparity_at(v)};
    };
    auto res = generate_light_field(gt.lf.center(), DisparityMap{gt.disparity_at(g.center_view())}, g, w, inp, {},
                                    gt_disp);
    double secs = seconds_since(t0);

    // Analytic disocclusions: pixels whose surface point no view generated so far
    // (the center and every earlier view in the order) could see.
    double se = 0;
    long n = 0, inter = 0, uni = 0;
    std::vector<ViewIndex> done = {g.center_view()};
    for (ViewIndex v : res.order) {
        const RgbImage& pred = res.lf.view(v);
        const RgbImage& ref = gt.lf.view(v);
        const Mask& occ = gt.occlusion_at(v);
        for (size_t i = 0; i < pred.size(); ++i)
            if (!occ[i]) {
                se += (pred[i] - ref[i]).square().sum() / 3;
                ++n;
            }
        Mask seen(g.H(), g.W(), 0);
        for (ViewIndex d : done) {
            Mask m = synthlf::visible_from(layers, g, d, v);
            for (size_t i = 0; i < m.size(); ++i)
                seen[i] |= m[i];
        }
        const Mask& pm = res.masks[static_cast<size_t>(v.v) * g.U() + v.u];
        for (size_t i = 0; i < pm.size(); ++i) {
            bool a = pm[i], b = !seen[i];
            inter += a && b;
            uni += a || b;
        }
        done.push_back(v);
    }
    double p = psnr_of(se, n);
    double iou = uni ? double(inter) / double(uni) : 1.0;
    return make(p >= 40 && iou >= 0.7 && secs < 60, "masked PSNR %.2f dB (>= 40), mask IoU %.4f (>= 0.7), %.2fs (< 60s)",
                p, iou, secs);
}

// ---- A4: reverse-mode gradient vs central differences

RayTransformerParams spread_params(const AttentionConfig& cfg, std::uint64_t seed)
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

Outcome a4()
{
    synthlf::SceneSpec sp;
    sp.height = sp.width = 24;
    sp.margin = 4;
    sp.feature_size = 6;
    sp.disparity_max = 1;
    sp.seed = 3;
    GridGeometry g(3, 5, 24, 24);
    auto gt = synthlf::render_ground_truth(synthlf::generate_scene(sp), g);
    const AttentionConfig net{8, 2, 2, 5};
    TrainScene scene(gt.lf, DisparityMap{gt.disparity_at(g.center_view())}, net.k_sources, gt.occlusion);
    const LossWeights lw{100, 1, 0.1};
    double worst = 0;
    std::string where;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        FitConfig fc;
        fc.net = net;
        fc.rays = 6;
        fc.strip_width = 8;
        std::uint64_t rng = seed * 77 + 1;
        TrainBatch b = sample_batch(scene, fc, rng);
        RayTransformerParams p = spread_params(net, seed);
        RayTransformerParams ga(net);
        backward(b, p, lw, ga);
        RayTransformerParams gf = finite_difference_gradient(b, p, lw, 1e-3);
        for (size_t t = 0; t < ga.tensors().size(); ++t) {
            const auto& a = ga.tensors()[t].value;
            const auto& f = gf.tensors()[t].value;
            double scale = std::max(a.norm(), f.norm());
            double err = scale < 1e-10 ? (a - f).norm() : (a - f).norm() / scale;
            if (err > worst) {
                worst = err;
                where = ga.tensors()[t].name + " seed " + std::to_string(seed);
            }
        }
    }
    return make(worst <= 1e-4, "10 seeds, max relative error %.3g in %s (<= 1e-4)", worst, where.c_str());
}

// ---- A5: overfitting one scene

double center_strip_psnr(const synthlf::GroundTruth& gt, const RayTransformerParams& p)
{
    const auto& g = gt.lf.geometry();
    const ViewIndex c = g.center_view();
    auto src = SourceRaySet::from_view(g, c, gt.lf.center(), DisparityMap{gt.disparity_at(c)});
    LearnedWeighter w(p);
    double se = 0;
    long n = 0;
    for (int u = 0; u < g.U(); ++u) {
        ViewIndex vi{c.v, u};
        if (vi == c)
            continue;
        RenderResult r = render_view(src, vi, g, w);
        const Mask& occ = gt.occlusion_at(vi);
        for (size_t i = 0; i < r.image.size(); ++i)
            if (!occ[i]) {
                se += (r.image[i] - gt.lf.view(vi)[i]).square().sum() / 3;
                ++n;
            }
    }
    return psnr_of(se, n);
}

Outcome a5()
{
    synthlf::SceneSpec sp;
    sp.height = sp.width = 64;
    sp.seed = 42;
    sp.feature_size = 4;
    GridGeometry g(5, 5, 64, 64);
    auto gt = synthlf::render_ground_truth(synthlf::generate_scene(sp), g);
    TrainScene scene(gt.lf, DisparityMap{gt.disparity_at(g.center_view())}, 5, gt.occlusion);
    FitConfig fc; // 5000 iterations, Adam 1e-4 / (0.9, 0.99), one scene per batch, k = 5
    FitResult runs[2];
    double secs[2] = {0, 0};
    for (int i = 0; i < 2; ++i) {
        auto t0 = Clock::now();
        runs[i] = fit({&scene}, fc);
        secs[i] = seconds_since(t0);
    }
    std::string ck0 = io::encode_checkpoint({runs[0].params, fc.seed, fc.iterations});
    std::string ck1 = io::encode_checkpoint({runs[1].params, fc.seed, fc.iterations});
    double p = center_strip_psnr(gt, runs[0].params);
    // The untrained network is already close to the bar, so also require that training helped.
    double p0 = center_strip_psnr(gt, RayTransformerParams::initialize(fc.net, fc.seed));
    double slowest = std::max(secs[0], secs[1]);
    return make(p >= 30 && p > p0 && ck0 == ck1 && slowest < 600,
                "center-strip PSNR %.2f dB (>= 30, untrained %.2f), checkpoints %s (%zu bytes), slowest run %.1fs "
                "(< 600s)",
                p, p0, ck0 == ck1 ? "bit-identical" : "DIFFER", ck0.size(), slowest);
}

// ---- A6: entropy and threshold identities

Outcome a6()
{
    double e5 = entropy(std::vector<double>(5, 0.2));
    bool ok = std::abs(e5 - std::log(5.0)) <= 1e-6;

    std::vector<double> values = {0.0,
                                  1.0,
                                  std::nextafter(2.3, 0.0),
                                  2.3,
                                  std::nextafter(2.3, 10.0),
                                  2.5,
                                  std::log(16.0),
                                  std::numeric_limits<double>::infinity()};
    ScalarField e(1, static_cast<int>(values.size()));
    for (size_t i = 0; i < values.size(); ++i)
        e[i] = values[i];
    OcclusionConfig abs_cfg;
    abs_cfg.mode = OcclusionConfig::Mode::absolute;
    abs_cfg.k = 2.3;
    Mask m = detect_mask(e, abs_cfg, 5);
    int mismatches = 0;
    for (size_t i = 0; i < values.size(); ++i)
        mismatches += (m[i] != 0) != (values[i] >= 2.3);
    ok = ok && mismatches == 0;

    int rel_bad = 0;
    OcclusionConfig rel;
    rel.mode = OcclusionConfig::Mode::relative;
    for (double ratio : {0.5, 0.8, 0.95})
        for (int n : {2, 5, 9, 16}) {
            rel.ratio = ratio;
            rel_bad += rel.threshold(n) != ratio * std::log(double(n));
        }
    ok = ok && rel_bad == 0;
    bool defaults = OcclusionConfig::defaults_for(10).threshold(10) == 2.3 &&
                    OcclusionConfig::defaults_for(5).threshold(5) == 0.8 * std::log(5.0);
    ok = ok && defaults;
    return make(ok, "H(uniform-5) - ln 5 = %.3g, %d absolute-mask mismatches, %d relative-threshold mismatches, defaults %s",
                e5 - std::log(5.0), mismatches, rel_bad, defaults ? "ok" : "wrong");
}

// ---- A7: refocus physics

Outcome a7()
{
    bool ok = true;
    double worst = 0;
    int peak_misses = 0;
    bool identity = true;
    for (double d : {-1.0, 1.0, 2.0}) {
        auto gt = synthlf::render_ground_truth(synthlf::plane_scene(d, synthlf::TextureKind::value_noise, 4, 3),
                                               GridGeometry(5, 5, 48, 48));
        const auto& lf = gt.lf;
        const auto ap = ApertureSpec::full(lf.geometry());
        const int border = int(std::ceil(2 * std::abs(d)));
        RgbImage focused = refocus(lf, d, ap);
        for (int y = border; y < 48 - border; ++y)
            for (int x = border; x < 48 - border; ++x)
                worst = std::max(worst, (focused.at(y, x) - lf.center().at(y, x)).abs().maxCoeff());
        const int eb = int(std::ceil(2 * (std::abs(d) + 2)));
        double best = -1, best_df = 0;
        for (double df = d - 2; df <= d + 2 + 1e-9; df += 0.5) {
            double e = gradient_energy(refocus(lf, df, ap), eb);
            if (e > best) {
                best = e;
                best_df = df;
            }
        }
        peak_misses += best_df != d;
        for (double df : {0.0, d, 3.5})
            identity = identity && refocus(lf, df, ApertureSpec::single({1, 3})) == lf.view(1, 3);
    }
    ok = worst <= 1.0 / 255 && peak_misses == 0 && identity;
    return make(ok, "in-focus max error %.3g (<= %.3g), sweep peak misses %d, single-view identity %s", worst,
                1.0 / 255, peak_misses, identity ? "exact" : "BROKEN");
}

// ---- A8: recast inpainted pixels reappear at their correspondences

Outcome a8()
{
    long checked = 0, direct = 0, covered = 0, failures = 0;
    double worst_hit_weight = 1.0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        synthlf::SceneSpec sp;
        sp.height = sp.width = 48;
        sp.seed = seed;
        GridGeometry g(5, 5, 48, 48);
        auto gt = synthlf::render_ground_truth(synthlf::generate_scene(sp), g);
        const ViewIndex c = g.center_view();
        SourceRaySet sources = SourceRaySet::from_view(g, c, gt.lf.center(), DisparityMap{gt.disparity_at(c)});
        AnalyticWeighter w({}, 5);
        const OcclusionConfig occ = OcclusionConfig::defaults_for(w.k_sources());
        int generation = 0;
        for (ViewIndex view : plan_view_order(g)) {
            RenderResult r = render_view(sources, view, g, w);
            // Every inpainted record cast so far must show up at its correspondence in this view.
            for (size_t i = 0; i < sources.size(); ++i) {
                const SourceRayRecord& rec = sources[i];
                if (rec.provenance != Provenance::inpainted)
                    continue;
                CorrespondenceSet cx = correspondence_set(rec.slab.x, rec.slab.u, rec.disp_x, {double(view.u)});
                CorrespondenceSet cy = correspondence_set(rec.slab.y, rec.slab.v, rec.disp_y, {double(view.v)});
                const int px = int(std::lround(cx[0].x)), py = int(std::lround(cy[0].x));
                if (!r.image.contains(py, px))
                    continue;
                ++checked;
                const LightSlabCoord t{double(px), double(py), double(view.u), double(view.v)};
                const WeightVector& wv = r.weights[static_cast<size_t>(py) * g.W() + px];
                double hit_weight = 0;
                bool self = false, occluder = false;
                for (size_t j = 0; j < wv.indices.size(); ++j) {
                    const SourceRayRecord& o = sources[static_cast<size_t>(wv.indices[j])];
                    if (reprojection_distance(o, t) > 0.5)
                        continue;
                    hit_weight += wv.weights[j];
                    if (static_cast<size_t>(wv.indices[j]) == i)
                        self = true;
                    else if (o.disparity() >= rec.disparity() - 1e-9)
                        occluder = true; // a surface in front of it, or a duplicate of the same point
                }
                worst_hit_weight = std::min(worst_hit_weight, hit_weight);
                direct += self;
                covered += !self && occluder;
                failures += !(self || occluder) || hit_weight < 0.99;
            }
            ++generation;
            OcclusionMask mask = detect_mask(r.entropy, occ, w.k_sources());
            RgbImage image = naive_inpaint(r.image, mask);
            DisparityMap d = fill_background_disparity(DisparityMap{r.disparity}, mask);
            update_source_set(sources, g, image, view, d, mask, generation);
        }
    }
    return make(failures == 0 && checked > 0,
                "20 scenes, %ld recast checks: %ld direct, %ld behind/duplicated, %ld failures; min hit weight %.4f "
                "(>= 0.99)",
                checked, direct, covered, failures, worst_hit_weight);
}

// ---- A9: I/O integrity and CLI reproducibility

Outcome a9()
{
    testing::ScratchDir dir("iibr-accept");
    int bad = 0;
    std::string failed;
    auto check = [&](bool ok, const char* what) {
        if (!ok) {
            ++bad;
            failed += std::string(failed.empty() ? "" : ", ") + what;
        }
    };
    RgbImage img = quantize8(testing::random_image(13, 17, 9));
    io::write_png(dir / "a.png", img);
    check(io::read_png(dir / "a.png") == img, "png");
    Mask m(13, 17);
    for (size_t i = 0; i < m.size(); ++i)
        m[i] = i % 3 == 0;
    io::write_mask_png(dir / "m.png", m);
    check(io::read_mask_png(dir / "m.png") == m, "mask");
    ScalarField f16(5, 7), fpfm(5, 7);
    for (size_t i = 0; i < f16.size(); ++i) {
        f16[i] = double(i * 1871 % 65536) / 65535.0;
        fpfm[i] = double(float(std::cos(double(i)) * 7.0));
    }
    io::write_png16(dir / "d.png", f16);
    check(io::read_png16(dir / "d.png") == f16, "png16");
    io::write_pfm(dir / "d.pfm", fpfm);
    check(io::read_pfm(dir / "d.pfm") == fpfm, "pfm");
    LightField4D lf(GridGeometry(3, 3, 6, 5));
    for (int v = 0; v < 3; ++v)
        for (int u = 0; u < 3; ++u)
            lf.set_view(v, u, quantize8(testing::random_image(6, 5, std::uint64_t(v * 3 + u))));
    io::save_lf(dir / "lf", lf);
    check(io::load_lf(dir / "lf") == lf, "lf");
    io::Checkpoint ck{RayTransformerParams::initialize({16, 4, 2, 5}, 3), 3, 77};
    io::save_checkpoint(dir / "c.ckpt", ck);
    io::Checkpoint back = io::load_checkpoint(dir / "c.ckpt");
    check(back.params == ck.params && back.seed == 3 && back.iteration == 77 &&
              io::encode_checkpoint(back) == testing::slurp(dir / "c.ckpt"),
          "checkpoint");

    const std::string cli = IIBR_CLI_PATH;
    auto run_in = [&](const fs::path& cwd, const std::string& args) {
        return testing::run("cd '" + cwd.string() + "' && " + cli + " " + args);
    };
    const fs::path r1 = dir / "run1", r2 = dir / "run2";
    fs::create_directories(r1);
    fs::create_directories(r2);
    for (const fs::path& r : {r1, r2}) {
        check(run_in(r, "scenegen --grid 5x5 --size 32x32 --seed 7 scene") == 0, "scenegen");
        check(run_in(r, "synthesize --input scene/center.png --depth scene/center_disparity.pfm --grid 5x5 lf") == 0,
              "synthesize");
        check(run_in(r, "train --scene scene --iterations 20 --rays 8 --d-model 16 --out w.ckpt --log log.csv") == 0,
              "train");
        check(run_in(r, "refocus --lf lf --sweep -1:1:1 --out sweep") == 0, "refocus");
        check(run_in(r, "eval --gt scene --pred lf --masked --out eval.json --csv eval.csv") == 0, "eval");
    }
    std::string diff;
    check(testing::same_tree(r1, r2, &diff), ("byte-identical runs (" + diff + ")").c_str());
    return make(bad == 0, "format round trips and two CLI runs (scenegen, synthesize, train, refocus, eval): %s",
                bad == 0 ? "all identical" : failed.c_str());
}

} // namespace

int main()
{
    struct Criterion {
        const char* id;
        std::function<Outcome()> run;
    };
    const Criterion all[] = {{"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5},
                             {"A6", a6}, {"A7", a7}, {"A8", a8}, {"A9", a9}};
    int failures = 0;
    for (const auto& c : all) {
        Outcome o;
        auto t0 = Clock::now();
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failures += !o.pass;
        std::printf("%s %s  %s  [%.1fs]\n", c.id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
