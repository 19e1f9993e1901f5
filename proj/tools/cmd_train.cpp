// train, eval, fit-disparity
#include <chrono>
#include <cstdio>

#include "cli.hpp"
#include "iibr/disparity.hpp"
#include "iibr/eval.hpp"
#include "iibr/io.hpp"
#include "iibr/training.hpp"

namespace cli {

using namespace iibr;
namespace fs = std::filesystem;

namespace {

std::string gt_file(const char* kind, int v, int u, const char* ext)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s_%02d_%02d.%s", kind, v, u, ext);
    return buf;
}

std::vector<Mask> load_gt_masks(const fs::path& dir, const GridGeometry& g)
{
    std::vector<Mask> masks;
    for (int v = 0; v < g.V(); ++v)
        for (int u = 0; u < g.U(); ++u)
            masks.push_back(io::read_mask_png(dir / "gt" / gt_file("occlusion", v, u, "png")));
    return masks;
}

// ---- train

struct TrainOpts {
    Common common;
    std::vector<std::string> scenes;
    int iterations = 5000, rays = 32, strips = 1, strip_width = 16;
    double lr = 1e-4, beta1 = 0.9, beta2 = 0.99, clip = 1.0;
    double lambda_c = 100.0, lambda_w = 1.0, lambda_epi = 0.1;
    int d_model = 64, heads = 4, layers = 2, k = 5;
    bool entropy_visible_only = false;
    std::string out, log;
};

void run_train(CLI::App* sub, TrainOpts& o)
{
    merge_config(sub, o.common);
    FitConfig fc;
    fc.net = {o.d_model, o.heads, o.layers, o.k};
    fc.loss = {o.lambda_c, o.lambda_w, o.lambda_epi};
    fc.adam.lr = o.lr;
    fc.adam.beta1 = o.beta1;
    fc.adam.beta2 = o.beta2;
    fc.iterations = o.iterations;
    fc.rays = o.rays;
    fc.strips = o.strips;
    fc.strip_width = o.strip_width;
    fc.clip = o.clip;
    fc.seed = o.common.seed;
    fc.entropy_visible_only = o.entropy_visible_only;
    try {
        fc.validate();
    } catch (const DomainError& e) {
        throw UsageError(e.what());
    }
    json report = announce(sub, o.common);
    auto t0 = std::chrono::steady_clock::now();

    set_stage("load");
    std::vector<std::unique_ptr<TrainScene>> scenes;
    for (const std::string& s : o.scenes) {
        fs::path dir(s);
        LightField4D lf = io::load_lf(dir);
        const GridGeometry& g = lf.geometry();
        ViewIndex c = g.center_view();
        DisparityMap d{io::read_pfm(dir / "gt" / gt_file("disparity", c.v, c.u, "pfm"))};
        std::vector<Mask> masks = o.entropy_visible_only ? load_gt_masks(dir, g) : std::vector<Mask>{};
        scenes.push_back(std::make_unique<TrainScene>(lf, d, o.k, std::move(masks)));
    }
    std::vector<const TrainScene*> ptrs;
    for (const auto& s : scenes)
        ptrs.push_back(s.get());

    set_stage("train");
    FitResult res;
    try {
        res = fit(ptrs, fc, [&](int it, const LossResult& r) {
            if ((it + 1) % 500 == 0)
                std::printf("iteration %d loss %.6f\n", it + 1, r.total);
        });
    } catch (const DivergenceError& e) {
        if (!o.log.empty())
            io::write_text(o.log, e.log.csv());
        throw;
    }

    set_stage("write");
    io::save_checkpoint(o.out, {res.params, fc.seed, static_cast<std::int64_t>(o.iterations)});
    if (!o.log.empty())
        io::write_text(o.log, res.log.csv());
    if (!res.log.entries.empty()) {
        const auto& last = res.log.entries.back();
        report["final_loss"] = {{"total", last.total},
                                {"color", last.components.color},
                                {"entropy", last.components.entropy},
                                {"epi", last.components.epi}};
    }
    report["parameters"] = res.params.parameter_count();
    io::write_json(o.out + ".json", report);
    std::printf("trained %d iterations in %.2fs\n", o.iterations,
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
}

// ---- eval

struct EvalOpts {
    Common common;
    std::string gt, pred, out, csv;
    bool masked = false;
};

void run_eval(CLI::App* sub, EvalOpts& o)
{
    merge_config(sub, o.common);
    announce(sub, o.common);
    set_stage("load");
    LightField4D gt = io::load_lf(o.gt), pred = io::load_lf(o.pred);
    std::vector<Mask> masks;
    if (o.masked)
        masks = load_gt_masks(o.gt, gt.geometry());
    set_stage("evaluate");
    MetricReport rep = evaluate_center_protocol(gt, pred, o.masked ? &masks : nullptr);
    set_stage("write");
    if (!o.out.empty())
        io::write_text(o.out, rep.to_json());
    if (!o.csv.empty())
        io::write_text(o.csv, rep.to_csv());
    std::printf("mean PSNR %.4f dB, mean SSIM %.6f over %zu views (%.2fs)\n", rep.mean_psnr, rep.mean_ssim,
                rep.views.size(), rep.runtime_seconds);
}

// ---- fit-disparity

struct FitDispOpts {
    Common common;
    std::string lf, relative_depth, out, report, axis = "horizontal";
    double min_coherence = 0.9, max_disparity = default_max_disparity;
};

void run_fit_disparity(CLI::App* sub, FitDispOpts& o)
{
    merge_config(sub, o.common);
    if (o.axis != "horizontal" && o.axis != "vertical")
        throw UsageError("--axis: expected horizontal|vertical");
    json report = announce(sub, o.common);
    set_stage("load");
    LightField4D lf = io::load_lf(o.lf);
    fs::path rp(o.relative_depth);
    RelativeDepthMap f{rp.extension() == ".pfm" ? io::read_pfm(rp) : io::read_png16(rp)};
    set_stage("calibrate");
    SlopeField s = center_view_slopes(lf, {}, o.axis == "horizontal" ? EpiAxis::horizontal : EpiAxis::vertical);
    CalibrationFit fit = calibrate(f, s, o.min_coherence);
    DisparityMap d = apply_calibration(f, fit.calibration, o.max_disparity);
    set_stage("write");
    io::write_pfm(o.out, d.values);
    report["alpha"] = fit.calibration.alpha;
    report["beta"] = fit.calibration.beta;
    report["residual"] = fit.residual;
    report["pixels"] = fit.pixels;
    if (!o.report.empty())
        io::write_json(o.report, report);
    std::printf("alpha %.9g beta %.9g over %d pixels\n", fit.calibration.alpha, fit.calibration.beta, fit.pixels);
}

} // namespace

void register_train_commands(CLI::App& app)
{
    {
        static TrainOpts o;
        CLI::App* sub = app.add_subcommand("train", "Fit the ray transformer on scenegen directories");
        add_common(sub, o.common);
        sub->add_option("--scene", o.scenes, "scenegen output directory (repeatable)")->required();
        sub->add_option("--iterations", o.iterations)->capture_default_str();
        sub->add_option("--rays", o.rays, "random target rays per batch")->capture_default_str();
        sub->add_option("--strips", o.strips, "EPI strips per batch")->capture_default_str();
        sub->add_option("--strip-width", o.strip_width)->capture_default_str();
        sub->add_option("--lr", o.lr)->capture_default_str();
        sub->add_option("--beta1", o.beta1)->capture_default_str();
        sub->add_option("--beta2", o.beta2)->capture_default_str();
        sub->add_option("--clip", o.clip, "global gradient norm limit")->capture_default_str();
        sub->add_option("--lambda-c", o.lambda_c)->capture_default_str();
        sub->add_option("--lambda-w", o.lambda_w)->capture_default_str();
        sub->add_option("--lambda-epi", o.lambda_epi)->capture_default_str();
        sub->add_option("--d-model", o.d_model)->capture_default_str();
        sub->add_option("--heads", o.heads)->capture_default_str();
        sub->add_option("--layers", o.layers)->capture_default_str();
        sub->add_option("--k", o.k, "candidate sources per ray")->capture_default_str();
        sub->add_flag("--entropy-visible-only", o.entropy_visible_only,
                      "apply the entropy term only to rays visible from the input view");
        sub->add_option("--out", o.out, "checkpoint path")->required();
        sub->add_option("--log", o.log, "training log CSV");
        sub->callback([sub] { run_train(sub, o); });
    }
    {
        static EvalOpts o;
        CLI::App* sub = app.add_subcommand("eval", "PSNR / SSIM of every non-center view");
        add_common(sub, o.common);
        sub->add_option("--gt", o.gt, "ground-truth LF directory")->required();
        sub->add_option("--pred", o.pred, "predicted LF directory")->required();
        sub->add_flag("--masked", o.masked, "also report PSNR over pixels visible from the center (needs gt/)");
        sub->add_option("--out", o.out, "JSON report");
        sub->add_option("--csv", o.csv, "CSV report");
        sub->callback([sub] { run_eval(sub, o); });
    }
    {
        static FitDispOpts o;
        CLI::App* sub = app.add_subcommand("fit-disparity", "Calibrate relative depth against EPI slopes");
        add_common(sub, o.common);
        sub->add_option("--lf", o.lf, "LF directory")->required();
        sub->add_option("--relative-depth", o.relative_depth, "PFM or 16-bit PNG")->required();
        sub->add_option("--min-coherence", o.min_coherence)->capture_default_str();
        sub->add_option("--max-disparity", o.max_disparity)->capture_default_str();
        sub->add_option("--axis", o.axis, "horizontal|vertical")->capture_default_str();
        sub->add_option("--out", o.out, "disparity PFM")->required();
        sub->add_option("--report", o.report, "JSON report");
        sub->callback([sub] { run_fit_disparity(sub, o); });
    }
}

} // namespace cli
