// scenegen, synthesize, mask, inpaint-sidecar
#include <chrono>
#include <cstdio>

#include "cli.hpp"
#include "iibr/disparity.hpp"
#include "iibr/io.hpp"
#include "iibr/occlusion.hpp"
#include "iibr/synthlf.hpp"

namespace cli {

using namespace iibr;
namespace fs = std::filesystem;

namespace {

char view_suffix_buf[32];
const char* view_suffix(int v, int u)
{
    std::snprintf(view_suffix_buf, sizeof view_suffix_buf, "%02d_%02d", v, u);
    return view_suffix_buf;
}

void make_dir(const fs::path& p)
{
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec)
        throw IoError("cannot create " + p.string() + ": " + ec.message());
}

double seconds_since(std::chrono::steady_clock::time_point t)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t).count();
}

// ---- scenegen

struct SceneOpts {
    Common common;
    int layers = 2;
    std::string grid = "9x9";
    std::string size = "128x128";
    double disparity_min = 0.0, disparity_max = 2.0;
    bool fractional = false;
    std::string texture = "value_noise", shape = "rects";
    int margin = 8;
    double feature_size = 12.0;
    std::string out;
};

void run_scenegen(CLI::App* sub, SceneOpts& o)
{
    merge_config(sub, o.common);
    auto [h, w] = parse_pair(o.size, "--size");
    GridGeometry g = parse_grid(o.grid, h, w);
    synthlf::SceneSpec spec;
    spec.layers = o.layers;
    spec.disparity_min = o.disparity_min;
    spec.disparity_max = o.disparity_max;
    spec.integer_disparity = !o.fractional;
    spec.height = h;
    spec.width = w;
    spec.margin = o.margin;
    spec.feature_size = o.feature_size;
    spec.seed = o.common.seed;
    if (o.texture == "value_noise")
        spec.texture = synthlf::TextureKind::value_noise;
    else if (o.texture == "stripes")
        spec.texture = synthlf::TextureKind::stripes;
    else if (o.texture == "checker")
        spec.texture = synthlf::TextureKind::checker;
    else
        throw UsageError("--texture: expected value_noise|stripes|checker");
    if (o.shape == "rects")
        spec.shape = synthlf::ShapeKind::rects;
    else if (o.shape == "disks")
        spec.shape = synthlf::ShapeKind::disks;
    else
        throw UsageError("--shape: expected rects|disks");
    if (o.layers < 1 || o.margin < 0 || !(o.feature_size > 0) || !(o.disparity_max >= o.disparity_min))
        throw UsageError("invalid scene parameters");
    json report = announce(sub, o.common);

    auto t0 = std::chrono::steady_clock::now();
    set_stage("generate");
    std::vector<synthlf::Layer> layers = synthlf::generate_scene(spec);
    synthlf::GroundTruth gt = synthlf::render_ground_truth(layers, g);
    set_stage("write");
    const fs::path out(o.out);
    io::save_lf(out, gt.lf);
    make_dir(out / "gt");
    for (int v = 0; v < g.V(); ++v)
        for (int u = 0; u < g.U(); ++u) {
            io::write_pfm(out / "gt" / (std::string("disparity_") + view_suffix(v, u) + ".pfm"), gt.disparity_at({v, u}));
            io::write_mask_png(out / "gt" / (std::string("occlusion_") + view_suffix(v, u) + ".png"),
                               gt.occlusion_at({v, u}));
        }
    ViewIndex c = g.center_view();
    io::write_png(out / "center.png", gt.lf.center());
    io::write_pfm(out / "center_disparity.pfm", gt.disparity_at(c));
    json layer_j = json::array();
    for (const auto& l : layers)
        layer_j.push_back({{"disparity", l.disparity}, {"full", l.full}, {"shapes", l.shapes.size()}});
    report["layers"] = layer_j;
    io::write_json(out / "report.json", report);
    std::printf("wrote %d views to %s in %.2fs\n", g.view_count(), out.c_str(), seconds_since(t0));
}

// ---- synthesize

struct SynthOpts {
    Common common;
    std::string input, depth, relative_depth;
    double alpha = 1.0, beta = 0.0, max_disparity = default_max_disparity;
    std::string grid = "9x9";
    std::string weighter = "analytic", checkpoint;
    double sigma = 0.1, gamma = 4.0, hit_radius = 0.5;
    int k = 5;
    std::string inpainter = "naive", inpaint_cmd;
    double occlusion_k = 0.0, occlusion_ratio = 0.0;
    int passes = 1;
    std::string out;
};

void run_synthesize(CLI::App* sub, SynthOpts& o)
{
    merge_config(sub, o.common);
    if (o.depth.empty() == o.relative_depth.empty())
        throw UsageError("give exactly one of --depth and --relative-depth");
    if (o.weighter != "analytic" && o.weighter != "learned")
        throw UsageError("--weighter: expected analytic|learned");
    if (o.weighter == "learned" && o.checkpoint.empty())
        throw UsageError("--weighter learned needs --checkpoint");
    if (o.inpainter != "naive" && o.inpainter != "external")
        throw UsageError("--inpainter: expected naive|external");
    if (o.inpainter == "external" && o.inpaint_cmd.empty())
        throw UsageError("--inpainter external needs --inpaint-cmd");
    if (o.occlusion_k > 0 && o.occlusion_ratio > 0)
        throw UsageError("give at most one of --occlusion-k and --occlusion-ratio");
    if (o.passes < 1 || o.k < 1 || !(o.sigma > 0))
        throw UsageError("--passes, --k and --sigma must be positive");
    json report = announce(sub, o.common);
    auto t0 = std::chrono::steady_clock::now();

    set_stage("load");
    RgbImage input = io::read_png(o.input);
    DisparityMap disp;
    if (!o.depth.empty()) {
        disp.values = io::read_pfm(o.depth);
    } else {
        fs::path p(o.relative_depth);
        RelativeDepthMap f{p.extension() == ".pfm" ? io::read_pfm(p) : io::read_png16(p)};
        disp = apply_calibration(f, {o.alpha, o.beta}, o.max_disparity);
    }
    if (disp.values.rows() != input.rows() || disp.values.cols() != input.cols())
        throw FormatError("depth map size differs from the input image");
    for (double d : disp.values.data())
        if (!(std::abs(d) <= o.max_disparity))
            throw DomainError("disparity outside +-max_disparity in the depth map");
    GridGeometry g = parse_grid(o.grid, input.rows(), input.cols());

    std::unique_ptr<Weighter> weighter;
    RayTransformerParams params;
    if (o.weighter == "learned") {
        params = io::load_checkpoint(o.checkpoint).params;
        weighter = std::make_unique<LearnedWeighter>(params);
    } else {
        weighter = std::make_unique<AnalyticWeighter>(AnalyticWeightConfig{o.sigma, o.gamma, o.hit_radius}, o.k);
    }
    std::unique_ptr<Inpainter> inpainter = io::make_inpainter(o.inpainter, o.inpaint_cmd);
    GenerateConfig gc;
    gc.passes = o.passes;
    gc.render.threads = o.common.threads;
    if (o.occlusion_k > 0) {
        gc.occlusion_set = true;
        gc.occlusion.mode = OcclusionConfig::Mode::absolute;
        gc.occlusion.k = o.occlusion_k;
    } else if (o.occlusion_ratio > 0) {
        gc.occlusion_set = true;
        gc.occlusion.mode = OcclusionConfig::Mode::relative;
        gc.occlusion.ratio = o.occlusion_ratio;
    }

    set_stage("generate");
    GeneratedLightField res = generate_light_field(input, disp, g, *weighter, *inpainter, gc);

    set_stage("write");
    const fs::path out(o.out);
    io::save_lf(out, res.lf);
    make_dir(out / "masks");
    make_dir(out / "entropy");
    make_dir(out / "disparity");
    json views = json::array();
    for (ViewIndex v : res.order) {
        const size_t i = static_cast<size_t>(v.v) * g.U() + v.u;
        const std::string sfx = view_suffix(v.v, v.u);
        io::write_mask_png(out / "masks" / ("mask_" + sfx + ".png"), res.masks[i]);
        io::write_pfm(out / "entropy" / ("entropy_" + sfx + ".pfm"), res.entropy[i]);
        io::write_pfm(out / "disparity" / ("disparity_" + sfx + ".pfm"), res.disparity[i]);
        views.push_back({{"v", v.v}, {"u", v.u}, {"masked_pixels", count_set(res.masks[i])}});
    }
    report["order"] = views;
    report["source_rays"] = res.source_count;
    io::write_json(out / "report.json", report);
    std::printf("synthesized %d views in %.2fs\n", g.view_count(), seconds_since(t0));
}

// ---- mask

struct MaskOpts {
    Common common;
    std::string entropy, out;
    double k = 0.0, ratio = 0.0;
    int n = 5;
};

void run_mask(CLI::App* sub, MaskOpts& o)
{
    merge_config(sub, o.common);
    OcclusionConfig cfg = OcclusionConfig::defaults_for(o.n);
    if (o.k > 0 && o.ratio > 0)
        throw UsageError("give at most one of --k and --ratio");
    if (o.k > 0) {
        cfg.mode = OcclusionConfig::Mode::absolute;
        cfg.k = o.k;
    } else if (o.ratio > 0) {
        cfg.mode = OcclusionConfig::Mode::relative;
        cfg.ratio = o.ratio;
    }
    if (cfg.mode == OcclusionConfig::Mode::relative && o.n < 2)
        throw UsageError("--n must be at least 2 for a relative threshold");
    announce(sub, o.common);
    set_stage("mask");
    ScalarField e = io::read_pfm(o.entropy);
    OcclusionMask m = detect_mask(e, cfg, o.n);
    io::write_mask_png(o.out, m);
    std::printf("threshold %.17g, %d of %zu pixels masked\n", cfg.threshold(o.n), count_set(m), m.size());
}

// ---- inpaint-sidecar: the external-inpainter protocol served by naive_inpaint

struct SidecarOpts {
    Common common;
    std::string dir;
};

void run_sidecar(CLI::App* sub, SidecarOpts& o)
{
    merge_config(sub, o.common);
    set_stage("inpaint");
    fs::path d(o.dir);
    RgbImage img = io::read_png(d / "in.png");
    Mask m = io::read_mask_png(d / "mask.png");
    io::write_png(d / "out.png", naive_inpaint(img, m));
}

} // namespace

void register_scene_commands(CLI::App& app)
{
    {
        static SceneOpts o;
        CLI::App* sub = app.add_subcommand("scenegen", "Generate a layered synthetic light field with ground truth");
        add_common(sub, o.common);
        sub->add_option("--layers", o.layers)->capture_default_str();
        sub->add_option("--grid", o.grid, "angular grid VxU")->capture_default_str();
        sub->add_option("--size", o.size, "image size HxW")->capture_default_str();
        sub->add_option("--disparity-min", o.disparity_min)->capture_default_str();
        sub->add_option("--disparity-max", o.disparity_max)->capture_default_str();
        sub->add_flag("--fractional", o.fractional, "allow non-integer layer disparities");
        sub->add_option("--texture", o.texture, "value_noise|stripes|checker")->capture_default_str();
        sub->add_option("--shape", o.shape, "rects|disks")->capture_default_str();
        sub->add_option("--margin", o.margin)->capture_default_str();
        sub->add_option("--feature-size", o.feature_size)->capture_default_str();
        sub->add_option("out", o.out, "output directory")->required();
        sub->callback([sub] { run_scenegen(sub, o); });
    }
    {
        static SynthOpts o;
        CLI::App* sub = app.add_subcommand("synthesize", "Generate a light field from one image and its depth");
        add_common(sub, o.common);
        sub->add_option("--input", o.input, "center view PNG")->required();
        sub->add_option("--depth", o.depth, "disparity PFM");
        sub->add_option("--relative-depth", o.relative_depth, "relative depth (PFM or 16-bit PNG)");
        sub->add_option("--alpha", o.alpha, "calibration scale for --relative-depth")->capture_default_str();
        sub->add_option("--beta", o.beta, "calibration offset for --relative-depth")->capture_default_str();
        sub->add_option("--max-disparity", o.max_disparity)->capture_default_str();
        sub->add_option("--grid", o.grid, "angular grid VxU")->capture_default_str();
        sub->add_option("--weighter", o.weighter, "analytic|learned")->capture_default_str();
        sub->add_option("--checkpoint", o.checkpoint, "learned weighter parameters");
        sub->add_option("--sigma", o.sigma)->capture_default_str();
        sub->add_option("--gamma", o.gamma)->capture_default_str();
        sub->add_option("--hit-radius", o.hit_radius)->capture_default_str();
        sub->add_option("--k", o.k, "candidate sources per ray (analytic)")->capture_default_str();
        sub->add_option("--inpainter", o.inpainter, "naive|external")->capture_default_str();
        sub->add_option("--inpaint-cmd", o.inpaint_cmd, "command run as: <cmd> <dir>");
        sub->add_option("--occlusion-k", o.occlusion_k, "absolute entropy threshold");
        sub->add_option("--occlusion-ratio", o.occlusion_ratio, "threshold as a fraction of ln N");
        sub->add_option("--passes", o.passes)->capture_default_str();
        sub->add_option("out", o.out, "output directory")->required();
        sub->callback([sub] { run_synthesize(sub, o); });
    }
    {
        static MaskOpts o;
        CLI::App* sub = app.add_subcommand("mask", "Threshold an entropy map into an occlusion mask");
        add_common(sub, o.common);
        sub->add_option("--entropy", o.entropy, "entropy PFM")->required();
        sub->add_option("--k", o.k, "absolute threshold");
        sub->add_option("--ratio", o.ratio, "threshold as a fraction of ln N");
        sub->add_option("--n", o.n, "candidate count N")->capture_default_str();
        sub->add_option("--out", o.out, "mask PNG")->required();
        sub->callback([sub] { run_mask(sub, o); });
    }
    {
        static SidecarOpts o;
        CLI::App* sub =
            app.add_subcommand("inpaint-sidecar", "Fill DIR/in.png under DIR/mask.png into DIR/out.png (naive)");
        add_common(sub, o.common);
        sub->add_option("dir", o.dir)->required();
        sub->callback([sub] { run_sidecar(sub, o); });
    }
}

} // namespace cli
