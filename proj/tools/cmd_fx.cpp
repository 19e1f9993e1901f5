// refocus, epi extract|synth|slope
#include <cmath>
#include <cstdio>

#include "cli.hpp"
#include "iibr/epi.hpp"
#include "iibr/io.hpp"
#include "iibr/photo_fx.hpp"

namespace cli {

using namespace iibr;
namespace fs = std::filesystem;

namespace {

EpiAxis parse_axis(const std::string& s)
{
    if (s == "horizontal")
        return EpiAxis::horizontal;
    if (s == "vertical")
        return EpiAxis::vertical;
    throw UsageError("--axis: expected horizontal|vertical");
}

// ---- refocus

struct RefocusOpts {
    Common common;
    std::string lf, out, sweep, aperture = "full", border = "renorm", format = "png";
    double df = 0.0, max_disparity = 8.0;
};

void run_refocus(CLI::App* sub, RefocusOpts& o)
{
    merge_config(sub, o.common);
    std::vector<double> focus;
    if (!o.sweep.empty()) {
        double a, b, step;
        char c1, c2;
        int consumed = 0;
        if (std::sscanf(o.sweep.c_str(), "%lf%c%lf%c%lf%n", &a, &c1, &b, &c2, &step, &consumed) != 5 || c1 != ':' ||
            c2 != ':' || consumed != static_cast<int>(o.sweep.size()) || !(step > 0) || b < a)
            throw UsageError("--sweep: expected FROM:TO:STEP with STEP > 0");
        for (int i = 0; a + i * step <= b + 1e-9; ++i)
            focus.push_back(a + i * step);
    } else {
        focus.push_back(o.df);
    }
    BorderPolicy border;
    if (o.border == "renorm")
        border = BorderPolicy::renorm;
    else if (o.border == "zero")
        border = BorderPolicy::zero;
    else
        throw UsageError("--border: expected renorm|zero");
    if (o.format != "png" && o.format != "pfm")
        throw UsageError("--format: expected png|pfm");
    double radius = -1.0;
    if (o.aperture.rfind("disk:", 0) == 0) {
        try {
            radius = std::stod(o.aperture.substr(5));
        } catch (const std::exception&) {
            throw UsageError("--aperture: expected full|disk:R");
        }
    } else if (o.aperture != "full") {
        throw UsageError("--aperture: expected full|disk:R");
    }
    for (double d : focus)
        if (!(std::abs(d) <= o.max_disparity))
            throw UsageError("focus disparity exceeds --max-disparity");
    announce(sub, o.common);

    set_stage("load");
    LightField4D lf = io::load_lf(o.lf);
    ApertureSpec ap = radius < 0 ? ApertureSpec::full(lf.geometry()) : ApertureSpec::disk(lf.geometry(), radius);
    set_stage("refocus");
    auto save = [&](const fs::path& p, const RgbImage& img) {
        if (o.format == "png")
            io::write_png(p, img);
        else
            io::write_pfm(p, luma_of(img));
    };
    if (o.sweep.empty()) {
        save(o.out, refocus(lf, focus[0], ap, border, o.max_disparity));
        return;
    }
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec)
        throw IoError("cannot create " + o.out);
    for (size_t i = 0; i < focus.size(); ++i) {
        char name[64];
        std::snprintf(name, sizeof name, "frame_%03zu.%s", i, o.format.c_str());
        save(fs::path(o.out) / name, refocus(lf, focus[i], ap, border, o.max_disparity));
    }
    std::printf("wrote %zu frames\n", focus.size());
}

// ---- epi

struct EpiOpts {
    Common common;
    std::string lf, out, axis = "horizontal";
    int spatial = 0, angular = 0;
    // synth
    std::string image, depth, holes;
    int row = 0, views = 9, source_row = -1;
    // slope
    std::string report;
    double min_coherence = 0.9;
};

void run_epi_extract(CLI::App* sub, EpiOpts& o)
{
    merge_config(sub, o.common);
    EpiAxis axis = parse_axis(o.axis);
    announce(sub, o.common);
    set_stage("load");
    LightField4D lf = io::load_lf(o.lf);
    set_stage("extract");
    io::write_png(o.out, extract_epi(lf, o.spatial, o.angular, axis).pixels);
}

void run_epi_synth(CLI::App* sub, EpiOpts& o)
{
    merge_config(sub, o.common);
    if (o.views < 1)
        throw UsageError("--views must be positive");
    const int source = o.source_row < 0 ? (o.views - 1) / 2 : o.source_row;
    if (source >= o.views)
        throw UsageError("--source-row outside the angular range");
    announce(sub, o.common);
    set_stage("load");
    RgbImage img = io::read_png(o.image);
    ScalarField d = io::read_pfm(o.depth);
    if (d.rows() != img.rows() || d.cols() != img.cols())
        throw FormatError("depth map size differs from the image");
    if (o.row < 0 || o.row >= img.rows())
        throw DomainError("--row outside the image");
    std::vector<Rgb> row(static_cast<size_t>(img.cols()));
    std::vector<double> disp(static_cast<size_t>(img.cols()));
    for (int x = 0; x < img.cols(); ++x) {
        row[static_cast<size_t>(x)] = img.at(o.row, x);
        disp[static_cast<size_t>(x)] = d.at(o.row, x);
    }
    set_stage("synthesize");
    auto [epi, holes] = synthesize_epi(row, disp, o.views, source);
    io::write_png(o.out, epi.pixels);
    if (!o.holes.empty())
        io::write_mask_png(o.holes, holes);
}

void run_epi_slope(CLI::App* sub, EpiOpts& o)
{
    merge_config(sub, o.common);
    EpiAxis axis = parse_axis(o.axis);
    json report = announce(sub, o.common);
    set_stage("load");
    LightField4D lf = io::load_lf(o.lf);
    set_stage("slope");
    Epi e = extract_epi(lf, o.spatial, o.angular, axis);
    SlopeField s = slopes_from_tensor(structure_tensor(e));
    double sum = 0.0;
    long n = 0;
    for (size_t i = 0; i < s.slope.size(); ++i)
        if (s.coherence[i] > o.min_coherence && std::isfinite(s.slope[i])) {
            sum += s.slope[i];
            ++n;
        }
    if (!o.out.empty())
        io::write_pfm(o.out, s.slope);
    report["confident_pixels"] = n;
    report["mean_slope"] = n > 0 ? json(sum / double(n)) : json(nullptr);
    if (!o.report.empty())
        io::write_json(o.report, report);
    if (n > 0)
        std::printf("mean slope %.6f over %ld pixels\n", sum / double(n), n);
    else
        std::printf("no pixel above coherence %.3f\n", o.min_coherence);
}

} // namespace

void register_fx_commands(CLI::App& app)
{
    {
        static RefocusOpts o;
        CLI::App* sub = app.add_subcommand("refocus", "Synthetic-aperture refocusing");
        add_common(sub, o.common);
        sub->add_option("--lf", o.lf, "LF directory")->required();
        sub->add_option("--df", o.df, "focus disparity")->capture_default_str();
        sub->add_option("--sweep", o.sweep, "FROM:TO:STEP focal sweep into numbered frames");
        sub->add_option("--aperture", o.aperture, "full|disk:R")->capture_default_str();
        sub->add_option("--border", o.border, "renorm|zero")->capture_default_str();
        sub->add_option("--format", o.format, "png|pfm (pfm stores luma)")->capture_default_str();
        sub->add_option("--max-disparity", o.max_disparity)->capture_default_str();
        sub->add_option("--out", o.out, "output file, or directory for --sweep")->required();
        sub->callback([sub] { run_refocus(sub, o); });
    }
    CLI::App* epi = app.add_subcommand("epi", "Epipolar-plane image tools");
    epi->require_subcommand(1);
    static EpiOpts ex, sy, sl;
    {
        CLI::App* sub = epi->add_subcommand("extract", "Cut an EPI out of a light field");
        add_common(sub, ex.common);
        sub->add_option("--lf", ex.lf)->required();
        sub->add_option("--spatial", ex.spatial, "image row (horizontal) or column (vertical)")->capture_default_str();
        sub->add_option("--angular", ex.angular, "view row (horizontal) or column (vertical)")->capture_default_str();
        sub->add_option("--axis", ex.axis, "horizontal|vertical")->capture_default_str();
        sub->add_option("--out", ex.out, "EPI PNG")->required();
        sub->callback([sub] { run_epi_extract(sub, ex); });
    }
    {
        CLI::App* sub = epi->add_subcommand("synth", "Forward-warp one image row into an EPI");
        add_common(sub, sy.common);
        sub->add_option("--image", sy.image)->required();
        sub->add_option("--depth", sy.depth, "disparity PFM")->required();
        sub->add_option("--row", sy.row)->capture_default_str();
        sub->add_option("--views", sy.views, "angular rows")->capture_default_str();
        sub->add_option("--source-row", sy.source_row, "angular row holding the input (default: middle)");
        sub->add_option("--out", sy.out, "EPI PNG")->required();
        sub->add_option("--holes", sy.holes, "hole mask PNG");
        sub->callback([sub] { run_epi_synth(sub, sy); });
    }
    {
        CLI::App* sub = epi->add_subcommand("slope", "Structure-tensor slopes of an EPI");
        add_common(sub, sl.common);
        sub->add_option("--lf", sl.lf)->required();
        sub->add_option("--spatial", sl.spatial)->capture_default_str();
        sub->add_option("--angular", sl.angular)->capture_default_str();
        sub->add_option("--axis", sl.axis, "horizontal|vertical")->capture_default_str();
        sub->add_option("--min-coherence", sl.min_coherence)->capture_default_str();
        sub->add_option("--out", sl.out, "slope PFM");
        sub->add_option("--report", sl.report, "JSON report");
        sub->callback([sub] { run_epi_slope(sub, sl); });
    }
}

} // namespace cli
