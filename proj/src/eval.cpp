#include "iibr/eval.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include <json.hpp>

namespace iibr {

namespace {

void require_same(const RgbImage& a, const RgbImage& b)
{
    if (!(a.rows() == b.rows() && a.cols() == b.cols()))
        throw DomainError("images differ in size");
    if (a.empty())
        throw DomainError("empty image");
}

} // namespace

double psnr_from_mse(double mse)
{
    if (mse < 1e-10)
        return psnr_cap;
    return std::min(psnr_cap, 10.0 * std::log10(1.0 / mse));
}

double psnr(const RgbImage& a, const RgbImage& b)
{
    require_same(a, b);
    double se = 0.0;
    for (size_t i = 0; i < a.size(); ++i)
        se += (a[i] - b[i]).square().sum();
    return psnr_from_mse(se / (3.0 * double(a.size())));
}

double psnr(const RgbImage& a, const RgbImage& b, const Mask& mask)
{
    require_same(a, b);
    if (!(mask.rows() == a.rows() && mask.cols() == a.cols()))
        throw DomainError("mask does not fit the images");
    double se = 0.0;
    long n = 0;
    for (size_t i = 0; i < a.size(); ++i)
        if (mask[i]) {
            se += (a[i] - b[i]).square().sum();
            ++n;
        }
    if (n == 0)
        throw DomainError("PSNR mask is empty");
    return psnr_from_mse(se / (3.0 * double(n)));
}

double ssim(const RgbImage& a, const RgbImage& b)
{
    require_same(a, b);
    constexpr int R = 5;
    if (a.rows() < 2 * R + 1 || a.cols() < 2 * R + 1)
        throw DomainError("SSIM needs images of at least 11x11");
    double k[2 * R + 1], ksum = 0.0;
    for (int i = -R; i <= R; ++i)
        ksum += k[i + R] = std::exp(-(i * i) / (2.0 * 1.5 * 1.5));
    for (double& v : k)
        v /= ksum;

    const ScalarField x = luma_of(a), y = luma_of(b);
    const int H = a.rows(), W = a.cols();
    // Separable filtering of x, y, x^2, y^2, xy in valid mode.
    auto filter = [&](auto value) {
        ScalarField rows(H, W - 2 * R), out(H - 2 * R, W - 2 * R);
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W - 2 * R; ++c) {
                double s = 0.0;
                for (int i = 0; i <= 2 * R; ++i)
                    s += k[i] * value(r, c + i);
                rows.at(r, c) = s;
            }
        for (int r = 0; r < H - 2 * R; ++r)
            for (int c = 0; c < W - 2 * R; ++c) {
                double s = 0.0;
                for (int i = 0; i <= 2 * R; ++i)
                    s += k[i] * rows.at(r + i, c);
                out.at(r, c) = s;
            }
        return out;
    };
    ScalarField mx = filter([&](int r, int c) { return x.at(r, c); });
    ScalarField my = filter([&](int r, int c) { return y.at(r, c); });
    ScalarField sxx = filter([&](int r, int c) { return x.at(r, c) * x.at(r, c); });
    ScalarField syy = filter([&](int r, int c) { return y.at(r, c) * y.at(r, c); });
    ScalarField sxy = filter([&](int r, int c) { return x.at(r, c) * y.at(r, c); });
    const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
    double sum = 0.0;
    for (size_t i = 0; i < mx.size(); ++i) {
        double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cxy = sxy[i] - mx[i] * my[i];
        sum += ((2 * mx[i] * my[i] + c1) * (2 * cxy + c2)) / ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
    return sum / double(mx.size());
}

MetricReport evaluate_center_protocol(const LightField4D& gt, const LightField4D& pred, const std::vector<Mask>* gt_masks)
{
    auto start = std::chrono::steady_clock::now();
    const GridGeometry& g = gt.geometry();
    if (!(g == pred.geometry()))
        throw DomainError("ground truth and prediction geometries differ");
    if (gt_masks && gt_masks->size() != static_cast<size_t>(g.view_count()))
        throw DomainError("one GT mask per view expected");
    MetricReport rep;
    double masked_sum = 0.0;
    int masked_n = 0;
    for (int v = 0; v < g.V(); ++v)
        for (int u = 0; u < g.U(); ++u) {
            if (ViewIndex{v, u} == g.center_view())
                continue;
            ViewMetrics m;
            m.view = {v, u};
            m.psnr = psnr(gt.view(v, u), pred.view(v, u));
            m.ssim = ssim(gt.view(v, u), pred.view(v, u));
            if (gt_masks) {
                const Mask& occ = (*gt_masks)[static_cast<size_t>(v) * g.U() + u];
                Mask keep(occ.rows(), occ.cols());
                for (size_t i = 0; i < occ.size(); ++i)
                    keep[i] = occ[i] ? 0 : 1;
                if (count_set(keep) > 0) {
                    m.psnr_masked = psnr(gt.view(v, u), pred.view(v, u), keep);
                    masked_sum += *m.psnr_masked;
                    ++masked_n;
                }
            }
            rep.views.push_back(m);
        }
    for (const ViewMetrics& m : rep.views) {
        rep.mean_psnr += m.psnr;
        rep.mean_ssim += m.ssim;
    }
    if (!rep.views.empty()) {
        rep.mean_psnr /= double(rep.views.size());
        rep.mean_ssim /= double(rep.views.size());
    }
    if (masked_n > 0)
        rep.mean_psnr_masked = masked_sum / masked_n;
    rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

std::string MetricReport::to_json() const
{
    using nlohmann::json;
    json views_j = json::array();
    for (const ViewMetrics& m : views) {
        json j = {{"v", m.view.v}, {"u", m.view.u}, {"psnr", m.psnr}, {"ssim", m.ssim}, {"lpips", nullptr}};
        j["psnr_masked"] = m.psnr_masked ? json(*m.psnr_masked) : json(nullptr);
        views_j.push_back(j);
    }
    json j = {{"schema_version", schema_version},
              {"protocol", "center_view"},
              {"view_count", views.size()},
              {"mean_psnr", mean_psnr},
              {"mean_ssim", mean_ssim},
              {"mean_lpips", nullptr},
              {"views", views_j}};
    j["mean_psnr_masked"] = mean_psnr_masked ? json(*mean_psnr_masked) : json(nullptr);
    return j.dump(2) + "\n";
}

std::string MetricReport::to_csv() const
{
    std::string s = "v,u,psnr,ssim,psnr_masked\n";
    char buf[160];
    for (const ViewMetrics& m : views) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f,", m.view.v, m.view.u, m.psnr, m.ssim);
        s += buf;
        if (m.psnr_masked) {
            std::snprintf(buf, sizeof buf, "%.6f", *m.psnr_masked);
            s += buf;
        }
        s += "\n";
    }
    return s;
}

} // namespace iibr
