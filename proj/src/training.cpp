#include "iibr/training.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

namespace iibr {

void LossWeights::validate() const
{
    if (!(lambda_c >= 0.0 && lambda_w >= 0.0 && lambda_epi >= 0.0))
        throw DomainError("loss weights must be non-negative");
}

double loss_color(const Rgb& c, const Rgb& c_hat) { return (c - c_hat).square().sum(); }

double loss_entropy(const WeightVector& w) { return entropy(w.weights); }

TrainScene::TrainScene(const LightField4D& gt, const DisparityMap& center_disparity, int k_sources,
                       std::vector<Mask> occlusion)
    : gt_(gt), k_(k_sources), occlusion_(std::move(occlusion))
{
    const GridGeometry& g = gt_.geometry();
    if (k_ < 1)
        throw DomainError("k_sources must be at least 1");
    if (!occlusion_.empty() && occlusion_.size() != static_cast<size_t>(g.view_count()))
        throw DomainError("one occlusion mask per view expected");
    sources_ = SourceRaySet::from_view(g, g.center_view(), gt_.center(), center_disparity);
    candidates_.resize(static_cast<size_t>(g.view_count()));
    for (int v = 0; v < g.V(); ++v)
        for (int u = 0; u < g.U(); ++u) {
            ProjectedIndex index(sources_.records(), g, v, u);
            auto& c = candidates_[static_cast<size_t>(v) * g.U() + u];
            c.reserve(static_cast<size_t>(g.H()) * g.W());
            for (int y = 0; y < g.H(); ++y)
                for (int x = 0; x < g.W(); ++x)
                    c.push_back(index.nearest({double(x), double(y), double(u), double(v)}, k_));
        }
}

TrainRay TrainScene::ray(ViewIndex view, int y, int x) const
{
    const GridGeometry& g = gt_.geometry();
    TrainRay r;
    r.target.slab = {double(x), double(y), double(view.u), double(view.v)};
    r.target.ray = grid_ray(g, view.v, view.u, y, x);
    r.color = gt_.view(view).at(y, x);
    const size_t vi = static_cast<size_t>(view.v) * g.U() + view.u;
    r.candidates = candidates_[vi][static_cast<size_t>(y) * g.W() + x];
    r.occluded = !occlusion_.empty() && occlusion_[vi].at(y, x);
    return r;
}

EpiStrip TrainScene::strip(int v, int y, int x0, int width, const StructureTensorConfig& cfg) const
{
    const GridGeometry& g = gt_.geometry();
    if (x0 < 0 || x0 + width > g.W() || y < 0 || y >= g.H() || v < 0 || v >= g.V())
        throw DomainError("EPI strip outside the light field");
    EpiStrip s;
    s.angular = g.U();
    s.spatial = width;
    ScalarField gt_luma(g.U(), width);
    for (int a = 0; a < g.U(); ++a)
        for (int i = 0; i < width; ++i) {
            s.rays.push_back(ray({v, a}, y, x0 + i));
            gt_luma.at(a, i) = luma(s.rays.back().color);
        }
    s.reference = structure_tensor(gt_luma, cfg);
    return s;
}

namespace {

const Eigen::Array3d luma_coef(0.299, 0.587, 0.114);

LossResult evaluate(const TrainBatch& batch, const RayTransformerParams& params, const LossWeights& lw,
                    RayTransformerParams* grads)
{
    lw.validate();
    if (!batch.sources)
        throw DomainError("training batch has no source set");
    const SourceRaySet& src = *batch.sources;

    std::vector<const TrainRay*> all;
    for (const TrainRay& r : batch.rays)
        all.push_back(&r);
    for (const EpiStrip& s : batch.strips)
        for (const TrainRay& r : s.rays)
            all.push_back(&r);

    std::vector<std::vector<RayEmbedding>> sets;
    sets.reserve(all.size());
    for (const TrainRay* r : all) {
        std::vector<RayEmbedding> e;
        for (const Candidate& c : r->candidates)
            e.push_back(embed_ray(r->target.ray, src[static_cast<size_t>(c.index)]));
        sets.push_back(std::move(e));
    }
    LossResult out;
    if (sets.empty())
        return out;
    TransformerPass pass(params, sets);
    const auto& W = pass.weights();

    std::vector<Rgb> rendered(all.size());
    for (size_t i = 0; i < all.size(); ++i) {
        Rgb c = Rgb::Zero();
        for (size_t a = 0; a < W[i].size(); ++a)
            c += W[i][a] * src[static_cast<size_t>(all[i]->candidates[a].index)].color;
        rendered[i] = c;
    }

    std::vector<std::vector<double>> dW(all.size());
    for (size_t i = 0; i < all.size(); ++i)
        dW[i].assign(W[i].size(), 0.0);
    // d(loss)/d(color of ray i) -> d(loss)/d(weights of ray i)
    auto push_color_grad = [&](size_t i, const Rgb& dc) {
        for (size_t a = 0; a < W[i].size(); ++a)
            dW[i][a] += (dc * src[static_cast<size_t>(all[i]->candidates[a].index)].color).sum();
    };

    const size_t nr = batch.rays.size();
    if (nr > 0) {
        double lc = 0.0;
        for (size_t i = 0; i < nr; ++i) {
            lc += loss_color(all[i]->color, rendered[i]);
            push_color_grad(i, lw.lambda_c * 2.0 * (rendered[i] - all[i]->color) / double(nr));
        }
        out.components.color = lc / double(nr);

        size_t nw = 0;
        for (size_t i = 0; i < nr; ++i)
            if (!(batch.entropy_visible_only && all[i]->occluded))
                ++nw;
        double lh = 0.0;
        for (size_t i = 0; i < nr && nw > 0; ++i) {
            if (batch.entropy_visible_only && all[i]->occluded)
                continue;
            lh += entropy(W[i]);
            for (size_t a = 0; a < W[i].size(); ++a) {
                double w = std::max(W[i][a], 1e-300);
                dW[i][a] -= lw.lambda_w * (std::log(w) + 1.0) / double(nw);
            }
        }
        out.components.entropy = nw > 0 ? lh / double(nw) : 0.0;
    }

    size_t offset = nr;
    double le = 0.0;
    for (const EpiStrip& s : batch.strips) {
        ScalarField l(s.angular, s.spatial);
        for (int k = 0; k < s.angular * s.spatial; ++k)
            l[static_cast<size_t>(k)] = luma(rendered[offset + static_cast<size_t>(k)]);
        ScalarField g;
        le += epi_structure_loss(l, s.reference, batch.tensor, grads ? &g : nullptr);
        if (grads) {
            const double scale = lw.lambda_epi / double(batch.strips.size());
            for (int k = 0; k < s.angular * s.spatial; ++k)
                push_color_grad(offset + static_cast<size_t>(k), scale * g[static_cast<size_t>(k)] * luma_coef);
        }
        offset += s.rays.size();
    }
    if (!batch.strips.empty())
        out.components.epi = le / double(batch.strips.size());

    out.total = out.components.total(lw);
    if (!std::isfinite(out.total))
        throw NumericError("non-finite loss");
    if (grads) {
        *grads = RayTransformerParams(params.config());
        pass.backward(dW, *grads);
    }
    return out;
}

// splitmix64: portable, tiny state.
std::uint64_t next(std::uint64_t& s)
{
    std::uint64_t z = (s += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

int below(std::uint64_t& s, int n) { return static_cast<int>(next(s) % static_cast<std::uint64_t>(n)); }

} // namespace

LossResult total_loss(const TrainBatch& batch, const RayTransformerParams& params, const LossWeights& lw)
{
    return evaluate(batch, params, lw, nullptr);
}

LossResult backward(const TrainBatch& batch, const RayTransformerParams& params, const LossWeights& lw,
                    RayTransformerParams& grads)
{
    return evaluate(batch, params, lw, &grads);
}

OptimizerState::OptimizerState(const RayTransformerParams& like, AdamConfig c)
    : cfg(c), m(like.config()), v(like.config())
{
}

void adam_step(OptimizerState& st, RayTransformerParams& params, const RayTransformerParams& grads)
{
    if (!params.compatible(grads) || !params.compatible(st.m))
        throw DomainError("optimizer, parameter and gradient shapes differ");
    ++st.step;
    const double b1 = st.cfg.beta1, b2 = st.cfg.beta2;
    const double c1 = 1.0 - std::pow(b1, double(st.step)), c2 = 1.0 - std::pow(b2, double(st.step));
    for (size_t t = 0; t < params.tensors().size(); ++t) {
        Eigen::MatrixXd& p = params.tensors()[t].value;
        Eigen::MatrixXd& m = st.m.tensors()[t].value;
        Eigen::MatrixXd& v = st.v.tensors()[t].value;
        const Eigen::MatrixXd& g = grads.tensors()[t].value;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
        p.array() -= st.cfg.lr * (m.array() / c1) / ((v.array() / c2).sqrt() + st.cfg.eps);
    }
    params.round_to_float();
}

double clip_global_norm(RayTransformerParams& grads, double max_norm)
{
    double sq = 0.0;
    for (const ParamTensor& t : grads.tensors())
        sq += t.value.squaredNorm();
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0)
        for (ParamTensor& t : grads.tensors())
            t.value *= max_norm / norm;
    return norm;
}

std::string TrainLog::csv(bool with_time) const
{
    std::string s = with_time ? "iteration,total,color,entropy,epi,seconds\n" : "iteration,total,color,entropy,epi\n";
    char buf[256];
    for (const TrainLogEntry& e : entries) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g", e.iteration, e.total, e.components.color,
                      e.components.entropy, e.components.epi);
        s += buf;
        if (with_time) {
            std::snprintf(buf, sizeof buf, ",%.6f", e.seconds);
            s += buf;
        }
        s += '\n';
    }
    return s;
}

void FitConfig::validate() const
{
    net.validate();
    loss.validate();
    if (iterations < 0 || rays < 0 || strips < 0 || strip_width < 1)
        throw DomainError("fit: counts must be non-negative");
    if (rays == 0 && strips == 0)
        throw DomainError("fit: batch has neither rays nor strips");
    if (!(adam.lr > 0.0) || !(clip > 0.0))
        throw DomainError("fit: learning rate and clip must be positive");
}

TrainBatch sample_batch(const TrainScene& scene, const FitConfig& cfg, std::uint64_t& rng)
{
    const GridGeometry& g = scene.light_field().geometry();
    TrainBatch b;
    b.sources = &scene.sources();
    b.tensor = cfg.tensor;
    b.entropy_visible_only = cfg.entropy_visible_only;
    for (int i = 0; i < cfg.rays; ++i) {
        int v = below(rng, g.V()), u = below(rng, g.U());
        int y = below(rng, g.H()), x = below(rng, g.W());
        b.rays.push_back(scene.ray({v, u}, y, x));
    }
    const int width = std::min(cfg.strip_width, g.W());
    for (int i = 0; i < cfg.strips; ++i) {
        int v = below(rng, g.V()), y = below(rng, g.H());
        int x0 = below(rng, g.W() - width + 1);
        b.strips.push_back(scene.strip(v, y, x0, width, cfg.tensor));
    }
    return b;
}

FitResult fit(const std::vector<const TrainScene*>& scenes, const FitConfig& cfg, const FitCallback& on_step)
{
    cfg.validate();
    if (scenes.empty())
        throw DomainError("fit needs at least one scene");
    for (const TrainScene* s : scenes)
        if (s->k_sources() != cfg.net.k_sources)
            throw DomainError("scene candidate count differs from k_sources");

    FitResult out;
    out.params = RayTransformerParams::initialize(cfg.net, cfg.seed);
    out.log.seed = cfg.seed;
    OptimizerState opt(out.params, cfg.adam);
    std::uint64_t rng = cfg.seed ^ 0x5DEECE66Dull;
    RayTransformerParams grads(cfg.net);
    auto start = std::chrono::steady_clock::now();

    for (int it = 0; it < cfg.iterations; ++it) {
        const TrainScene& scene = *scenes[static_cast<size_t>(below(rng, static_cast<int>(scenes.size())))];
        TrainBatch batch = sample_batch(scene, cfg, rng);
        LossResult r;
        try {
            r = backward(batch, out.params, cfg.loss, grads);
        } catch (const NumericError& e) {
            throw DivergenceError("training diverged at iteration " + std::to_string(it) + ": " + e.what(), out.log);
        }
        clip_global_norm(grads, cfg.clip);
        adam_step(opt, out.params, grads);
        TrainLogEntry e;
        e.iteration = it;
        e.components = r.components;
        e.total = r.total;
        e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.log.entries.push_back(e);
        if (on_step)
            on_step(it, r);
    }
    return out;
}

RayTransformerParams finite_difference_gradient(const TrainBatch& batch, const RayTransformerParams& params,
                                                const LossWeights& lw, double h)
{
    RayTransformerParams p = params;
    RayTransformerParams g(params.config());
    for (size_t t = 0; t < p.tensors().size(); ++t) {
        Eigen::MatrixXd& m = p.tensors()[t].value;
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            const double orig = m.data()[i];
            m.data()[i] = orig + h;
            double fp = total_loss(batch, p, lw).total;
            m.data()[i] = orig - h;
            double fm = total_loss(batch, p, lw).total;
            m.data()[i] = orig;
            g.tensors()[t].value.data()[i] = (fp - fm) / (2.0 * h);
        }
    }
    return g;
}

} // namespace iibr
