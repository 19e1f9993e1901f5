#include "iibr/renderer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

namespace iibr {

bool SourceRaySet::add(const SourceRayRecord& r)
{
    Key key{r.slab.x, r.slab.y, r.slab.u, r.slab.v, static_cast<int>(r.provenance), r.generation};
    if (!keys_.insert(key).second)
        return false;
    records_.push_back(r);
    return true;
}

SourceRaySet SourceRaySet::from_view(const GridGeometry& g, ViewIndex view, const RgbImage& image,
                                     const DisparityMap& disp_x, const DisparityMap& disp_y)
{
    auto fits = [&](int r, int c) { return r == g.H() && c == g.W(); };
    if (!fits(image.rows(), image.cols()) || !fits(disp_x.values.rows(), disp_x.values.cols()) ||
        !fits(disp_y.values.rows(), disp_y.values.cols()))
        throw DomainError("source view, disparity and geometry sizes differ");
    SourceRaySet s;
    s.records_.reserve(image.size());
    for (int y = 0; y < g.H(); ++y)
        for (int x = 0; x < g.W(); ++x) {
            SourceRayRecord r;
            r.ray = grid_ray(g, view.v, view.u, y, x);
            r.slab = {static_cast<double>(x), static_cast<double>(y), static_cast<double>(view.u),
                      static_cast<double>(view.v)};
            r.color = image.at(y, x);
            r.disp_x = disp_x.values.at(y, x);
            r.disp_y = disp_y.values.at(y, x);
            s.add(r);
        }
    return s;
}

RayEmbedding embed_ray(const PluckerRay& target, const SourceRayRecord& source)
{
    return {target.d.x(),        target.d.y(),        target.d.z(),        target.m.x(),        target.m.y(),
            target.m.z(),        source.ray.d.x(),    source.ray.d.y(),    source.ray.d.z(),    source.ray.m.x(),
            source.ray.m.y(),    source.ray.m.z(),    source.disp_x,       source.disp_y};
}

namespace {

struct Ranked {
    double distance;
    double disparity;
    int index;
};

bool better(const Ranked& a, const Ranked& b)
{
    if (a.distance != b.distance)
        return a.distance < b.distance;
    if (a.disparity != b.disparity)
        return a.disparity > b.disparity;
    return a.index < b.index;
}

// Keeps the k best entries in sorted order.
class TopK {
public:
    explicit TopK(int k) : k_(static_cast<size_t>(k)) { best_.reserve(k_ + 1); }
    void offer(const Ranked& r)
    {
        if (best_.size() == k_ && !better(r, best_.back()))
            return;
        auto it = std::upper_bound(best_.begin(), best_.end(), r, better);
        best_.insert(it, r);
        if (best_.size() > k_)
            best_.pop_back();
    }
    bool full() const { return best_.size() == k_; }
    double worst() const { return best_.back().distance; }
    std::vector<Candidate> result() const
    {
        std::vector<Candidate> out;
        out.reserve(best_.size());
        for (const Ranked& r : best_)
            out.push_back({r.index, r.distance});
        return out;
    }

private:
    size_t k_;
    std::vector<Ranked> best_;
};

} // namespace

std::vector<Candidate> select_k_nearest(const LightSlabCoord& target, const SourceRaySet& s, int k)
{
    if (s.empty())
        throw DomainError("source set is empty");
    if (k < 1)
        throw DomainError("k must be at least 1");
    TopK top(k);
    for (size_t i = 0; i < s.size(); ++i)
        top.offer({reprojection_distance(s[i], target), s[i].disparity(), static_cast<int>(i)});
    return top.result();
}

ProjectedIndex::ProjectedIndex(const std::vector<SourceRayRecord>& records, const GridGeometry& g, double target_v,
                               double target_u)
    : records_(records), H_(g.H()), W_(g.W())
{
    const size_t n = records.size();
    px_.resize(n);
    py_.resize(n);
    std::vector<int> cell(n);
    start_.assign(static_cast<size_t>(H_) * W_ + 1, 0);
    for (size_t i = 0; i < n; ++i) {
        const SourceRayRecord& r = records[i];
        px_[i] = r.slab.x + r.disp_x * (target_u - r.slab.u);
        py_[i] = r.slab.y + r.disp_y * (target_v - r.slab.v);
        // Clamping only moves a position toward the image, so cell distance
        // stays a lower bound on the true distance for in-image targets.
        int cx = static_cast<int>(std::clamp(std::round(px_[i]), 0.0, static_cast<double>(W_ - 1)));
        int cy = static_cast<int>(std::clamp(std::round(py_[i]), 0.0, static_cast<double>(H_ - 1)));
        cell[i] = cy * W_ + cx;
        ++start_[static_cast<size_t>(cell[i]) + 1];
    }
    for (size_t c = 0; c + 1 < start_.size(); ++c)
        start_[c + 1] += start_[c];
    items_.resize(n);
    std::vector<int> fill(start_.begin(), start_.end() - 1);
    for (size_t i = 0; i < n; ++i)
        items_[static_cast<size_t>(fill[static_cast<size_t>(cell[i])]++)] = static_cast<int>(i);
}

std::vector<Candidate> ProjectedIndex::nearest(const LightSlabCoord& target, int k) const
{
    if (records_.empty())
        throw DomainError("source set is empty");
    TopK top(k);
    const int tx = static_cast<int>(std::lround(target.x)), ty = static_cast<int>(std::lround(target.y));
    const int max_ring = std::max(H_, W_) + std::abs(tx) + std::abs(ty) + 1;
    const double slack = std::max(std::abs(target.x - tx), std::abs(target.y - ty));
    auto visit = [&](int cy, int cx) {
        if (cy < 0 || cy >= H_ || cx < 0 || cx >= W_)
            return;
        const int c = cy * W_ + cx;
        for (int j = start_[static_cast<size_t>(c)]; j < start_[static_cast<size_t>(c) + 1]; ++j) {
            const int i = items_[static_cast<size_t>(j)];
            double d = std::abs(px_[static_cast<size_t>(i)] - target.x) + std::abs(py_[static_cast<size_t>(i)] - target.y);
            top.offer({d, records_[static_cast<size_t>(i)].disparity(), i});
        }
    };
    for (int ring = 0; ring <= max_ring; ++ring) {
        if (ring == 0) {
            visit(ty, tx);
        } else {
            for (int dx = -ring; dx <= ring; ++dx) {
                visit(ty - ring, tx + dx);
                visit(ty + ring, tx + dx);
            }
            for (int dy = -ring + 1; dy <= ring - 1; ++dy) {
                visit(ty + dy, tx - ring);
                visit(ty + dy, tx + ring);
            }
        }
        // Unvisited records are at least ring + 0.5 - slack away.
        if (top.full() && top.worst() < ring + 0.5 - slack)
            break;
    }
    return top.result();
}

namespace {

std::vector<double> softmax(const std::vector<double>& logits)
{
    double mx = *std::max_element(logits.begin(), logits.end());
    std::vector<double> w(logits.size());
    double sum = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
        w[i] = std::exp(logits[i] - mx);
        sum += w[i];
    }
    for (double& x : w)
        x /= sum;
    return w;
}

WeightVector analytic_from(const std::vector<Candidate>& subset, const std::function<const SourceRayRecord&(int)>& src,
                           const AnalyticWeightConfig& cfg)
{
    if (subset.empty())
        throw DomainError("empty candidate subset");
    if (!(cfg.sigma > 0.0))
        throw DomainError("sigma must be positive");
    std::vector<double> logits;
    WeightVector out;
    for (const Candidate& c : subset) {
        bool hit = c.distance <= cfg.hit_radius;
        double d = hit ? c.distance : cfg.hit_radius;
        double logit = -d * d / (2.0 * cfg.sigma * cfg.sigma);
        if (hit)
            logit += cfg.gamma * src(c.index).disparity();
        logits.push_back(logit);
        out.indices.push_back(c.index);
    }
    out.weights = softmax(logits);
    return out;
}

} // namespace

WeightVector analytic_weights(const SourceRaySet& s, const std::vector<Candidate>& subset,
                              const AnalyticWeightConfig& cfg)
{
    return analytic_from(subset, [&](int i) -> const SourceRayRecord& { return s[static_cast<size_t>(i)]; }, cfg);
}

Rgb render_ray(const WeightVector& w, const SourceRaySet& s)
{
    Rgb c = Rgb::Zero();
    for (size_t i = 0; i < w.weights.size(); ++i)
        c += w.weights[i] * s[static_cast<size_t>(w.indices[i])].color;
    return c;
}

double entropy(const std::vector<double>& w)
{
    double h = 0.0;
    for (double x : w)
        if (x > 0.0)
            h -= x * std::log(x);
    return h;
}

std::vector<WeightVector> AnalyticWeighter::weigh(const std::vector<TargetRay>&,
                                                  const std::vector<std::vector<Candidate>>& candidates,
                                                  const std::function<const SourceRayRecord&(int)>& sources) const
{
    std::vector<WeightVector> out;
    out.reserve(candidates.size());
    for (const auto& c : candidates)
        out.push_back(analytic_from(c, sources, cfg_));
    return out;
}

std::vector<WeightVector> LearnedWeighter::weigh(const std::vector<TargetRay>& targets,
                                                 const std::vector<std::vector<Candidate>>& candidates,
                                                 const std::function<const SourceRayRecord&(int)>& sources) const
{
    std::vector<std::vector<RayEmbedding>> sets;
    sets.reserve(candidates.size());
    for (size_t i = 0; i < candidates.size(); ++i) {
        std::vector<RayEmbedding> e;
        for (const Candidate& c : candidates[i])
            e.push_back(embed_ray(targets[i].ray, sources(c.index)));
        sets.push_back(std::move(e));
    }
    std::vector<WeightVector> out(candidates.size());
    // Bounded chunks keep the cached activations small.
    constexpr size_t chunk = 4096;
    for (size_t start = 0; start < sets.size(); start += chunk) {
        size_t end = std::min(sets.size(), start + chunk);
        std::vector<std::vector<RayEmbedding>> part(sets.begin() + static_cast<long>(start),
                                                    sets.begin() + static_cast<long>(end));
        TransformerPass pass(params_, part);
        for (size_t i = start; i < end; ++i) {
            out[i].weights = pass.weights()[i - start];
            for (const Candidate& c : candidates[i])
                out[i].indices.push_back(c.index);
        }
    }
    return out;
}

double SpecularWarp::profile_at(double rel) const
{
    double a = std::abs(rel);
    if (profile == Profile::quadratic)
        return radius > 0.0 ? (a / radius) * (a / radius) : 0.0;
    if (table.empty())
        return 0.0;
    int i = static_cast<int>(std::floor(a));
    if (i >= static_cast<int>(table.size()) - 1)
        return table.back();
    double t = a - i;
    return table[static_cast<size_t>(i)] * (1.0 - t) + table[static_cast<size_t>(i) + 1] * t;
}

namespace {

RenderResult render_records(const std::vector<SourceRayRecord>& records, ViewIndex target, const GridGeometry& g,
                            const Weighter& weighter, const RenderConfig& cfg)
{
    if (records.empty())
        throw DomainError("source set is empty");
    if (!g.has_view(target.v, target.u))
        throw DomainError("target view outside the grid");
    const int H = g.H(), W = g.W();
    const int k = weighter.k_sources();
    ProjectedIndex index(records, g, target.v, target.u);

    std::vector<TargetRay> targets(static_cast<size_t>(H) * W);
    std::vector<std::vector<Candidate>> cands(targets.size());
    auto select_rows = [&](int y0, int y1) {
        for (int y = y0; y < y1; ++y)
            for (int x = 0; x < W; ++x) {
                size_t i = static_cast<size_t>(y) * W + x;
                targets[i].slab = {static_cast<double>(x), static_cast<double>(y), static_cast<double>(target.u),
                                   static_cast<double>(target.v)};
                targets[i].ray = grid_ray(g, target.v, target.u, y, x);
                cands[i] = index.nearest(targets[i].slab, k);
            }
    };
    const int threads = std::max(1, std::min(cfg.threads, H));
    if (threads == 1) {
        select_rows(0, H);
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(select_rows, H * t / threads, H * (t + 1) / threads);
        for (auto& th : pool)
            th.join();
    }

    auto source = [&](int i) -> const SourceRayRecord& { return records[static_cast<size_t>(i)]; };
    std::vector<WeightVector> weights = weighter.weigh(targets, cands, source);

    RenderResult out;
    out.image = RgbImage(H, W, Rgb::Zero());
    out.entropy = ScalarField(H, W, 0.0);
    out.disparity = ScalarField(H, W, 0.0);
    out.dominant = Grid<int>(H, W, -1);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const WeightVector& w = weights[static_cast<size_t>(y) * W + x];
            Rgb c = Rgb::Zero();
            double d = 0.0, best = -1.0;
            for (size_t j = 0; j < w.weights.size(); ++j) {
                const SourceRayRecord& r = records[static_cast<size_t>(w.indices[j])];
                c += w.weights[j] * r.color;
                d += w.weights[j] * r.disparity();
                if (w.weights[j] > best) {
                    best = w.weights[j];
                    out.dominant.at(y, x) = w.indices[j];
                }
            }
            out.image.at(y, x) = c;
            out.entropy.at(y, x) = entropy(w.weights);
            out.disparity.at(y, x) = d;
        }
    out.weights = std::move(weights);
    return out;
}

} // namespace

RenderResult render_view(const SourceRaySet& s, ViewIndex target, const GridGeometry& g, const Weighter& weighter,
                         const RenderConfig& cfg)
{
    return render_records(s.records(), target, g, weighter, cfg);
}

RenderResult render_specular(const SourceRaySet& s, ViewIndex target, const GridGeometry& g, const SpecularWarp& warp,
                             const Weighter& weighter, const RenderConfig& cfg)
{
    if (warp.amplitude == 0.0)
        return render_view(s, target, g, weighter, cfg);
    std::vector<SourceRayRecord> displaced = s.records();
    for (SourceRayRecord& r : displaced) {
        if (!warp.region.empty()) {
            int ry = static_cast<int>(std::lround(r.slab.y)), rx = static_cast<int>(std::lround(r.slab.x));
            if (r.provenance != Provenance::input || !warp.region.contains(ry, rx) || !warp.region.at(ry, rx))
                continue;
        }
        r.slab.x += warp.amplitude * warp.profile_at(target.u - r.slab.u);
        r.slab.y += warp.amplitude * warp.profile_at(target.v - r.slab.v);
        r.ray = slab_to_plucker(g.plane_coord(r.slab.v, r.slab.u, r.slab.y, r.slab.x));
    }
    return render_records(displaced, target, g, weighter, cfg);
}

} // namespace iibr
