#include "iibr/transformer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "iibr/error.hpp"
#include "iibr/geometry.hpp"

namespace iibr {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void AttentionConfig::validate() const
{
    if (d_model < 1 || heads < 1 || layers < 0 || k_sources < 1)
        throw DomainError("attention config: sizes must be positive");
    if (d_model % heads != 0)
        throw DomainError("attention config: d_model must be divisible by heads");
}

namespace {

constexpr double ln_eps = 1e-5;

std::vector<ParamTensor> layout(const AttentionConfig& c)
{
    const int D = c.d_model, F = ray_feature_size;
    std::vector<ParamTensor> t;
    auto add = [&](std::string name, int r, int k) { t.push_back({std::move(name), MatrixXd::Zero(r, k)}); };
    add("embed.w1", F, D);
    add("embed.b1", 1, D);
    add("embed.w2", D, D);
    add("embed.b2", 1, D);
    for (int l = 0; l < c.layers; ++l) {
        std::string p = "block" + std::to_string(l) + ".";
        add(p + "ln1.gain", 1, D);
        add(p + "ln1.bias", 1, D);
        add(p + "attn.wq", D, D);
        add(p + "attn.wk", D, D);
        add(p + "attn.wv", D, D);
        add(p + "attn.wo", D, D);
        add(p + "attn.bo", 1, D);
        add(p + "ln2.gain", 1, D);
        add(p + "ln2.bias", 1, D);
        add(p + "ff.w1", D, 2 * D);
        add(p + "ff.b1", 1, 2 * D);
        add(p + "ff.w2", 2 * D, D);
        add(p + "ff.b2", 1, D);
    }
    add("final_ln.gain", 1, D);
    add("final_ln.bias", 1, D);
    add("head.w", D, 1);
    add("head.b", 1, 1);
    return t;
}

bool ends_with(const std::string& s, const std::string& suffix)
{
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Box-Muller on raw engine output; std::normal_distribution is not portable.
class Normal {
public:
    explicit Normal(std::uint64_t seed) : eng_(seed) {}
    double operator()()
    {
        double u1 = (static_cast<double>(eng_() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = static_cast<double>(eng_() >> 11) * 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    std::mt19937_64 eng_;
};

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * M_SQRT1_2)); }
double gelu_grad(double x) { return 0.5 * (1.0 + std::erf(x * M_SQRT1_2)) + x * std::exp(-0.5 * x * x) * 0.3989422804014327; }

MatrixXd add_row(MatrixXd m, const MatrixXd& row)
{
    m.rowwise() += row.row(0);
    return m;
}

// Row-wise layer norm; returns gain * xhat + bias.
MatrixXd layer_norm(const MatrixXd& x, const MatrixXd& gain, const MatrixXd& bias, MatrixXd& xhat, VectorXd& rstd)
{
    const long n = x.rows(), d = x.cols();
    xhat.resize(n, d);
    rstd.resize(n);
    for (long i = 0; i < n; ++i) {
        double mu = x.row(i).mean();
        double var = (x.row(i).array() - mu).square().mean();
        rstd[i] = 1.0 / std::sqrt(var + ln_eps);
        xhat.row(i) = (x.row(i).array() - mu) * rstd[i];
    }
    MatrixXd y = xhat.array().rowwise() * gain.row(0).array();
    y.rowwise() += bias.row(0);
    return y;
}

MatrixXd layer_norm_backward(const MatrixXd& dy, const MatrixXd& xhat, const VectorXd& rstd, const MatrixXd& gain,
                             MatrixXd& dgain, MatrixXd& dbias)
{
    dgain.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
    dbias.row(0) += dy.colwise().sum();
    MatrixXd dxhat = dy.array().rowwise() * gain.row(0).array();
    MatrixXd dx(dy.rows(), dy.cols());
    for (long i = 0; i < dy.rows(); ++i) {
        double m1 = dxhat.row(i).mean();
        double m2 = (dxhat.row(i).array() * xhat.row(i).array()).mean();
        dx.row(i) = rstd[i] * (dxhat.row(i).array() - m1 - xhat.row(i).array() * m2);
    }
    return dx;
}

void require_finite(const MatrixXd& m, const std::string& where)
{
    if (!m.allFinite())
        throw NumericError("non-finite values in " + where);
}

} // namespace

RayTransformerParams::RayTransformerParams(const AttentionConfig& cfg) : cfg_(cfg), tensors_(layout(cfg))
{
    cfg.validate();
}

RayTransformerParams RayTransformerParams::initialize(const AttentionConfig& cfg, std::uint64_t seed)
{
    RayTransformerParams p(cfg);
    Normal normal(seed);
    for (ParamTensor& t : p.tensors_) {
        if (ends_with(t.name, ".gain")) {
            t.value.setOnes();
        } else if (ends_with(t.name, ".b") || ends_with(t.name, ".b1") || ends_with(t.name, ".b2") ||
                   ends_with(t.name, ".bo") || ends_with(t.name, ".bias")) {
            t.value.setZero();
        } else {
            for (long i = 0; i < t.value.size(); ++i) {
                double z;
                do
                    z = normal();
                while (std::abs(z) > 2.0);
                t.value.data()[i] = 0.02 * z;
            }
        }
    }
    p.round_to_float();
    return p;
}

size_t RayTransformerParams::parameter_count() const
{
    size_t n = 0;
    for (const auto& t : tensors_)
        n += static_cast<size_t>(t.value.size());
    return n;
}

MatrixXd& RayTransformerParams::get(const std::string& name)
{
    for (auto& t : tensors_)
        if (t.name == name)
            return t.value;
    throw DomainError("no parameter named " + name);
}

const MatrixXd& RayTransformerParams::get(const std::string& name) const
{
    for (const auto& t : tensors_)
        if (t.name == name)
            return t.value;
    throw DomainError("no parameter named " + name);
}

bool RayTransformerParams::compatible(const RayTransformerParams& o) const
{
    if (!(cfg_ == o.cfg_) || tensors_.size() != o.tensors_.size())
        return false;
    for (size_t i = 0; i < tensors_.size(); ++i)
        if (tensors_[i].name != o.tensors_[i].name || tensors_[i].value.rows() != o.tensors_[i].value.rows() ||
            tensors_[i].value.cols() != o.tensors_[i].value.cols())
            return false;
    return true;
}

void RayTransformerParams::round_to_float()
{
    for (auto& t : tensors_)
        for (long i = 0; i < t.value.size(); ++i)
            t.value.data()[i] = static_cast<double>(static_cast<float>(t.value.data()[i]));
}

void RayTransformerParams::set_zero()
{
    for (auto& t : tensors_)
        t.value.setZero();
}

bool RayTransformerParams::operator==(const RayTransformerParams& o) const
{
    if (!compatible(o))
        return false;
    for (size_t i = 0; i < tensors_.size(); ++i)
        if (tensors_[i].value != o.tensors_[i].value)
            return false;
    return true;
}

std::array<double, ray_feature_size> ray_features(const RayEmbedding& e)
{
    PluckerRay tgt{Vec3(e[0], e[1], e[2]), Vec3(e[3], e[4], e[5])};
    PluckerRay src{Vec3(e[6], e[7], e[8]), Vec3(e[9], e[10], e[11])};
    LightSlabCoord t = plucker_to_slab(tgt), s = plucker_to_slab(src);
    const double disp_x = e[12], disp_y = e[13];
    const double du = t.u - s.u, dv = t.v - s.v;
    const double dx = s.x + disp_x * du - t.x;
    const double dy = s.y + disp_y * dv - t.y;
    return {dx, dy, std::abs(dx) + std::abs(dy), disp_x, disp_y, du, dv};
}

TransformerPass::TransformerPass(const RayTransformerParams& params, const std::vector<std::vector<RayEmbedding>>& sets)
    : params_(params)
{
    const AttentionConfig& cfg = params.config();
    const int D = cfg.d_model, H = cfg.heads, dh = D / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    int total = 0;
    for (const auto& s : sets) {
        if (s.empty())
            throw DomainError("transformer input set is empty");
        if (static_cast<int>(s.size()) > cfg.k_sources)
            throw DomainError("transformer input set larger than k_sources (" + std::to_string(s.size()) + " > " +
                              std::to_string(cfg.k_sources) + ")");
        offsets_.push_back(total);
        total += static_cast<int>(s.size());
    }
    offsets_.push_back(total);

    x0_.resize(total, ray_feature_size);
    order_.resize(sets.size());
    for (size_t si = 0; si < sets.size(); ++si) {
        const auto& s = sets[si];
        auto& ord = order_[si];
        ord.resize(s.size());
        std::iota(ord.begin(), ord.end(), 0);
        std::stable_sort(ord.begin(), ord.end(), [&](int a, int b) { return s[static_cast<size_t>(a)] < s[static_cast<size_t>(b)]; });
        for (size_t j = 0; j < s.size(); ++j) {
            auto f = ray_features(s[static_cast<size_t>(ord[j])]);
            for (int c = 0; c < ray_feature_size; ++c)
                x0_(offsets_[si] + static_cast<long>(j), c) = f[static_cast<size_t>(c)];
        }
    }

    a1_ = add_row(x0_ * params.get("embed.w1"), params.get("embed.b1"));
    g1_ = a1_.unaryExpr(&gelu);
    MatrixXd x = add_row(g1_ * params.get("embed.w2"), params.get("embed.b2"));

    blocks_.resize(static_cast<size_t>(cfg.layers));
    for (int l = 0; l < cfg.layers; ++l) {
        const std::string p = "block" + std::to_string(l) + ".";
        Block& b = blocks_[static_cast<size_t>(l)];
        b.x_in = x;
        b.z1 = layer_norm(x, params.get(p + "ln1.gain"), params.get(p + "ln1.bias"), b.xhat1, b.rstd1);
        b.q = b.z1 * params.get(p + "attn.wq");
        b.k = b.z1 * params.get(p + "attn.wk");
        b.v = b.z1 * params.get(p + "attn.wv");
        b.o = MatrixXd::Zero(total, D);
        b.probs.resize(sets.size() * static_cast<size_t>(H));
        for (size_t si = 0; si < sets.size(); ++si) {
            const int o = offsets_[si], n = offsets_[si + 1] - offsets_[si];
            for (int h = 0; h < H; ++h) {
                MatrixXd s = b.q.block(o, h * dh, n, dh) * b.k.block(o, h * dh, n, dh).transpose() * scale;
                for (int i = 0; i < n; ++i) {
                    double mx = s.row(i).maxCoeff();
                    s.row(i) = (s.row(i).array() - mx).exp();
                    s.row(i) /= s.row(i).sum();
                }
                b.o.block(o, h * dh, n, dh) = s * b.v.block(o, h * dh, n, dh);
                b.probs[si * static_cast<size_t>(H) + static_cast<size_t>(h)] = std::move(s);
            }
        }
        x = x + add_row(b.o * params.get(p + "attn.wo"), params.get(p + "attn.bo"));
        b.x_mid = x;
        b.z2 = layer_norm(x, params.get(p + "ln2.gain"), params.get(p + "ln2.bias"), b.xhat2, b.rstd2);
        b.f1 = add_row(b.z2 * params.get(p + "ff.w1"), params.get(p + "ff.b1"));
        b.g = b.f1.unaryExpr(&gelu);
        x = x + add_row(b.g * params.get(p + "ff.w2"), params.get(p + "ff.b2"));
        require_finite(x, "block " + std::to_string(l));
    }

    xf_ = x;
    MatrixXd zf = layer_norm(x, params.get("final_ln.gain"), params.get("final_ln.bias"), xhatf_, rstdf_);
    scores_ = zf * params.get("head.w");
    scores_.array() += params.get("head.b")(0, 0);
    require_finite(scores_, "head");

    w_.resize(total);
    weights_.resize(sets.size());
    for (size_t si = 0; si < sets.size(); ++si) {
        const int o = offsets_[si], n = offsets_[si + 1] - offsets_[si];
        double mx = scores_.segment(o, n).maxCoeff();
        double sum = 0.0;
        for (int i = 0; i < n; ++i) {
            w_[o + i] = std::exp(scores_[o + i] - mx);
            sum += w_[o + i];
        }
        weights_[si].resize(static_cast<size_t>(n));
        for (int i = 0; i < n; ++i) {
            w_[o + i] /= sum;
            weights_[si][static_cast<size_t>(order_[si][static_cast<size_t>(i)])] = w_[o + i];
        }
    }
}

void TransformerPass::backward(const std::vector<std::vector<double>>& grad_weights, RayTransformerParams& grads) const
{
    if (grad_weights.size() != order_.size())
        throw DomainError("gradient batch size mismatch");
    if (!grads.compatible(params_))
        throw DomainError("gradient container shape mismatch");
    const AttentionConfig& cfg = params_.config();
    const int D = cfg.d_model, H = cfg.heads, dh = D / H;
    const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
    const long total = xf_.rows();

    // Softmax over each set.
    VectorXd ds(total);
    for (size_t si = 0; si < order_.size(); ++si) {
        const int o = offsets_[si], n = offsets_[si + 1] - offsets_[si];
        if (static_cast<int>(grad_weights[si].size()) != n)
            throw DomainError("gradient set size mismatch");
        double dot = 0.0;
        for (int i = 0; i < n; ++i)
            dot += w_[o + i] * grad_weights[si][static_cast<size_t>(order_[si][static_cast<size_t>(i)])];
        for (int i = 0; i < n; ++i)
            ds[o + i] = w_[o + i] * (grad_weights[si][static_cast<size_t>(order_[si][static_cast<size_t>(i)])] - dot);
    }

    MatrixXd zf = xhatf_.array().rowwise() * params_.get("final_ln.gain").row(0).array();
    zf.rowwise() += params_.get("final_ln.bias").row(0);
    grads.get("head.w") += zf.transpose() * ds;
    grads.get("head.b")(0, 0) += ds.sum();
    MatrixXd dzf = ds * params_.get("head.w").transpose();
    MatrixXd dx = layer_norm_backward(dzf, xhatf_, rstdf_, params_.get("final_ln.gain"), grads.get("final_ln.gain"),
                                      grads.get("final_ln.bias"));
    require_finite(dx, "final layer norm gradient");

    for (int l = cfg.layers - 1; l >= 0; --l) {
        const std::string p = "block" + std::to_string(l) + ".";
        const Block& b = blocks_[static_cast<size_t>(l)];

        // Feed-forward residual branch.
        grads.get(p + "ff.w2") += b.g.transpose() * dx;
        grads.get(p + "ff.b2").row(0) += dx.colwise().sum();
        MatrixXd df1 = (dx * params_.get(p + "ff.w2").transpose()).array() * b.f1.unaryExpr(&gelu_grad).array();
        grads.get(p + "ff.w1") += b.z2.transpose() * df1;
        grads.get(p + "ff.b1").row(0) += df1.colwise().sum();
        MatrixXd dz2 = df1 * params_.get(p + "ff.w1").transpose();
        dx += layer_norm_backward(dz2, b.xhat2, b.rstd2, params_.get(p + "ln2.gain"), grads.get(p + "ln2.gain"),
                                  grads.get(p + "ln2.bias"));

        // Attention residual branch.
        grads.get(p + "attn.wo") += b.o.transpose() * dx;
        grads.get(p + "attn.bo").row(0) += dx.colwise().sum();
        MatrixXd dO = dx * params_.get(p + "attn.wo").transpose();
        MatrixXd dq = MatrixXd::Zero(total, D), dk = MatrixXd::Zero(total, D), dv = MatrixXd::Zero(total, D);
        for (size_t si = 0; si < order_.size(); ++si) {
            const int o = offsets_[si], n = offsets_[si + 1] - offsets_[si];
            for (int h = 0; h < H; ++h) {
                const MatrixXd& P = b.probs[si * static_cast<size_t>(H) + static_cast<size_t>(h)];
                MatrixXd dOb = dO.block(o, h * dh, n, dh);
                MatrixXd dP = dOb * b.v.block(o, h * dh, n, dh).transpose();
                dv.block(o, h * dh, n, dh) = P.transpose() * dOb;
                MatrixXd dS(n, n);
                for (int i = 0; i < n; ++i) {
                    double dot = P.row(i).dot(dP.row(i));
                    dS.row(i) = P.row(i).array() * (dP.row(i).array() - dot);
                }
                dS *= scale;
                dq.block(o, h * dh, n, dh) = dS * b.k.block(o, h * dh, n, dh);
                dk.block(o, h * dh, n, dh) = dS.transpose() * b.q.block(o, h * dh, n, dh);
            }
        }
        grads.get(p + "attn.wq") += b.z1.transpose() * dq;
        grads.get(p + "attn.wk") += b.z1.transpose() * dk;
        grads.get(p + "attn.wv") += b.z1.transpose() * dv;
        MatrixXd dz1 = dq * params_.get(p + "attn.wq").transpose() + dk * params_.get(p + "attn.wk").transpose() +
                       dv * params_.get(p + "attn.wv").transpose();
        dx += layer_norm_backward(dz1, b.xhat1, b.rstd1, params_.get(p + "ln1.gain"), grads.get(p + "ln1.gain"),
                                  grads.get(p + "ln1.bias"));
        require_finite(dx, "block " + std::to_string(l) + " gradient");
    }

    grads.get("embed.w2") += g1_.transpose() * dx;
    grads.get("embed.b2").row(0) += dx.colwise().sum();
    MatrixXd da1 = (dx * params_.get("embed.w2").transpose()).array() * a1_.unaryExpr(&gelu_grad).array();
    grads.get("embed.w1") += x0_.transpose() * da1;
    grads.get("embed.b1").row(0) += da1.colwise().sum();
    require_finite(da1, "embedding gradient");
}

std::vector<double> transformer_weights(const RayTransformerParams& params, const std::vector<RayEmbedding>& set)
{
    TransformerPass pass(params, {set});
    return pass.weights()[0];
}

} // namespace iibr
