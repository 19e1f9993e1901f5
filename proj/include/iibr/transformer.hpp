#pragma once

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace iibr {

/// [target ray (d, m) | source ray (d, m) | disp_x | disp_y]
inline constexpr int embedding_size = 14;
using RayEmbedding = std::array<double, embedding_size>;

/// Relative ray-pair features derived from a RayEmbedding before the
/// embedding MLP: reprojection offsets (dx, dy), their L1 norm, the two
/// disparities and the angular baseline (du, dv). Bumped if the layout changes.
inline constexpr int ray_feature_version = 1;
inline constexpr int ray_feature_size = 7;

struct AttentionConfig {
    int d_model = 64;
    int heads = 4;
    int layers = 2;
    int k_sources = 5;

    void validate() const;
    friend bool operator==(const AttentionConfig&, const AttentionConfig&) = default;
};

/// One named parameter array. Vectors are stored as 1 x n.
struct ParamTensor {
    std::string name;
    Eigen::MatrixXd value;
};

/// Trainable parameters of the ray transformer. Values are always exactly
/// representable as float32 so checkpoints round-trip bit-exactly.
class RayTransformerParams {
public:
    RayTransformerParams() = default;
    /// Zero-filled parameters with the shapes `cfg` implies.
    explicit RayTransformerParams(const AttentionConfig& cfg);

    /// Truncated normal (std 0.02, cut at 2 std) weights, unit norm gains, zero biases.
    static RayTransformerParams initialize(const AttentionConfig& cfg, std::uint64_t seed);

    const AttentionConfig& config() const { return cfg_; }
    std::vector<ParamTensor>& tensors() { return tensors_; }
    const std::vector<ParamTensor>& tensors() const { return tensors_; }
    size_t parameter_count() const;

    Eigen::MatrixXd& get(const std::string& name);
    const Eigen::MatrixXd& get(const std::string& name) const;

    /// Same config and tensor shapes.
    bool compatible(const RayTransformerParams& o) const;
    void round_to_float();
    void set_zero();

    bool operator==(const RayTransformerParams& o) const;

private:
    AttentionConfig cfg_;
    std::vector<ParamTensor> tensors_;
};

/// Features fed to the embedding MLP.
std::array<double, ray_feature_size> ray_features(const RayEmbedding& e);

/// Forward pass over a batch of candidate sets with everything needed for
/// the backward pass. Each set is processed in a canonical (lexicographic)
/// element order so results are bit-identical under input permutation.
class TransformerPass {
public:
    TransformerPass(const RayTransformerParams& params, const std::vector<std::vector<RayEmbedding>>& sets);

    /// Softmax weights per set, in the caller's element order.
    const std::vector<std::vector<double>>& weights() const { return weights_; }

    /// Accumulates d(loss)/d(params) into `grads` given d(loss)/d(weights).
    void backward(const std::vector<std::vector<double>>& grad_weights, RayTransformerParams& grads) const;

private:
    struct Block {
        Eigen::MatrixXd x_in, xhat1, z1, q, k, v, o, x_mid, xhat2, z2, f1, g;
        std::vector<Eigen::MatrixXd> probs; // [set * heads + head], n x n
        Eigen::VectorXd rstd1, rstd2;
    };

    const RayTransformerParams& params_;
    std::vector<int> offsets_;            // set starts in the flattened batch
    std::vector<std::vector<int>> order_; // canonical position -> caller index
    Eigen::MatrixXd x0_, a1_, g1_, xf_, xhatf_;
    Eigen::VectorXd rstdf_, scores_, w_;
    std::vector<Block> blocks_;
    std::vector<std::vector<double>> weights_;
};

/// Convenience: weights for a single candidate set.
std::vector<double> transformer_weights(const RayTransformerParams& params, const std::vector<RayEmbedding>& set);

} // namespace iibr
