// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "backbone/backbone.hpp"

namespace tfk {

enum class Bridge { Sum, BackboneOnly };

struct HmtStackConfig {
    std::array<std::size_t, 4> stage_counts{1, 1, 1, 1};
    Bridge bridge = Bridge::Sum;
    bool shift = false;
    /// Single-branch ablation switches; both on is the dual-branch block.
    bool cli_to_der = true;
    bool der_to_cli = true;
    double mlp_ratio = 4.0;

    std::size_t total_blocks() const { return stage_counts[0] + stage_counts[1] + stage_counts[2] + stage_counts[3]; }
};

/// One direction of an HMT block: windowed cross-attention with residual,
/// then LN + MLP with residual.
template <typename Real>
struct HmtBranch {
    WmcaParams<Real> wmca;
    LayerNorm<Real> norm;
    Mlp<Real> mlp;

    static HmtBranch create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim, std::size_t heads,
                            std::size_t window, double mlp_ratio, Rng& rng);
};

template <typename Real>
struct HmtBlock {
    HmtBranch<Real> to_der;  // cli -> der: der tokens are the queries
    HmtBranch<Real> to_cli;  // der -> cli
    std::size_t window = 1;
    bool shifted = false;
    bool enable_to_der = true;
    bool enable_to_cli = true;

    static HmtBlock create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim, std::size_t heads,
                           std::size_t window, const HmtStackConfig& config, Rng& rng);

    /// Both branches read the same (der, cli) inputs.
    std::pair<TokenGrid<Real>, TokenGrid<Real>> forward(const TokenGrid<Real>& der, const TokenGrid<Real>& cli,
                                                        const ForwardContext& ctx = {}) const;
};

/// Merge callable used to carry an HMT output into the next stage's
/// resolution: (next_stage, grid) -> grid.
template <typename Real>
using StageMerge = std::function<TokenGrid<Real>(std::size_t, const TokenGrid<Real>&)>;

template <typename Real>
class HmtStack {
public:
    HmtStack(const HmtStackConfig& config, const BackboneConfig& backbone, ParamStore<Real>& store,
             const std::string& prefix, Rng& rng);

    /// Stage i input = backbone feature i, plus the merged carry of the
    /// previous stage's output once any earlier stage has fused (bridge =
    /// sum). Blocks within a stage chain. Returns the last stage's grids.
    std::pair<TokenGrid<Real>, TokenGrid<Real>> forward(const StageFeatures<Real>& der, const StageFeatures<Real>& cli,
                                                        const StageMerge<Real>& merge_der,
                                                        const StageMerge<Real>& merge_cli,
                                                        const ForwardContext& ctx = {}) const;

    std::size_t block_count() const;
    const HmtStackConfig& config() const { return config_; }
    const std::array<std::vector<HmtBlock<Real>>, 4>& stages() const { return stages_; }

private:
    HmtStackConfig config_;
    std::array<std::vector<HmtBlock<Real>>, 4> stages_;
};

/// Global average pool over tokens followed by a linear map.
template <typename Real>
struct Head {
    Linear<Real> fc;

    static Head create(ParamStore<Real>& store, const std::string& prefix, std::size_t channels, std::size_t dim,
                       Rng& rng);
    Tensor<Real> forward(const TokenGrid<Real>& grid) const { return fc(mean_axis(grid.tokens, 1)); }
};

/// Two-layer meta-data MLP: one-hot [B, n] -> [B, dim].
template <typename Real>
struct MetaMlp {
    Mlp<Real> mlp;

    static MetaMlp create(ParamStore<Real>& store, const std::string& prefix, std::size_t input, std::size_t dim,
                          Rng& rng);
    Tensor<Real> forward(const Tensor<Real>& onehot) const;
};

/// Post-fusion of image features into the meta feature. Keys and values are
/// the three tokens [f_meta0; f_cli; f_der].
template <typename Real>
struct MtpBlock {
    LayerNorm<Real> norm_meta;
    LayerNorm<Real> norm_image;
    AttentionParams<Real> attn;
    LayerNorm<Real> norm_mlp;
    Mlp<Real> mlp;

    static MtpBlock create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim, std::size_t heads,
                           double mlp_ratio, Rng& rng);
    /// All inputs [B, dim]; returns f_meta [B, dim].
    Tensor<Real> forward(const Tensor<Real>& f_meta0, const Tensor<Real>& f_cli, const Tensor<Real>& f_der,
                         const ForwardContext& ctx = {}) const;
    /// Cross-attention output plus residual, before the MLP sublayer.
    Tensor<Real> cross_attend(const Tensor<Real>& f_meta0, const Tensor<Real>& f_cli, const Tensor<Real>& f_der,
                              const ForwardContext& ctx = {}) const;
};

}  // namespace tfk
