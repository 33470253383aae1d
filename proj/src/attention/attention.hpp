// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attention/window.hpp"
#include "core/nn.hpp"

namespace tfk {

enum class Branch { CliToDer, DerToCli, Meta, Self };

std::string branch_name(Branch branch);

/// Attention weights captured during a recording-enabled forward, for the
/// first sample of the batch. `weights` is [heads, queries, keys]; for
/// windowed kernels the query axis is the grid position (row-major, in the
/// unshifted frame) and the key axis is the in-window key slot.
struct AttentionRecord {
    int stage = 0;
    int block = 0;
    Branch branch = Branch::Self;
    std::size_t heads = 0;
    std::size_t queries = 0;
    std::size_t keys = 0;
    std::vector<double> weights;

    double at(std::size_t head, std::size_t query, std::size_t key) const {
        return weights[(head * queries + query) * keys + key];
    }
};

/// Per-forward side channel: optional attention recording and a probe of the
/// key/value row counts seen by every windowed cross-attention call.
struct ForwardContext {
    std::vector<AttentionRecord>* records = nullptr;
    std::vector<std::size_t>* wmca_key_rows = nullptr;
    int stage = 0;
    int block = 0;
};

template <typename Real>
struct AttentionParams {
    std::size_t heads = 1;
    std::size_t dim = 0;
    Linear<Real> w_q, w_k, w_v, w_out;

    static AttentionParams create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim,
                                  std::size_t heads, Rng& rng);
    std::size_t head_dim() const { return dim / heads; }
};

/// Learned per-head bias indexed by in-window relative displacement.
template <typename Real>
struct RelativeBias {
    std::size_t window = 1;
    std::size_t heads = 1;
    Tensor<Real> table;  // [(2M-1)^2, heads]

    static RelativeBias create(ParamStore<Real>& store, const std::string& name, std::size_t window,
                               std::size_t heads, Rng& rng);
    /// B in [heads, M*M, M*M].
    Tensor<Real> materialize() const;
};

template <typename Real>
struct AttentionResult {
    Tensor<Real> output;   // [groups, queries, C]
    Tensor<Real> weights;  // [groups, heads, queries, keys]
    std::size_t key_rows = 0;
};

/// Multi-head scaled dot-product attention over independent groups
/// (windows or samples): softmax(Q K^T / sqrt(C/h) + bias + mask) V, heads
/// concatenated, then output-projected. `bias` is [h, n, m] shared by all
/// groups; `mask` is [G, h, n, m] repeating over leading groups.
template <typename Real>
AttentionResult<Real> attend(const Tensor<Real>& q_src, const Tensor<Real>& k_src, const Tensor<Real>& v_src,
                             const AttentionParams<Real>& params, const Tensor<Real>& bias = {},
                             const Tensor<Real>& mask = {});

/// Window self-attention on per-window token sets [windows, M*M, C].
template <typename Real>
AttentionResult<Real> wsa(const Tensor<Real>& q, const Tensor<Real>& k, const Tensor<Real>& v,
                          const AttentionParams<Real>& params, const RelativeBias<Real>* bias,
                          const Tensor<Real>& mask = {});

/// Windowed cross-attention parameters for one direction of fusion.
template <typename Real>
struct WmcaParams {
    LayerNorm<Real> norm_own;
    LayerNorm<Real> norm_other;
    AttentionParams<Real> attn;
    RelativeBias<Real> bias_own;
    RelativeBias<Real> bias_other;

    static WmcaParams create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim,
                             std::size_t heads, std::size_t window, Rng& rng);
    /// B' in [heads, M*M, 2*M*M]: own-half table then other-half table.
    Tensor<Real> materialize_bias() const;
};

/// Window cross-attention: queries from LN(own), keys and values from the
/// row concatenation [LN(own); LN(other)] of spatially matching windows.
template <typename Real>
AttentionResult<Real> wmca(const Tensor<Real>& own, const Tensor<Real>& other, const WmcaParams<Real>& params,
                           const Tensor<Real>& mask = {});

/// Cross-attention of a vector-token query over a token sequence; no
/// positional bias. query [B, 1, D], kv [B, n, D].
template <typename Real>
AttentionResult<Real> mca(const Tensor<Real>& query, const Tensor<Real>& kv, const AttentionParams<Real>& params);

/// Additive -inf mask [nW, heads, n, keys_per_window] for a shifted grid;
/// `key_halves` repeats the key pattern (2 for cross-attention).
template <typename Real>
Tensor<Real> attention_mask(std::size_t height, std::size_t width, std::size_t window, int dy, int dx,
                            std::size_t heads, std::size_t key_halves = 1);

/// Swin block: LN, (shift), window attention, (unshift), residual, LN, MLP,
/// residual.
template <typename Real>
struct WmsaBlock {
    LayerNorm<Real> norm1;
    AttentionParams<Real> attn;
    RelativeBias<Real> bias;
    LayerNorm<Real> norm2;
    Mlp<Real> mlp;
    std::size_t window = 1;
    bool shifted = false;

    static WmsaBlock create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim, std::size_t heads,
                            std::size_t window, bool shifted, double mlp_ratio, Rng& rng);
    TokenGrid<Real> forward(const TokenGrid<Real>& grid, const ForwardContext& ctx = {}) const;
};

/// Shift offset used by a block over a grid (0 when the window covers it).
int block_shift(std::size_t height, std::size_t width, std::size_t window, bool shifted);

/// Records first-sample window attention as a grid-indexed AttentionRecord.
template <typename Real>
void record_windowed(const ForwardContext& ctx, Branch branch, const Tensor<Real>& weights, std::size_t height,
                     std::size_t width, std::size_t window, int dy, int dx);

/// 4 h w C^2 + 2 M^2 h w C.
std::uint64_t wmsa_flops(std::uint64_t h_tokens, std::uint64_t w_tokens, std::uint64_t channels,
                         std::uint64_t window);

}  // namespace tfk
