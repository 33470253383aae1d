// SPDX-License-Identifier: Apache-2.0
#include "attention/attention.hpp"

#include <cmath>
#include <limits>

namespace tfk {

std::string branch_name(Branch branch) {
    switch (branch) {
        case Branch::CliToDer: return "cli2der";
        case Branch::DerToCli: return "der2cli";
        case Branch::Meta: return "meta";
        case Branch::Self: return "self";
    }
    return "unknown";
}

template <typename Real>
AttentionParams<Real> AttentionParams<Real>::create(ParamStore<Real>& store, const std::string& prefix,
                                                    std::size_t dim, std::size_t heads, Rng& rng) {
    if (heads == 0 || dim % heads != 0) {
        throw ConfigError(prefix + ": channel count " + std::to_string(dim) + " not divisible by " +
                          std::to_string(heads) + " heads");
    }
    AttentionParams p;
    p.heads = heads;
    p.dim = dim;
    p.w_q = Linear<Real>::create(store, prefix + ".w_q", dim, dim, rng);
    p.w_k = Linear<Real>::create(store, prefix + ".w_k", dim, dim, rng);
    p.w_v = Linear<Real>::create(store, prefix + ".w_v", dim, dim, rng);
    p.w_out = Linear<Real>::create(store, prefix + ".w_out", dim, dim, rng);
    return p;
}

template <typename Real>
RelativeBias<Real> RelativeBias<Real>::create(ParamStore<Real>& store, const std::string& name, std::size_t window,
                                              std::size_t heads, Rng& rng) {
    RelativeBias b;
    b.window = window;
    b.heads = heads;
    const std::size_t span = 2 * window - 1;
    b.table = store.create(name, {span * span, heads}, Init::TruncNormal, rng);
    return b;
}

template <typename Real>
Tensor<Real> RelativeBias<Real>::materialize() const {
    const std::size_t n = window * window;
    const auto rel = relative_position_index(window);
    auto index = std::make_shared<std::vector<std::uint32_t>>(heads * n * n);
    for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t ij = 0; ij < n * n; ++ij)
            (*index)[h * n * n + ij] = static_cast<std::uint32_t>(rel[ij] * heads + h);
    return gather(table, index, {heads, n, n});
}

namespace {

// [G, n, C] -> [G, h, n, d]
template <typename Real>
Tensor<Real> split_heads(const Tensor<Real>& x, std::size_t heads) {
    const std::size_t g = x.dim(0), n = x.dim(1), c = x.dim(2);
    if (heads == 1) return reshape(x, {g, 1, n, c});
    return permute(reshape(x, {g, n, heads, c / heads}), {0, 2, 1, 3});
}

// [G, h, n, d] -> [G, n, C]
template <typename Real>
Tensor<Real> merge_heads(const Tensor<Real>& x) {
    const std::size_t g = x.dim(0), h = x.dim(1), n = x.dim(2), d = x.dim(3);
    if (h == 1) return reshape(x, {g, n, d});
    return reshape(permute(x, {0, 2, 1, 3}), {g, n, h * d});
}

}  // namespace

template <typename Real>
AttentionResult<Real> attend(const Tensor<Real>& q_src, const Tensor<Real>& k_src, const Tensor<Real>& v_src,
                             const AttentionParams<Real>& params, const Tensor<Real>& bias, const Tensor<Real>& mask) {
    if (q_src.rank() != 3 || k_src.rank() != 3 || v_src.rank() != 3) {
        throw DimensionError("attention inputs must be [groups, tokens, channels]");
    }
    if (k_src.dim(1) != v_src.dim(1) || k_src.dim(0) != v_src.dim(0)) {
        throw ContractError("attention: key rows " + shape_str(k_src.shape()) + " and value rows " +
                            shape_str(v_src.shape()) + " differ");
    }
    if (q_src.dim(0) != k_src.dim(0) || q_src.dim(2) != params.dim || k_src.dim(2) != params.dim ||
        v_src.dim(2) != params.dim) {
        throw ContractError("attention: query " + shape_str(q_src.shape()) + " / key " + shape_str(k_src.shape()) +
                            " incompatible with dim " + std::to_string(params.dim));
    }
    const std::size_t heads = params.heads;
    Tensor<Real> q = split_heads(params.w_q(q_src), heads);
    Tensor<Real> k = split_heads(params.w_k(k_src), heads);
    Tensor<Real> v = split_heads(params.w_v(v_src), heads);
    const Real inv_sqrt_d = Real(1) / std::sqrt(static_cast<Real>(params.head_dim()));
    Tensor<Real> logits = scale(matmul(q, k, true), inv_sqrt_d);
    if (bias.defined()) logits = add_broadcast(logits, bias);
    if (mask.defined()) {
        const std::size_t groups = logits.dim(0), windows = mask.dim(0);
        if (mask.rank() != 4 || windows == 0 || groups % windows != 0) {
            throw ContractError("attention: mask " + shape_str(mask.shape()) + " does not tile logits " +
                                shape_str(logits.shape()));
        }
        const Shape shape = logits.shape();
        logits = reshape(add_broadcast(reshape(logits, {groups / windows, windows, shape[1], shape[2], shape[3]}), mask),
                         shape);
    }
    AttentionResult<Real> result;
    result.weights = softmax(logits);
    result.output = params.w_out(merge_heads(matmul(result.weights, v)));
    result.key_rows = k_src.dim(1);
    return result;
}

template <typename Real>
AttentionResult<Real> wsa(const Tensor<Real>& q, const Tensor<Real>& k, const Tensor<Real>& v,
                          const AttentionParams<Real>& params, const RelativeBias<Real>* bias,
                          const Tensor<Real>& mask) {
    Tensor<Real> b;
    if (bias) {
        b = bias->materialize();
        if (b.dim(1) != q.dim(1) || b.dim(2) != k.dim(1)) {
            throw ContractError("wsa: bias for window " + std::to_string(bias->window) + " does not fit " +
                                shape_str(q.shape()));
        }
    }
    return attend(q, k, v, params, b, mask);
}

template <typename Real>
WmcaParams<Real> WmcaParams<Real>::create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim,
                                          std::size_t heads, std::size_t window, Rng& rng) {
    WmcaParams p;
    p.norm_own = LayerNorm<Real>::create(store, prefix + ".norm_own", dim, rng);
    p.norm_other = LayerNorm<Real>::create(store, prefix + ".norm_other", dim, rng);
    p.attn = AttentionParams<Real>::create(store, prefix + ".attn", dim, heads, rng);
    p.bias_own = RelativeBias<Real>::create(store, prefix + ".bias_own", window, heads, rng);
    p.bias_other = RelativeBias<Real>::create(store, prefix + ".bias_other", window, heads, rng);
    return p;
}

template <typename Real>
Tensor<Real> WmcaParams<Real>::materialize_bias() const {
    return concat(std::vector<Tensor<Real>>{bias_own.materialize(), bias_other.materialize()}, 2);
}

template <typename Real>
AttentionResult<Real> wmca(const Tensor<Real>& own, const Tensor<Real>& other, const WmcaParams<Real>& params,
                           const Tensor<Real>& mask) {
    if (own.shape() != other.shape()) {
        throw ContractError("wmca: modality windows differ " + shape_str(own.shape()) + " vs " +
                            shape_str(other.shape()));
    }
    const std::size_t n = params.bias_own.window * params.bias_own.window;
    if (own.rank() != 3 || own.dim(1) != n) {
        throw ContractError("wmca: expected windows of " + std::to_string(n) + " tokens, got " + shape_str(own.shape()));
    }
    Tensor<Real> q_src = params.norm_own(own);
    Tensor<Real> kv_src = concat(std::vector<Tensor<Real>>{q_src, params.norm_other(other)}, 1);
    return attend(q_src, kv_src, kv_src, params.attn, params.materialize_bias(), mask);
}

template <typename Real>
AttentionResult<Real> mca(const Tensor<Real>& query, const Tensor<Real>& kv, const AttentionParams<Real>& params) {
    if (query.rank() != 3 || kv.rank() != 3 || query.dim(2) != kv.dim(2) || query.dim(0) != kv.dim(0)) {
        throw ContractError("mca: query " + shape_str(query.shape()) + " incompatible with sequence " +
                            shape_str(kv.shape()));
    }
    if (kv.dim(1) == 0) throw ContractError("mca: empty key/value sequence");
    return attend(query, kv, kv, params);
}

template <typename Real>
Tensor<Real> attention_mask(std::size_t height, std::size_t width, std::size_t window, int dy, int dx,
                            std::size_t heads, std::size_t key_halves) {
    const auto pattern = shift_mask(height, width, window, dy, dx);
    const std::size_t windows = window_count(height, width, window);
    const std::size_t n = window * window;
    const std::size_t keys = n * key_halves;
    std::vector<Real> data(windows * heads * n * keys);
    const Real blocked = -std::numeric_limits<Real>::infinity();
    for (std::size_t w = 0; w < windows; ++w)
        for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t q = 0; q < n; ++q)
                for (std::size_t k = 0; k < keys; ++k)
                    data[((w * heads + h) * n + q) * keys + k] = pattern[(w * n + q) * n + k % n] ? blocked : Real(0);
    return Tensor<Real>({windows, heads, n, keys}, std::move(data));
}

int block_shift(std::size_t height, std::size_t width, std::size_t window, bool shifted) {
    if (!shifted || window >= std::min(height, width)) return 0;
    return static_cast<int>(window / 2);
}

template <typename Real>
WmsaBlock<Real> WmsaBlock<Real>::create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim,
                                        std::size_t heads, std::size_t window, bool shifted, double mlp_ratio,
                                        Rng& rng) {
    WmsaBlock b;
    b.window = window;
    b.shifted = shifted;
    b.norm1 = LayerNorm<Real>::create(store, prefix + ".norm1", dim, rng);
    b.attn = AttentionParams<Real>::create(store, prefix + ".attn", dim, heads, rng);
    b.bias = RelativeBias<Real>::create(store, prefix + ".rel_bias", window, heads, rng);
    b.norm2 = LayerNorm<Real>::create(store, prefix + ".norm2", dim, rng);
    b.mlp = Mlp<Real>::create(store, prefix + ".mlp", dim, mlp_ratio, rng);
    return b;
}

template <typename Real>
TokenGrid<Real> WmsaBlock<Real>::forward(const TokenGrid<Real>& grid, const ForwardContext& ctx) const {
    const int shift = block_shift(grid.height, grid.width, window, shifted);
    TokenGrid<Real> normed = cyclic_shift(grid.with_tokens(norm1(grid.tokens)), shift, shift);
    Tensor<Real> windows = window_partition(normed, window);
    Tensor<Real> mask;
    if (shift != 0) mask = attention_mask<Real>(grid.height, grid.width, window, shift, shift, attn.heads);
    auto res = wsa(windows, windows, windows, attn, &bias, mask);
    if (ctx.records) record_windowed(ctx, Branch::Self, res.weights, grid.height, grid.width, window, shift, shift);
    TokenGrid<Real> back = window_reverse(res.output, grid.batch, grid.height, grid.width, window);
    back = cyclic_shift(back, -shift, -shift);
    Tensor<Real> x = add(grid.tokens, back.tokens);
    x = add(x, mlp(norm2(x)));
    return grid.with_tokens(x);
}

template <typename Real>
void record_windowed(const ForwardContext& ctx, Branch branch, const Tensor<Real>& weights, std::size_t height,
                     std::size_t width, std::size_t window, int dy, int dx) {
    if (!ctx.records) return;
    const std::size_t windows = window_count(height, width, window);
    const std::size_t heads = weights.dim(1);
    const std::size_t n = weights.dim(2);
    const std::size_t keys = weights.dim(3);
    AttentionRecord rec;
    rec.stage = ctx.stage;
    rec.block = ctx.block;
    rec.branch = branch;
    rec.heads = heads;
    rec.queries = height * width;
    rec.keys = keys;
    rec.weights.assign(heads * rec.queries * keys, 0.0);
    auto wrap = [](long v, long e) { return static_cast<std::size_t>(((v % e) + e) % e); };
    const std::size_t wx_count = width / window;
    auto data = weights.data();
    for (std::size_t w = 0; w < windows; ++w)
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t y = (w / wx_count) * window + i / window;
            const std::size_t x = (w % wx_count) * window + i % window;
            const std::size_t pos = wrap(static_cast<long>(y) + dy, static_cast<long>(height)) * width +
                                    wrap(static_cast<long>(x) + dx, static_cast<long>(width));
            for (std::size_t h = 0; h < heads; ++h)
                for (std::size_t k = 0; k < keys; ++k)
                    rec.weights[(h * rec.queries + pos) * keys + k] =
                        static_cast<double>(data[((w * heads + h) * n + i) * keys + k]);
        }
    ctx.records->push_back(std::move(rec));
}

std::uint64_t wmsa_flops(std::uint64_t h_tokens, std::uint64_t w_tokens, std::uint64_t channels,
                         std::uint64_t window) {
    const std::uint64_t hw = h_tokens * w_tokens;
    return 4 * hw * channels * channels + 2 * window * window * hw * channels;
}

#define TFK_INSTANTIATE_ATTENTION(R)                                                                              \
    template struct AttentionParams<R>;                                                                           \
    template struct RelativeBias<R>;                                                                              \
    template struct WmcaParams<R>;                                                                                \
    template struct WmsaBlock<R>;                                                                                 \
    template AttentionResult<R> attend(const Tensor<R>&, const Tensor<R>&, const Tensor<R>&,                      \
                                       const AttentionParams<R>&, const Tensor<R>&, const Tensor<R>&);            \
    template AttentionResult<R> wsa(const Tensor<R>&, const Tensor<R>&, const Tensor<R>&,                         \
                                    const AttentionParams<R>&, const RelativeBias<R>*, const Tensor<R>&);         \
    template AttentionResult<R> wmca(const Tensor<R>&, const Tensor<R>&, const WmcaParams<R>&, const Tensor<R>&); \
    template AttentionResult<R> mca(const Tensor<R>&, const Tensor<R>&, const AttentionParams<R>&);               \
    template Tensor<R> attention_mask<R>(std::size_t, std::size_t, std::size_t, int, int, std::size_t,            \
                                         std::size_t);                                                            \
    template void record_windowed(const ForwardContext&, Branch, const Tensor<R>&, std::size_t, std::size_t,      \
                                  std::size_t, int, int);

TFK_INSTANTIATE_ATTENTION(float)
TFK_INSTANTIATE_ATTENTION(double)

}  // namespace tfk
