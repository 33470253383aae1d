// SPDX-License-Identifier: Apache-2.0
#include "fusion/fusion.hpp"

namespace tfk {

template <typename Real>
HmtBranch<Real> HmtBranch<Real>::create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim,
                                        std::size_t heads, std::size_t window, double mlp_ratio, Rng& rng) {
    HmtBranch b;
    b.wmca = WmcaParams<Real>::create(store, prefix + ".wmca", dim, heads, window, rng);
    b.norm = LayerNorm<Real>::create(store, prefix + ".norm", dim, rng);
    b.mlp = Mlp<Real>::create(store, prefix + ".mlp", dim, mlp_ratio, rng);
    return b;
}

template <typename Real>
HmtBlock<Real> HmtBlock<Real>::create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim,
                                      std::size_t heads, std::size_t window, const HmtStackConfig& config, Rng& rng) {
    HmtBlock b;
    b.window = window;
    b.shifted = config.shift;
    b.enable_to_der = config.cli_to_der;
    b.enable_to_cli = config.der_to_cli;
    b.to_der = HmtBranch<Real>::create(store, prefix + ".cli2der", dim, heads, window, config.mlp_ratio, rng);
    b.to_cli = HmtBranch<Real>::create(store, prefix + ".der2cli", dim, heads, window, config.mlp_ratio, rng);
    return b;
}

namespace {

template <typename Real>
TokenGrid<Real> run_branch(const HmtBranch<Real>& branch, const TokenGrid<Real>& own, const Tensor<Real>& own_windows,
                           const Tensor<Real>& other_windows, std::size_t window, int shift, const Tensor<Real>& mask,
                           Branch tag, const ForwardContext& ctx) {
    auto res = wmca(own_windows, other_windows, branch.wmca, mask);
    if (ctx.wmca_key_rows) ctx.wmca_key_rows->push_back(res.key_rows);
    if (ctx.records) record_windowed(ctx, tag, res.weights, own.height, own.width, window, shift, shift);
    TokenGrid<Real> back = window_reverse(res.output, own.batch, own.height, own.width, window);
    back = cyclic_shift(back, -shift, -shift);
    Tensor<Real> fused = add(back.tokens, own.tokens);
    Tensor<Real> out = add(branch.mlp(branch.norm(fused)), fused);
    return own.with_tokens(out);
}

}  // namespace

template <typename Real>
std::pair<TokenGrid<Real>, TokenGrid<Real>> HmtBlock<Real>::forward(const TokenGrid<Real>& der,
                                                                    const TokenGrid<Real>& cli,
                                                                    const ForwardContext& ctx) const {
    if (der.height != cli.height || der.width != cli.width || der.channels != cli.channels || der.batch != cli.batch) {
        throw FusionError("hmt_block: modality grids differ (" + shape_str(der.tokens.shape()) + " vs " +
                          shape_str(cli.tokens.shape()) + ")");
    }
    const int shift = block_shift(der.height, der.width, window, shifted);
    Tensor<Real> der_windows = window_partition(cyclic_shift(der, shift, shift), window);
    Tensor<Real> cli_windows = window_partition(cyclic_shift(cli, shift, shift), window);
    Tensor<Real> mask;
    if (shift != 0) mask = attention_mask<Real>(der.height, der.width, window, shift, shift, to_der.wmca.attn.heads, 2);
    TokenGrid<Real> der_out = enable_to_der
                                  ? run_branch(to_der, der, der_windows, cli_windows, window, shift, mask,
                                               Branch::CliToDer, ctx)
                                  : der;
    TokenGrid<Real> cli_out = enable_to_cli
                                  ? run_branch(to_cli, cli, cli_windows, der_windows, window, shift, mask,
                                               Branch::DerToCli, ctx)
                                  : cli;
    return {der_out, cli_out};
}

template <typename Real>
HmtStack<Real>::HmtStack(const HmtStackConfig& config, const BackboneConfig& backbone, ParamStore<Real>& store,
                         const std::string& prefix, Rng& rng)
    : config_(config) {
    if (!config.cli_to_der && !config.der_to_cli) throw ConfigError("fusion: at least one HMT branch must be enabled");
    for (std::size_t s = 0; s < 4; ++s) {
        for (std::size_t j = 0; j < config.stage_counts[s]; ++j) {
            stages_[s].push_back(HmtBlock<Real>::create(
                store, prefix + ".stage" + std::to_string(s + 1) + ".block" + std::to_string(j),
                backbone.stage_channels(s), backbone.stage_heads[s], backbone.stage_window(s), config, rng));
        }
    }
}

template <typename Real>
std::size_t HmtStack<Real>::block_count() const {
    std::size_t n = 0;
    for (const auto& s : stages_) n += s.size();
    return n;
}

template <typename Real>
std::pair<TokenGrid<Real>, TokenGrid<Real>> HmtStack<Real>::forward(const StageFeatures<Real>& der,
                                                                    const StageFeatures<Real>& cli,
                                                                    const StageMerge<Real>& merge_der,
                                                                    const StageMerge<Real>& merge_cli,
                                                                    const ForwardContext& ctx) const {
    TokenGrid<Real> der_x, cli_x;
    bool carrying = false;
    for (std::size_t s = 0; s < 4; ++s) {
        if (carrying && config_.bridge == Bridge::Sum) {
            der_x = der[s].with_tokens(add(der[s].tokens, merge_der(s, der_x).tokens));
            cli_x = cli[s].with_tokens(add(cli[s].tokens, merge_cli(s, cli_x).tokens));
        } else {
            der_x = der[s];
            cli_x = cli[s];
        }
        for (std::size_t j = 0; j < stages_[s].size(); ++j) {
            ForwardContext local = ctx;
            local.stage = static_cast<int>(s + 1);
            local.block = static_cast<int>(j);
            std::tie(der_x, cli_x) = stages_[s][j].forward(der_x, cli_x, local);
        }
        carrying = carrying || !stages_[s].empty();
    }
    return {der_x, cli_x};
}

template <typename Real>
Head<Real> Head<Real>::create(ParamStore<Real>& store, const std::string& prefix, std::size_t channels,
                              std::size_t dim, Rng& rng) {
    Head h;
    h.fc = Linear<Real>::create(store, prefix + ".fc", channels, dim, rng);
    return h;
}

template <typename Real>
MetaMlp<Real> MetaMlp<Real>::create(ParamStore<Real>& store, const std::string& prefix, std::size_t input,
                                    std::size_t dim, Rng& rng) {
    MetaMlp m;
    m.mlp = Mlp<Real>::create(store, prefix, input, dim, dim, rng);
    return m;
}

template <typename Real>
Tensor<Real> MetaMlp<Real>::forward(const Tensor<Real>& onehot) const {
    if (onehot.rank() != 2 || onehot.dim(1) != mlp.fc1.weight.dim(0)) {
        throw DimensionError("meta_mlp expects [batch, " + std::to_string(mlp.fc1.weight.dim(0)) + "], got " +
                             shape_str(onehot.shape()));
    }
    return mlp(onehot);
}

template <typename Real>
MtpBlock<Real> MtpBlock<Real>::create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim,
                                      std::size_t heads, double mlp_ratio, Rng& rng) {
    MtpBlock b;
    b.norm_meta = LayerNorm<Real>::create(store, prefix + ".norm_meta", dim, rng);
    b.norm_image = LayerNorm<Real>::create(store, prefix + ".norm_image", dim, rng);
    b.attn = AttentionParams<Real>::create(store, prefix + ".attn", dim, heads, rng);
    b.norm_mlp = LayerNorm<Real>::create(store, prefix + ".norm_mlp", dim, rng);
    b.mlp = Mlp<Real>::create(store, prefix + ".mlp", dim, mlp_ratio, rng);
    return b;
}

template <typename Real>
Tensor<Real> MtpBlock<Real>::cross_attend(const Tensor<Real>& f_meta0, const Tensor<Real>& f_cli,
                                          const Tensor<Real>& f_der, const ForwardContext& ctx) const {
    if (f_meta0.shape() != f_cli.shape() || f_meta0.shape() != f_der.shape() || f_meta0.rank() != 2 ||
        f_meta0.dim(1) != attn.dim) {
        throw FusionError("mtp_block: feature shapes differ (" + shape_str(f_meta0.shape()) + ", " +
                          shape_str(f_cli.shape()) + ", " + shape_str(f_der.shape()) + ")");
    }
    const std::size_t b = f_meta0.dim(0), d = f_meta0.dim(1);
    Tensor<Real> query = norm_meta(reshape(f_meta0, {b, 1, d}));
    Tensor<Real> image = norm_image(concat(std::vector<Tensor<Real>>{reshape(f_cli, {b, 1, d}), reshape(f_der, {b, 1, d})}, 1));
    Tensor<Real> kv = concat(std::vector<Tensor<Real>>{query, image}, 1);
    auto res = mca(query, kv, attn);
    if (ctx.records) {
        AttentionRecord rec;
        rec.stage = 0;
        rec.block = 0;
        rec.branch = Branch::Meta;
        rec.heads = attn.heads;
        rec.queries = 1;
        rec.keys = 3;
        auto w = res.weights.data();
        rec.weights.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(attn.heads * 3));
        ctx.records->push_back(std::move(rec));
    }
    return add(reshape(res.output, {b, d}), f_meta0);
}

template <typename Real>
Tensor<Real> MtpBlock<Real>::forward(const Tensor<Real>& f_meta0, const Tensor<Real>& f_cli, const Tensor<Real>& f_der,
                                     const ForwardContext& ctx) const {
    Tensor<Real> ca = cross_attend(f_meta0, f_cli, f_der, ctx);
    return add(mlp(norm_mlp(ca)), ca);
}

template struct HmtBranch<float>;
template struct HmtBranch<double>;
template struct HmtBlock<float>;
template struct HmtBlock<double>;
template class HmtStack<float>;
template class HmtStack<double>;
template struct Head<float>;
template struct Head<double>;
template struct MetaMlp<float>;
template struct MetaMlp<double>;
template struct MtpBlock<float>;
template struct MtpBlock<double>;

}  // namespace tfk
