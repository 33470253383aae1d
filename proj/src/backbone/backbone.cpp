// SPDX-License-Identifier: Apache-2.0
#include "backbone/backbone.hpp"

namespace tfk {

void BackboneConfig::validate() const {
    if (patch_size == 0) throw ConfigError("backbone.patch_size must be positive");
    if (base_channels == 0) throw ConfigError("backbone.base_channels must be positive");
    if (window == 0) throw ConfigError("backbone.window must be positive");
    const std::size_t step = patch_size * 8;
    if (image_height == 0 || image_width == 0 || image_height % step != 0 || image_width % step != 0) {
        throw ConfigError("backbone.image_size " + std::to_string(image_height) + "x" + std::to_string(image_width) +
                          " must be divisible by patch_size * 8 = " + std::to_string(step));
    }
    for (std::size_t s = 0; s < 4; ++s) {
        if (stage_heads[s] == 0 || stage_channels(s) % stage_heads[s] != 0) {
            throw ConfigError("backbone.stage_heads[" + std::to_string(s) + "] = " + std::to_string(stage_heads[s]) +
                              " does not divide " + std::to_string(stage_channels(s)) + " channels");
        }
        const std::size_t m = stage_window(s);
        if (stage_height(s) % m != 0 || stage_width(s) % m != 0) {
            throw ConfigError("backbone stage " + std::to_string(s + 1) + " grid " + std::to_string(stage_height(s)) +
                              "x" + std::to_string(stage_width(s)) + " is not divisible by window " +
                              std::to_string(m));
        }
    }
    if (!(mlp_ratio > 0)) throw ConfigError("backbone.mlp_ratio must be positive");
}

BackboneConfig BackboneConfig::swin_tiny() {
    BackboneConfig c;
    c.image_height = c.image_width = 224;
    c.patch_size = 4;
    c.base_channels = 96;
    c.stage_depths = {2, 2, 6, 2};
    c.stage_heads = {3, 6, 12, 24};
    c.window = 7;
    return c;
}

IndexMap patch_embed_index(std::size_t batch, std::size_t height, std::size_t width, std::size_t patch) {
    if (patch == 0 || height % patch != 0 || width % patch != 0) {
        throw ConfigError("image " + std::to_string(height) + "x" + std::to_string(width) +
                          " is not divisible by patch size " + std::to_string(patch));
    }
    auto index = std::make_shared<std::vector<std::uint32_t>>();
    index->reserve(batch * height * width * 3);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t ty = 0; ty < height / patch; ++ty)
            for (std::size_t tx = 0; tx < width / patch; ++tx)
                for (std::size_t py = 0; py < patch; ++py)
                    for (std::size_t px = 0; px < patch; ++px)
                        for (std::size_t c = 0; c < 3; ++c) {
                            const std::size_t y = ty * patch + py;
                            const std::size_t x = tx * patch + px;
                            index->push_back(static_cast<std::uint32_t>(((b * height + y) * width + x) * 3 + c));
                        }
    return index;
}

IndexMap patch_merge_index(std::size_t batch, std::size_t height, std::size_t width, std::size_t channels) {
    if (height % 2 != 0 || width % 2 != 0) {
        throw DimensionError("patch merging needs even extents, got " + std::to_string(height) + "x" +
                             std::to_string(width));
    }
    static constexpr std::size_t kOffsets[4][2] = {{0, 0}, {1, 0}, {0, 1}, {1, 1}};  // (dy, dx)
    auto index = std::make_shared<std::vector<std::uint32_t>>();
    index->reserve(batch * height * width * channels);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t y = 0; y < height / 2; ++y)
            for (std::size_t x = 0; x < width / 2; ++x)
                for (const auto& off : kOffsets) {
                    const std::size_t pos = (2 * y + off[0]) * width + (2 * x + off[1]);
                    for (std::size_t c = 0; c < channels; ++c)
                        index->push_back(static_cast<std::uint32_t>((b * height * width + pos) * channels + c));
                }
    return index;
}

template <typename Real>
PatchEmbed<Real> PatchEmbed<Real>::create(ParamStore<Real>& store, const std::string& prefix, std::size_t patch,
                                          std::size_t channels, Rng& rng) {
    PatchEmbed e;
    e.patch = patch;
    e.proj = Linear<Real>::create(store, prefix + ".proj", patch * patch * 3, channels, rng);
    return e;
}

template <typename Real>
TokenGrid<Real> PatchEmbed<Real>::forward(const Tensor<Real>& image) const {
    if (image.rank() != 4 || image.dim(3) != 3) {
        throw DimensionError("patch_embed expects [batch, H, W, 3], got " + shape_str(image.shape()));
    }
    const std::size_t b = image.dim(0), h = image.dim(1), w = image.dim(2);
    auto index = patch_embed_index(b, h, w, patch);
    const std::size_t rows = h / patch, cols = w / patch;
    Tensor<Real> patches = gather(image, index, {b, rows * cols, patch * patch * 3});
    return TokenGrid<Real>::from(proj(patches), rows, cols);
}

template <typename Real>
PatchMerging<Real> PatchMerging<Real>::create(ParamStore<Real>& store, const std::string& prefix,
                                              std::size_t channels, Rng& rng) {
    PatchMerging m;
    m.reduction = Linear<Real>::create(store, prefix + ".reduction", 4 * channels, 2 * channels, rng, false);
    return m;
}

template <typename Real>
TokenGrid<Real> PatchMerging<Real>::forward(const TokenGrid<Real>& grid) const {
    if (grid.height % 2 != 0 || grid.width % 2 != 0) {
        throw DimensionError("patch merging needs even extents, got " + std::to_string(grid.height) + "x" +
                             std::to_string(grid.width));
    }
    auto index = patch_merge_index(grid.batch, grid.height, grid.width, grid.channels);
    const std::size_t h = grid.height / 2, w = grid.width / 2;
    Tensor<Real> gathered = gather(grid.tokens, index, {grid.batch, h * w, 4 * grid.channels});
    return TokenGrid<Real>::from(reduction(gathered), h, w);
}

template <typename Real>
Backbone<Real>::Backbone(const BackboneConfig& config, ParamStore<Real>& store, const std::string& prefix, Rng& rng)
    : config_(config), prefix_(prefix) {
    config_.validate();
    const std::size_t first = store.size();
    embed_ = PatchEmbed<Real>::create(store, prefix + ".patch_embed", config_.patch_size, config_.base_channels, rng);
    for (std::size_t s = 0; s < 4; ++s) {
        const std::string stage = prefix + ".stage" + std::to_string(s + 1);
        if (s > 0) merges_[s - 1] = PatchMerging<Real>::create(store, stage + ".merge", config_.stage_channels(s - 1), rng);
        for (std::size_t j = 0; j < config_.stage_depths[s]; ++j) {
            blocks_[s].push_back(WmsaBlock<Real>::create(store, stage + ".block" + std::to_string(j),
                                                         config_.stage_channels(s), config_.stage_heads[s],
                                                         config_.stage_window(s), j % 2 == 1, config_.mlp_ratio, rng));
        }
    }
    for (std::size_t i = first; i < store.size(); ++i) names_.push_back(store.params()[i].name);
}

template <typename Real>
TokenGrid<Real> Backbone<Real>::merge_into(std::size_t next_stage, const TokenGrid<Real>& grid) const {
    if (next_stage == 0 || next_stage > 3) throw ContractError("merge_into: stage index out of range");
    return merges_[next_stage - 1].forward(grid);
}

template <typename Real>
StageFeatures<Real> Backbone<Real>::forward(const Tensor<Real>& image) const {
    if (image.rank() != 4 || image.dim(1) != config_.image_height || image.dim(2) != config_.image_width) {
        throw DimensionError("backbone expects [batch, " + std::to_string(config_.image_height) + ", " +
                             std::to_string(config_.image_width) + ", 3], got " + shape_str(image.shape()));
    }
    StageFeatures<Real> out;
    TokenGrid<Real> x = embed_.forward(image);
    for (std::size_t s = 0; s < 4; ++s) {
        if (s > 0) x = merges_[s - 1].forward(x);
        for (const auto& block : blocks_[s]) x = block.forward(x);
        out[s] = x;
    }
    return out;
}

template struct PatchEmbed<float>;
template struct PatchEmbed<double>;
template struct PatchMerging<float>;
template struct PatchMerging<double>;
template class Backbone<float>;
template class Backbone<double>;

}  // namespace tfk
