// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "attention/attention.hpp"

namespace tfk {

struct BackboneConfig {
    std::size_t image_height = 64;
    std::size_t image_width = 64;
    std::size_t patch_size = 4;
    std::size_t base_channels = 16;
    std::array<std::size_t, 4> stage_depths{1, 1, 2, 1};
    std::array<std::size_t, 4> stage_heads{1, 2, 4, 4};
    std::size_t window = 4;
    bool shared_weights = false;
    double mlp_ratio = 4.0;

    /// Throws ConfigError naming the first violated constraint.
    void validate() const;
    std::size_t stage_height(std::size_t stage) const { return image_height / (patch_size << stage); }
    std::size_t stage_width(std::size_t stage) const { return image_width / (patch_size << stage); }
    std::size_t stage_channels(std::size_t stage) const { return base_channels << stage; }
    std::size_t stage_window(std::size_t stage) const {
        return active_window(stage_height(stage), stage_width(stage), window);
    }

    static BackboneConfig swin_tiny();
};

/// Per-stage token grids of one modality; index 0 is stage 1.
template <typename Real>
using StageFeatures = std::array<TokenGrid<Real>, 4>;

/// Gather map from an image [B, H, W, 3] to flattened patches
/// [B, (H/p)(W/p), p*p*3], each patch in (row, col, channel) order.
IndexMap patch_embed_index(std::size_t batch, std::size_t height, std::size_t width, std::size_t patch);

/// Gather map from [B, H*W, c] to [B, (H/2)(W/2), 4c]; neighbor order
/// top-left, bottom-left, top-right, bottom-right.
IndexMap patch_merge_index(std::size_t batch, std::size_t height, std::size_t width, std::size_t channels);

template <typename Real>
struct PatchEmbed {
    std::size_t patch = 4;
    Linear<Real> proj;

    static PatchEmbed create(ParamStore<Real>& store, const std::string& prefix, std::size_t patch,
                             std::size_t channels, Rng& rng);
    TokenGrid<Real> forward(const Tensor<Real>& image) const;
};

template <typename Real>
struct PatchMerging {
    Linear<Real> reduction;  // 4c -> 2c, no bias

    static PatchMerging create(ParamStore<Real>& store, const std::string& prefix, std::size_t channels, Rng& rng);
    TokenGrid<Real> forward(const TokenGrid<Real>& grid) const;
};

template <typename Real>
class Backbone {
public:
    Backbone(const BackboneConfig& config, ParamStore<Real>& store, const std::string& prefix, Rng& rng);

    /// image [B, H, W, 3] -> post-block grids of the four stages.
    StageFeatures<Real> forward(const Tensor<Real>& image) const;
    /// Applies the merge that feeds stage `next_stage` (1..3, zero-based).
    TokenGrid<Real> merge_into(std::size_t next_stage, const TokenGrid<Real>& grid) const;

    const BackboneConfig& config() const { return config_; }
    const std::string& prefix() const { return prefix_; }
    std::vector<std::string> parameter_names() const { return names_; }

private:
    BackboneConfig config_;
    std::string prefix_;
    PatchEmbed<Real> embed_;
    std::array<PatchMerging<Real>, 3> merges_;
    std::array<std::vector<WmsaBlock<Real>>, 4> blocks_;
    std::vector<std::string> names_;
};

}  // namespace tfk
