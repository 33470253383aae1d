// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "core/ops.hpp"

namespace tfk {

/// Batched token grid: tokens are [batch, height * width, channels] in
/// row-major spatial order.
template <typename Real>
struct TokenGrid {
    std::size_t batch = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::size_t channels = 0;
    Tensor<Real> tokens;

    static TokenGrid from(Tensor<Real> tokens, std::size_t height, std::size_t width);
    TokenGrid with_tokens(Tensor<Real> t) const { return from(std::move(t), height, width); }
};

/// Window size actually applied to a grid: the configured size, clamped to
/// the grid when the grid is smaller than one window.
std::size_t active_window(std::size_t height, std::size_t width, std::size_t window);

/// Validates divisibility and returns the number of windows.
std::size_t window_count(std::size_t height, std::size_t width, std::size_t window);

/// Gather map from [batch, H*W, C] to [batch * nW, M*M, C], windows in
/// row-major window order.
IndexMap window_partition_index(std::size_t batch, std::size_t height, std::size_t width, std::size_t channels,
                                std::size_t window);
/// Inverse of window_partition_index.
IndexMap window_reverse_index(std::size_t batch, std::size_t height, std::size_t width, std::size_t channels,
                              std::size_t window);

/// Gather map of a toroidal roll: out(y, x) = in((y + dy) mod H, (x + dx) mod W).
IndexMap cyclic_shift_index(std::size_t batch, std::size_t height, std::size_t width, std::size_t channels, int dy,
                            int dx);

/// Per window of the shifted grid, true where the (query, key) pair was not
/// spatially contiguous before the roll, i.e. the two tokens come from
/// different wrap regions. Layout [nW, M*M, M*M]. All false for zero offset.
std::vector<std::uint8_t> shift_mask(std::size_t height, std::size_t width, std::size_t window, int dy, int dx);

/// Index grid [M*M, M*M] into a (2M-1)^2 relative-position table.
std::vector<std::uint32_t> relative_position_index(std::size_t window);

template <typename Real>
Tensor<Real> window_partition(const TokenGrid<Real>& grid, std::size_t window);
template <typename Real>
TokenGrid<Real> window_reverse(const Tensor<Real>& windows, std::size_t batch, std::size_t height,
                               std::size_t width, std::size_t window);
template <typename Real>
TokenGrid<Real> cyclic_shift(const TokenGrid<Real>& grid, int dy, int dx);

}  // namespace tfk
