// SPDX-License-Identifier: Apache-2.0
#include "attention/window.hpp"

#include <algorithm>
#include <string>

namespace tfk {

template <typename Real>
TokenGrid<Real> TokenGrid<Real>::from(Tensor<Real> tokens, std::size_t height, std::size_t width) {
    if (tokens.rank() != 3 || tokens.dim(1) != height * width) {
        throw DimensionError("token grid " + std::to_string(height) + "x" + std::to_string(width) +
                             " does not match tokens " + shape_str(tokens.shape()));
    }
    TokenGrid g;
    g.batch = tokens.dim(0);
    g.height = height;
    g.width = width;
    g.channels = tokens.dim(2);
    g.tokens = std::move(tokens);
    return g;
}

std::size_t active_window(std::size_t height, std::size_t width, std::size_t window) {
    return std::min({window, height, width});
}

std::size_t window_count(std::size_t height, std::size_t width, std::size_t window) {
    if (window == 0 || height % window != 0 || width % window != 0) {
        throw WindowError("grid " + std::to_string(height) + "x" + std::to_string(width) +
                          " is not divisible by window size " + std::to_string(window));
    }
    return (height / window) * (width / window);
}

IndexMap window_partition_index(std::size_t batch, std::size_t height, std::size_t width, std::size_t channels,
                                std::size_t window) {
    window_count(height, width, window);
    const std::size_t wx_count = width / window;
    const std::size_t wy_count = height / window;
    auto index = std::make_shared<std::vector<std::uint32_t>>();
    index->reserve(batch * height * width * channels);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t wy = 0; wy < wy_count; ++wy)
            for (std::size_t wx = 0; wx < wx_count; ++wx)
                for (std::size_t iy = 0; iy < window; ++iy)
                    for (std::size_t ix = 0; ix < window; ++ix) {
                        const std::size_t pos = (wy * window + iy) * width + (wx * window + ix);
                        const std::size_t base = (b * height * width + pos) * channels;
                        for (std::size_t c = 0; c < channels; ++c)
                            index->push_back(static_cast<std::uint32_t>(base + c));
                    }
    return index;
}

IndexMap window_reverse_index(std::size_t batch, std::size_t height, std::size_t width, std::size_t channels,
                              std::size_t window) {
    auto forward = window_partition_index(batch, height, width, channels, window);
    auto inverse = std::make_shared<std::vector<std::uint32_t>>(forward->size());
    for (std::size_t i = 0; i < forward->size(); ++i) (*inverse)[(*forward)[i]] = static_cast<std::uint32_t>(i);
    return inverse;
}

IndexMap cyclic_shift_index(std::size_t batch, std::size_t height, std::size_t width, std::size_t channels, int dy,
                            int dx) {
    auto wrap = [](long v, long n) { return static_cast<std::size_t>(((v % n) + n) % n); };
    auto index = std::make_shared<std::vector<std::uint32_t>>();
    index->reserve(batch * height * width * channels);
    for (std::size_t b = 0; b < batch; ++b)
        for (std::size_t y = 0; y < height; ++y)
            for (std::size_t x = 0; x < width; ++x) {
                const std::size_t sy = wrap(static_cast<long>(y) + dy, static_cast<long>(height));
                const std::size_t sx = wrap(static_cast<long>(x) + dx, static_cast<long>(width));
                const std::size_t base = (b * height * width + sy * width + sx) * channels;
                for (std::size_t c = 0; c < channels; ++c) index->push_back(static_cast<std::uint32_t>(base + c));
            }
    return index;
}

std::vector<std::uint8_t> shift_mask(std::size_t height, std::size_t width, std::size_t window, int dy, int dx) {
    const std::size_t windows = window_count(height, width, window);
    const std::size_t n = window * window;
    std::vector<std::uint8_t> mask(windows * n * n, 0);
    if (dy == 0 && dx == 0) return mask;
    // Region label of a shifted-frame coordinate: whether the roll wrapped it.
    auto wrapped = [](std::size_t v, int d, std::size_t extent) {
        const long src = static_cast<long>(v) + d;
        return src < 0 || src >= static_cast<long>(extent);
    };
    const std::size_t wx_count = width / window;
    std::vector<int> label(n);
    for (std::size_t w = 0; w < windows; ++w) {
        const std::size_t wy = w / wx_count;
        const std::size_t wx = w % wx_count;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t y = wy * window + i / window;
            const std::size_t x = wx * window + i % window;
            label[i] = (wrapped(y, dy, height) ? 2 : 0) + (wrapped(x, dx, width) ? 1 : 0);
        }
        for (std::size_t q = 0; q < n; ++q)
            for (std::size_t k = 0; k < n; ++k) mask[(w * n + q) * n + k] = label[q] != label[k];
    }
    return mask;
}

std::vector<std::uint32_t> relative_position_index(std::size_t window) {
    const std::size_t n = window * window;
    const std::size_t span = 2 * window - 1;
    std::vector<std::uint32_t> index(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const std::size_t dy = i / window + window - 1 - j / window;
            const std::size_t dx = i % window + window - 1 - j % window;
            index[i * n + j] = static_cast<std::uint32_t>(dy * span + dx);
        }
    return index;
}

template <typename Real>
Tensor<Real> window_partition(const TokenGrid<Real>& grid, std::size_t window) {
    const std::size_t windows = window_count(grid.height, grid.width, window);
    auto index = window_partition_index(grid.batch, grid.height, grid.width, grid.channels, window);
    return gather(grid.tokens, index, {grid.batch * windows, window * window, grid.channels});
}

template <typename Real>
TokenGrid<Real> window_reverse(const Tensor<Real>& windows, std::size_t batch, std::size_t height,
                               std::size_t width, std::size_t window) {
    const std::size_t count = window_count(height, width, window);
    if (windows.rank() != 3 || windows.dim(0) != batch * count || windows.dim(1) != window * window) {
        throw WindowError("window tensor " + shape_str(windows.shape()) + " does not tile a " +
                          std::to_string(height) + "x" + std::to_string(width) + " grid with window " +
                          std::to_string(window));
    }
    const std::size_t channels = windows.dim(2);
    auto index = window_reverse_index(batch, height, width, channels, window);
    return TokenGrid<Real>::from(gather(windows, index, {batch, height * width, channels}), height, width);
}

template <typename Real>
TokenGrid<Real> cyclic_shift(const TokenGrid<Real>& grid, int dy, int dx) {
    if (dy == 0 && dx == 0) return grid;
    auto index = cyclic_shift_index(grid.batch, grid.height, grid.width, grid.channels, dy, dx);
    return grid.with_tokens(gather(grid.tokens, index, grid.tokens.shape()));
}

template struct TokenGrid<float>;
template struct TokenGrid<double>;
template Tensor<float> window_partition(const TokenGrid<float>&, std::size_t);
template Tensor<double> window_partition(const TokenGrid<double>&, std::size_t);
template TokenGrid<float> window_reverse(const Tensor<float>&, std::size_t, std::size_t, std::size_t, std::size_t);
template TokenGrid<double> window_reverse(const Tensor<double>&, std::size_t, std::size_t, std::size_t, std::size_t);
template TokenGrid<float> cyclic_shift(const TokenGrid<float>&, int, int);
template TokenGrid<double> cyclic_shift(const TokenGrid<double>&, int, int);

}  // namespace tfk
