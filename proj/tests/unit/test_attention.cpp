// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "core/gradcheck.hpp"
#include "support/oracles.hpp"

using namespace tfk;

namespace {

Tensor<double> random_tensor(Shape shape, Rng& rng) {
    std::vector<double> v(numel(shape));
    for (double& x : v) x = rng.uniform(-1, 1);
    return Tensor<double>(std::move(shape), std::move(v));
}

TokenGrid<double> iota_grid(std::size_t batch, std::size_t h, std::size_t w, std::size_t c) {
    std::vector<double> v(batch * h * w * c);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = double(i);
    return TokenGrid<double>::from(Tensor<double>({batch, h * w, c}, v), h, w);
}

void jitter(ParamStore<double>& store, Rng& rng) {
    for (auto& p : store.params())
        for (double& v : p.tensor.mutable_data()) v = rng.uniform(-0.5, 0.5);
}

}  // namespace

TEST(Window, PartitionPlacesTokensByWindow) {
    auto grid = iota_grid(2, 4, 6, 3);
    auto win = window_partition(grid, 2);
    ASSERT_EQ(win.shape(), (Shape{12, 4, 3}));
    for (std::size_t b = 0; b < 2; ++b)
        for (std::size_t y = 0; y < 4; ++y)
            for (std::size_t x = 0; x < 6; ++x)
                for (std::size_t c = 0; c < 3; ++c) {
                    const std::size_t g = b * 6 + (y / 2) * 3 + x / 2, t = (y % 2) * 2 + x % 2;
                    EXPECT_EQ(win.at({g, t, c}), grid.tokens.at({b, y * 6 + x, c}));
                }
}

TEST(Window, PartitionReverseRoundTrip) {
    for (std::size_t m : {1u, 2u, 3u}) {
        auto grid = iota_grid(2, 3 * m, 2 * m, 2);
        auto back = window_reverse(window_partition(grid, m), 2, 3 * m, 2 * m, m);
        auto a = grid.tokens.data(), b = back.tokens.data();
        EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin())) << "window " << m;
    }
}

TEST(Window, IndivisibleGridThrows) {
    EXPECT_THROW(window_count(5, 4, 2), Error);
}

TEST(Window, ActiveWindowClampsToSmallGrid) {
    EXPECT_EQ(active_window(2, 2, 7), 2u);
    EXPECT_EQ(active_window(14, 14, 7), 7u);
}

TEST(Window, CyclicShiftBruteForce) {
    auto grid = iota_grid(1, 5, 4, 2);
    for (int dy : {-3, -1, 0, 2, 7})
        for (int dx : {-2, 0, 1, 5}) {
            auto out = cyclic_shift(grid, dy, dx);
            for (int y = 0; y < 5; ++y)
                for (int x = 0; x < 4; ++x) {
                    const int sy = ((y + dy) % 5 + 5) % 5, sx = ((x + dx) % 4 + 4) % 4;
                    for (std::size_t c = 0; c < 2; ++c)
                        ASSERT_EQ(out.tokens.at({0, std::size_t(y * 4 + x), c}),
                                  grid.tokens.at({0, std::size_t(sy * 4 + sx), c}));
                }
            auto back = cyclic_shift(out, -dy, -dx);
            auto a = grid.tokens.data(), b = back.tokens.data();
            EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
        }
}

// A pair is allowed exactly when the two original positions are adjacent in
// the unrolled plane, i.e. their rolled coordinates fall in the same wrap region.
TEST(Window, ShiftMaskMatchesWrapRegions) {
    const std::size_t h = 6, w = 6, m = 3;
    const int s = 1;
    const auto mask = shift_mask(h, w, m, s, s);
    const std::size_t n = m * m, per_row = w / m;
    ASSERT_EQ(mask.size(), (h / m) * (w / m) * n * n);
    for (std::size_t g = 0; g < (h / m) * (w / m); ++g)
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                auto reg = [&](std::size_t t) {
                    const std::size_t y = (g / per_row) * m + t / m, x = (g % per_row) * m + t % m;
                    return std::pair{oracle::wrapped(y, h, s), oracle::wrapped(x, w, s)};
                };
                EXPECT_EQ(bool(mask[(g * n + i) * n + j]), reg(i) != reg(j));
            }
    for (auto v : shift_mask(h, w, m, 0, 0)) EXPECT_EQ(v, 0);
}

TEST(Window, ShiftMaskOnlyTouchesBorderWindows) {
    const auto mask = shift_mask(8, 8, 4, 2, 2);
    const std::size_t n = 16;
    for (std::size_t k = 0; k < n * n; ++k) EXPECT_EQ(mask[k], 0) << "top-left window must be unmasked";
    std::size_t blocked = 0;
    for (std::size_t k = 3 * n * n; k < 4 * n * n; ++k) blocked += mask[k];
    EXPECT_GT(blocked, 0u);
}

TEST(Window, RelativePositionIndex) {
    for (std::size_t m : {1u, 2u, 3u, 7u}) {
        const auto idx = relative_position_index(m);
        ASSERT_EQ(idx.size(), m * m * m * m);
        for (std::size_t i = 0; i < m * m; ++i)
            for (std::size_t j = 0; j < m * m; ++j) {
                const long dy = long(i / m) - long(j / m), dx = long(i % m) - long(j % m);
                const long want = (dy + long(m) - 1) * (2 * long(m) - 1) + dx + long(m) - 1;
                EXPECT_EQ(long(idx[i * m * m + j]), want);
            }
        if (m > 1) EXPECT_EQ(idx[0], (m - 1) * (2 * m - 1) + m - 1);
    }
}

TEST(Attention, BlockShiftRule) {
    EXPECT_EQ(block_shift(8, 8, 4, true), 2);
    EXPECT_EQ(block_shift(8, 8, 4, false), 0);
    EXPECT_EQ(block_shift(4, 4, 4, true), 0);
    EXPECT_EQ(block_shift(6, 6, 3, true), 1);
}

TEST(Attention, MaskLayoutAndValues) {
    const auto mask = attention_mask<double>(4, 4, 2, 1, 1, 3, 2);
    ASSERT_EQ(mask.shape(), (Shape{4, 3, 4, 8}));
    const auto raw = shift_mask(4, 4, 2, 1, 1);
    for (std::size_t g = 0; g < 4; ++g)
        for (std::size_t h = 0; h < 3; ++h)
            for (std::size_t i = 0; i < 4; ++i)
                for (std::size_t k = 0; k < 8; ++k) {
                    const double v = mask.at({g, h, i, k});
                    if (raw[(g * 4 + i) * 4 + k % 4]) {
                        EXPECT_TRUE(std::isinf(v) && v < 0);
                    } else {
                        EXPECT_EQ(v, 0.0);
                    }
                }
}

TEST(Attention, RelativeBiasMaterialize) {
    ParamStore<double> store;
    Rng rng(3);
    auto b = RelativeBias<double>::create(store, "b", 3, 2, rng);
    jitter(store, rng);
    auto t = b.materialize();
    ASSERT_EQ(t.shape(), (Shape{2, 9, 9}));
    for (std::size_t h = 0; h < 2; ++h)
        for (std::size_t i = 0; i < 9; ++i)
            for (std::size_t j = 0; j < 9; ++j) EXPECT_EQ(t.at({h, i, j}), oracle::relative_bias(b, i, j, h));
}

TEST(Attention, AttendMatchesOracleWithBiasAndMask) {
    Rng rng(11);
    ParamStore<double> store;
    auto p = AttentionParams<double>::create(store, "a", 6, 2, rng);
    jitter(store, rng);
    auto q = random_tensor({3, 2, 6}, rng), kv = random_tensor({3, 4, 6}, rng);
    auto bias = random_tensor({2, 2, 4}, rng);
    std::vector<double> m(3 * 2 * 2 * 4, 0.0);
    m[1] = -INFINITY;  // group 0, head 0, query 0, key 1
    Tensor<double> mask({3, 2, 2, 4}, m);
    auto res = attend(q, kv, kv, p, bias, mask);
    const auto a = oracle::Attention::of(p);
    const auto qm = oracle::rows(q, 6), km = oracle::rows(kv, 6);
    for (std::size_t g = 0; g < 3; ++g) {
        oracle::Mat qs(qm.begin() + g * 2, qm.begin() + g * 2 + 2), ks(km.begin() + g * 4, km.begin() + g * 4 + 4);
        std::vector<oracle::Mat> w;
        auto out = oracle::attend(
            a, qs, ks, [&](std::size_t h, std::size_t i, std::size_t j) { return bias.at({h, i, j}); },
            [&](std::size_t, std::size_t) { return false; }, &w);
        // Group 0 carries a single-head mask entry; it is checked below.
        if (g != 0) {
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(res.output.at({g, i, c}), out[i][c], 1e-12);
            for (std::size_t h = 0; h < 2; ++h)
                for (std::size_t i = 0; i < 2; ++i)
                    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(res.weights.at({g, h, i, j}), w[h][i][j], 1e-12);
        }
    }
    EXPECT_EQ(res.weights.at({0, 0, 0, 1}), 0.0);
    EXPECT_GT(res.weights.at({0, 1, 0, 1}), 0.0);
    EXPECT_EQ(res.key_rows, 4u);
}

TEST(Attention, WmcaUsesDoubledKeys) {
    Rng rng(12);
    ParamStore<double> store;
    auto p = WmcaParams<double>::create(store, "w", 4, 2, 2, rng);
    auto own = random_tensor({3, 4, 4}, rng), other = random_tensor({3, 4, 4}, rng);
    auto res = wmca(own, other, p);
    EXPECT_EQ(res.key_rows, 8u);
    EXPECT_EQ(res.weights.shape(), (Shape{3, 2, 4, 8}));
    EXPECT_EQ(p.materialize_bias().shape(), (Shape{2, 4, 8}));
}

TEST(Attention, HeadCountMustDivideWidth) {
    ParamStore<double> store;
    Rng rng(1);
    EXPECT_THROW(AttentionParams<double>::create(store, "a", 6, 4, rng), Error);
}

TEST(Attention, WmsaFlops) {
    EXPECT_EQ(wmsa_flops(56, 56, 96, 7), 145108992u);
    // 4 h w C^2 + 2 M^2 h w C by hand for a small case.
    EXPECT_EQ(wmsa_flops(4, 4, 8, 2), 4u * 16 * 64 + 2u * 4 * 16 * 8);
}

TEST(Attention, WsaGradientCheck) {
    Rng rng(13);
    ParamStore<double> store;
    auto p = AttentionParams<double>::create(store, "a", 4, 2, rng);
    auto b = RelativeBias<double>::create(store, "b", 2, 2, rng);
    jitter(store, rng);
    auto x = random_tensor({4, 4, 4}, rng), r = random_tensor({4, 4, 4}, rng);
    auto mask = attention_mask<double>(4, 4, 2, 1, 1, 2);
    std::vector<Tensor<double>> inputs{x, b.table, p.w_q.weight, p.w_v.weight, p.w_out.weight, p.w_out.bias};
    const auto res = grad_check<double>(
        [&] { return sum(mul(wsa(x, x, x, p, &b, mask).output, r)); }, inputs, 1e-5, 16);
    EXPECT_LT(res.max_rel_error, 1e-5);
}

TEST(Attention, ShiftedMaskRepeatsOverBatch) {
    Rng rng(14);
    ParamStore<double> store;
    auto p = AttentionParams<double>::create(store, "a", 4, 2, rng);
    auto b = RelativeBias<double>::create(store, "b", 2, 2, rng);
    jitter(store, rng);
    auto x = random_tensor({4, 4, 4}, rng);
    auto mask = attention_mask<double>(4, 4, 2, 1, 1, 2);
    auto twice = concat<double>({x, x}, 0);
    const auto one = wsa(x, x, x, p, &b, mask).output, two = wsa(twice, twice, twice, p, &b, mask).output;
    ASSERT_EQ(two.shape(), (Shape{8, 4, 4}));
    for (std::size_t i = 0; i < one.numel(); ++i) {
        EXPECT_EQ(two.data()[i], one.data()[i]);
        EXPECT_EQ(two.data()[one.numel() + i], one.data()[i]);
    }
    auto odd = random_tensor({6, 4, 4}, rng);
    EXPECT_THROW(wsa(odd, odd, odd, p, &b, mask), ContractError);
}
