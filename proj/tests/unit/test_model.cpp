// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "model/model.hpp"
#include "support/oracles.hpp"

using namespace tfk;

namespace {

ModelConfig toy_model() {
    ModelConfig mc;
    mc.backbone.image_height = mc.backbone.image_width = 16;
    mc.backbone.patch_size = 2;
    mc.backbone.base_channels = 8;
    mc.backbone.stage_depths = {1, 1, 1, 1};
    mc.backbone.stage_heads = {1, 1, 2, 2};
    mc.backbone.window = 2;
    mc.head_dim = 8;
    mc.mtp_heads = 2;
    return mc;
}

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1, double hi = 1) {
    std::vector<double> v(numel(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor<double>(std::move(shape), std::move(v));
}

}  // namespace

TEST(Backbone, PatchEmbedIndexOrder) {
    const auto idx = patch_embed_index(1, 4, 4, 2);
    ASSERT_EQ(idx->size(), 4u * 12);
    // Patch (1, 0) element (row 1, col 0, channel 2) sits at image (3, 0, 2).
    const std::size_t patch = 2, elem = (1 * 2 + 0) * 3 + 2;
    EXPECT_EQ((*idx)[patch * 12 + elem], (3u * 4 + 0) * 3 + 2);
}

TEST(Backbone, PatchMergeNeighborOrder) {
    const auto idx = patch_merge_index(1, 4, 4, 1);
    ASSERT_EQ(idx->size(), 4u * 4);
    // Output token (0, 1): top-left (0,2), bottom-left (1,2), top-right (0,3), bottom-right (1,3).
    const std::uint32_t want[] = {2, 6, 3, 7};
    for (int k = 0; k < 4; ++k) EXPECT_EQ((*idx)[1 * 4 + k], want[k]);
}

TEST(Backbone, StageShapes) {
    BackboneConfig bb = toy_model().backbone;
    bb.image_height = 32;
    ParamStore<float> store;
    Rng rng(1);
    Backbone<float> narrow(bb, store, "bb", rng);
    auto img = Tensor<float>::full({2, 32, 16, 3}, 0.5f);
    NoGradGuard g;
    const auto f = narrow.forward(img);
    for (std::size_t s = 0; s < 4; ++s) {
        EXPECT_EQ(f[s].height, 32u / (2u << s));
        EXPECT_EQ(f[s].width, 16u / (2u << s));
        EXPECT_EQ(f[s].channels, 8u << s);
    }
}

TEST(Backbone, ValidationNamesConstraint) {
    BackboneConfig bb;
    bb.image_height = bb.image_width = 60;
    try {
        bb.validate();
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("divisible"), std::string::npos);
    }
    bb = BackboneConfig::swin_tiny();
    EXPECT_NO_THROW(bb.validate());
    EXPECT_EQ(bb.stage_window(3), 7u);
    bb.stage_heads[1] = 5;
    EXPECT_THROW(bb.validate(), ConfigError);
}

TEST(Fusion, HmtBlockMatchesOracle) {
    Rng rng(21);
    HmtStackConfig cfg;
    cfg.shift = true;
    ParamStore<double> store;
    auto block = HmtBlock<double>::create(store, "h", 4, 2, 2, cfg, rng);
    for (auto& p : store.params())
        for (double& v : p.tensor.mutable_data()) v = rng.uniform(-0.5, 0.5);
    auto der = random_tensor({1, 16, 4}, rng), cli = random_tensor({1, 16, 4}, rng);
    auto [d, c] = block.forward(TokenGrid<double>::from(der, 4, 4), TokenGrid<double>::from(cli, 4, 4));
    const auto want_d = oracle::hmt_branch(block.to_der, oracle::rows(der, 4), oracle::rows(cli, 4), 4, 4, 2, 1);
    const auto want_c = oracle::hmt_branch(block.to_cli, oracle::rows(cli, 4), oracle::rows(der, 4), 4, 4, 2, 1);
    for (std::size_t t = 0; t < 16; ++t)
        for (std::size_t k = 0; k < 4; ++k) {
            EXPECT_NEAR(d.tokens.at({0, t, k}), want_d[t][k], 1e-12);
            EXPECT_NEAR(c.tokens.at({0, t, k}), want_c[t][k], 1e-12);
        }
}

TEST(Fusion, SingleBranchPassesOtherThrough) {
    Rng rng(22);
    HmtStackConfig cfg;
    cfg.der_to_cli = false;
    ParamStore<double> store;
    auto block = HmtBlock<double>::create(store, "h", 4, 1, 2, cfg, rng);
    auto der = random_tensor({1, 4, 4}, rng), cli = random_tensor({1, 4, 4}, rng);
    auto [d, c] = block.forward(TokenGrid<double>::from(der, 2, 2), TokenGrid<double>::from(cli, 2, 2));
    EXPECT_EQ(c.tokens.node(), cli.node());
    EXPECT_NE(d.tokens.node(), der.node());
}

TEST(Fusion, MismatchedGridsThrowFusionError) {
    Rng rng(23);
    ParamStore<double> store;
    auto block = HmtBlock<double>::create(store, "h", 4, 1, 2, HmtStackConfig{}, rng);
    auto a = random_tensor({1, 4, 4}, rng), b = random_tensor({1, 16, 4}, rng);
    EXPECT_THROW(block.forward(TokenGrid<double>::from(a, 2, 2), TokenGrid<double>::from(b, 4, 4)), FusionError);
}

TEST(Fusion, MtpMatchesOracleAndRecords) {
    Rng rng(24);
    ParamStore<double> store;
    auto block = MtpBlock<double>::create(store, "m", 6, 3, 4.0, rng);
    for (auto& p : store.params())
        for (double& v : p.tensor.mutable_data()) v = rng.uniform(-0.5, 0.5);
    auto f0 = random_tensor({1, 6}, rng), fc = random_tensor({1, 6}, rng), fd = random_tensor({1, 6}, rng);
    std::vector<AttentionRecord> records;
    ForwardContext ctx;
    ctx.records = &records;
    auto out = block.forward(f0, fc, fd, ctx);
    std::vector<oracle::Mat> w;
    const auto want = oracle::mtp(block, oracle::values(f0), oracle::values(fc), oracle::values(fd), &w);
    for (std::size_t k = 0; k < 6; ++k) EXPECT_NEAR(out.data()[k], want[k], 1e-12);
    ASSERT_EQ(records.size(), 1u);
    EXPECT_EQ(records[0].branch, Branch::Meta);
    EXPECT_EQ(records[0].keys, 3u);
    for (std::size_t h = 0; h < 3; ++h)
        for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(records[0].at(h, 0, j), w[h][0][j], 1e-12);
}

TEST(Fusion, StackBlockCount) {
    ModelConfig mc = toy_model();
    mc.fusion.stage_counts = {2, 0, 1, 3};
    ParamStore<float> store;
    Rng rng(1);
    HmtStack<float> stack(mc.fusion, mc.backbone, store, "hmt", rng);
    EXPECT_EQ(stack.block_count(), 6u);
    EXPECT_EQ(stack.stages()[0].size(), 2u);
}

TEST(Model, ZeroLogitLossIsMeanLogClassCount) {
    const auto& schema = LabelSchema::derm7pt();
    std::vector<Tensor<double>> logits;
    double want = 0;
    for (std::size_t l = 0; l < kNumLabels; ++l) {
        logits.push_back(Tensor<double>::zeros({3, schema.class_count(l)}));
        want += std::log(double(schema.class_count(l)));
    }
    const std::vector<LabelVector> truth(3, LabelVector{});
    EXPECT_NEAR(multi_label_loss(logits, truth).item(), want / 8, 1e-12);
}

TEST(Model, TensorAndProbabilityLossesAgree) {
    const auto& schema = LabelSchema::derm7pt();
    Rng rng(5);
    std::vector<Tensor<double>> logits;
    for (std::size_t l = 0; l < kNumLabels; ++l) logits.push_back(random_tensor({1, schema.class_count(l)}, rng, -3, 3));
    const LabelVector truth{4, 2, 1, 0, 2, 1, 0, 1};
    const auto pred = predict(logits);
    EXPECT_NEAR(multi_label_loss(logits, {truth}).item(), multi_label_loss(pred.probs[0], truth), 1e-12);
    for (std::size_t l = 0; l < kNumLabels; ++l) {
        const auto& p = pred.probs[0][l];
        EXPECT_EQ(pred.classes[0][l], std::size_t(std::max_element(p.begin(), p.end()) - p.begin()));
        EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
    }
}

TEST(Model, LossRejectsOutOfRangeLabel) {
    const auto& schema = LabelSchema::derm7pt();
    std::vector<Tensor<double>> logits;
    for (std::size_t l = 0; l < kNumLabels; ++l) logits.push_back(Tensor<double>::zeros({1, schema.class_count(l)}));
    LabelVector bad{};
    bad[2] = 2;  // BWV has two classes
    EXPECT_THROW(multi_label_loss(logits, {bad}), LabelError);
}

TEST(Model, ForwardShapesAndGroups) {
    TFormer<float> model(toy_model());
    auto img = Tensor<float>::full({2, 16, 16, 3}, 0.3f);
    auto meta = Tensor<float>::zeros({2, 20});
    NoGradGuard g;
    auto out = model.forward(img, img, meta);
    ASSERT_EQ(out.logits.size(), kNumLabels);
    for (std::size_t l = 0; l < kNumLabels; ++l)
        EXPECT_EQ(out.logits[l].shape(), (Shape{2, model.schema().class_count(l)}));
    const auto counts = count_parameters(model.params());
    std::size_t sum = 0;
    for (const auto& [k, v] : counts.groups) sum += v;
    EXPECT_EQ(sum, counts.total);
    EXPECT_EQ(counts.total, model.params().count());
    EXPECT_EQ(counts.total, 292300u);
    EXPECT_EQ(model.hmt_block_count(), 4u);
}

TEST(Model, HmtGroupMatchesClosedForm) {
    TFormer<float> model(toy_model());
    const auto counts = count_parameters(model.params());
    const auto& bb = model.config().backbone;
    for (std::size_t s = 0; s < 4; ++s) {
        EXPECT_EQ(counts.groups.at("hmt.stage" + std::to_string(s + 1)),
                  hmt_block_parameter_count(bb.stage_channels(s), bb.stage_window(s), bb.stage_heads[s], 4.0));
    }
}

TEST(Model, SharedBackboneStoredOnce) {
    ModelConfig mc = toy_model();
    TFormer<float> separate(mc);
    mc.backbone.shared_weights = true;
    TFormer<float> shared(mc);
    const auto a = count_parameters(separate.params()), b = count_parameters(shared.params());
    EXPECT_EQ(a.total - b.total, a.groups.at("backbone.der"));
}

TEST(Model, ValidationRejectsBadCombinations) {
    ModelConfig mc = toy_model();
    mc.modalities = {true, false, true};
    EXPECT_THROW(mc.validate(), ConfigError);
    mc = toy_model();
    mc.mtp_heads = 3;
    EXPECT_THROW(mc.validate(), ConfigError);
    mc = toy_model();
    mc.selection = {false, false, false};
    EXPECT_THROW(mc.validate(), ConfigError);
    mc = toy_model();
    mc.modalities = {true, false, false};
    mc.selection = {true, true, false};
    EXPECT_THROW(mc.validate(), ConfigError);
    mc.selection = {false, true, false};
    EXPECT_NO_THROW(mc.validate());
}

TEST(Model, SameSeedSameWeights) {
    ModelConfig mc = toy_model();
    mc.init_seed = 17;
    TFormer<float> a(mc), b(mc);
    mc.init_seed = 18;
    TFormer<float> c(mc);
    const auto& pa = a.params().params();
    bool any_diff = false;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        auto x = pa[i].tensor.data(), y = b.params().params()[i].tensor.data(), z = c.params().params()[i].tensor.data();
        EXPECT_TRUE(std::equal(x.begin(), x.end(), y.begin()));
        any_diff = any_diff || !std::equal(x.begin(), x.end(), z.begin());
    }
    EXPECT_TRUE(any_diff);
}
