// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <numbers>

#include "config/config.hpp"

using namespace tfk;

namespace {

RunConfig toy_run(std::size_t epochs) {
    RunConfig rc = parse_config(R"(
backbone.image_size = 16
backbone.patch_size = 2
backbone.base_channels = 8
backbone.stage_depths = 1,1,1,1
backbone.stage_heads = 1,1,2,2
backbone.window = 2
fusion.head_dim = 8
fusion.mtp_heads = 2
data.num_cases = 200
train.batch_size = 8
train.lr = 1e-3
)");
    rc.train.epochs = epochs;
    return resolve_config(rc, {});
}

Dataset toy_data(const RunConfig& rc) {
    SyntheticSpec spec = rc.data.synthetic;
    spec.image_size = rc.model.backbone.image_height;
    return generate_synthetic(spec).data;
}

}  // namespace

TEST(Schedule, CosineEndpointsAndMidpoint) {
    TrainConfig c;
    c.lr = 0.01;
    c.epochs = 10;
    EXPECT_DOUBLE_EQ(scheduled_lr(c, 0), 0.01);
    EXPECT_NEAR(scheduled_lr(c, 5), 0.005, 1e-15);
    for (std::size_t e = 0; e < 10; ++e)
        EXPECT_NEAR(scheduled_lr(c, e), 0.005 * (1 + std::cos(std::numbers::pi * double(e) / 10)), 1e-15);
    c.schedule = Schedule::Constant;
    EXPECT_DOUBLE_EQ(scheduled_lr(c, 7), 0.01);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    ParamStore<double> store;
    Rng rng(1);
    auto w = store.create("w", {3}, Init::Zeros, rng);
    auto d = w.mutable_data();
    d[0] = 1.0;
    d[1] = -2.0;
    d[2] = 0.5;
    auto g = w.mutable_grad();
    g[0] = 0.3;
    g[1] = -4.0;
    g[2] = 0.0;
    TrainConfig c;
    c.weight_decay = 0.1;
    c.decoupled_decay = true;
    Adam<double> opt(store, c);
    opt.step(0.01);
    // Bias-corrected first step: m_hat / sqrt(v_hat) = sign(g); decay adds lr * wd * w.
    EXPECT_NEAR(w.data()[0], 1.0 - 0.01 * (0.3 / (0.3 + 1e-8)) - 0.01 * 0.1 * 1.0, 1e-12);
    EXPECT_NEAR(w.data()[1], -2.0 + 0.01 * (4.0 / (4.0 + 1e-8)) + 0.01 * 0.1 * 2.0, 1e-12);
    EXPECT_NEAR(w.data()[2], 0.5 - 0.01 * 0.1 * 0.5, 1e-12);
    EXPECT_EQ(opt.steps(), 1u);
}

TEST(Adam, CoupledDecayEntersGradient) {
    ParamStore<double> store;
    Rng rng(1);
    auto w = store.create("w", {1}, Init::Ones, rng);
    w.mutable_grad()[0] = 0.0;
    TrainConfig c;
    c.weight_decay = 0.5;
    c.decoupled_decay = false;
    Adam<double> opt(store, c);
    opt.step(0.1);
    // Gradient becomes wd * w = 0.5, so the first step is a full lr.
    EXPECT_NEAR(w.data()[0], 1.0 - 0.1 * 0.5 / (0.5 + 1e-8), 1e-12);
}

TEST(Train, ToyLossDecreases) {
    const RunConfig rc = toy_run(5);
    const Dataset data = toy_data(rc);
    TFormer<float> model(rc.model);
    const auto result = train(model, data, rc.train);
    ASSERT_EQ(result.log.size(), 5u);
    for (std::size_t e = 1; e < 5; ++e) EXPECT_LT(result.log[e].train_loss, result.log[e - 1].train_loss) << e;
    EXPECT_GE(result.best_val_avg, 0.0);
}

TEST(Train, DeterministicLogs) {
    const RunConfig rc = toy_run(2);
    const Dataset data = toy_data(rc);
    TFormer<double> a(rc.model), b(rc.model);
    const auto ra = train(a, data, rc.train), rb = train(b, data, rc.train);
    for (std::size_t e = 0; e < 2; ++e) {
        EXPECT_EQ(ra.log[e].train_loss, rb.log[e].train_loss);
        EXPECT_EQ(ra.log[e].val_avg, rb.log[e].val_avg);
    }
    const auto& pa = a.params().params();
    for (std::size_t i = 0; i < pa.size(); ++i) {
        auto x = pa[i].tensor.data(), y = b.params().params()[i].tensor.data();
        ASSERT_TRUE(std::equal(x.begin(), x.end(), y.begin())) << pa[i].name;
    }
}

TEST(Train, EvaluateReportsAllCases) {
    const RunConfig rc = toy_run(1);
    const Dataset data = toy_data(rc);
    TFormer<float> model(rc.model);
    const auto ev = evaluate(model, data, Split::Test, 7);
    EXPECT_EQ(ev.preds.size(), data.counts().test);
    EXPECT_EQ(ev.ids.size(), ev.preds.size());
    EXPECT_TRUE(std::isfinite(ev.loss));
}

TEST(Config, ParseCommentsAndOverrides) {
    const RunConfig rc = parse_config("# comment\n\nbackbone.window = 3  \ntrain.lr=0.5\n");
    EXPECT_EQ(rc.model.backbone.window, 3u);
    EXPECT_DOUBLE_EQ(rc.train.lr, 0.5);
    const RunConfig rc2 = resolve_config(toy_run(3), {"train.epochs=9"});
    EXPECT_EQ(rc2.train.epochs, 9u);
}

TEST(Config, UnknownKeyIsConfigError) {
    try {
        parse_config("backbone.widow = 3\n");
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("backbone.widow"), std::string::npos);
    }
    EXPECT_THROW(parse_config("train.lr = fast\n"), ConfigError);
    EXPECT_THROW(parse_config("just words\n"), ConfigError);
}

TEST(Config, CanonicalTextRoundTrips) {
    const RunConfig rc = toy_run(4);
    const std::string text = rc.canonical_text();
    EXPECT_EQ(parse_config(text).canonical_text(), text);
}

TEST(Config, SeedFromEnvironment) {
    ::setenv("TFK_SEED", "1234", 1);
    const RunConfig rc = resolve_config(RunConfig{}, {});
    ::unsetenv("TFK_SEED");
    EXPECT_EQ(rc.train.seed, 1234u);
    EXPECT_EQ(rc.model.init_seed, 1234u);
    const RunConfig plain = resolve_config(RunConfig{}, {});
    EXPECT_NE(plain.train.seed, 1234u);
}

TEST(Config, ValidationRejectsBadPrecision) {
    EXPECT_THROW(resolve_config(RunConfig{}, {"model.precision=16"}), ConfigError);
}
