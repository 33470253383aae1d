// SPDX-License-Identifier: Apache-2.0
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits nonzero when any of them fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "config/config.hpp"
#include "model/gradsuite.hpp"
#include "model/train.hpp"
#include "support/oracles.hpp"
#include "tformer/tformer.h"

namespace fs = std::filesystem;
using namespace tfk;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

std::string config_path(const std::string& name) { return std::string(TFK_SOURCE_DIR) + "/configs/" + name; }

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::current_path() / "acceptance_out";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(numel(shape));
    for (double& x : v) x = rng.uniform(lo, hi);
    return Tensor<double>(std::move(shape), std::move(v));
}

void jitter(ParamStore<double>& store, Rng& rng) {
    for (auto& p : store.params())
        for (double& v : p.tensor.mutable_data()) v = rng.uniform(-0.5, 0.5);
}

double max_diff(std::span<const double> got, const oracle::Vec& want) {
    if (got.size() != want.size()) return INFINITY;
    double m = 0;
    for (std::size_t i = 0; i < want.size(); ++i) m = std::max(m, std::fabs(got[i] - want[i]));
    return m;
}

oracle::Vec flatten(const std::vector<oracle::Mat>& groups) {
    oracle::Vec out;
    for (const auto& g : groups)
        for (const auto& row : g) out.insert(out.end(), row.begin(), row.end());
    return out;
}

// ---- 1 ---------------------------------------------------------------------

Outcome gradient_suite() {
    const RunConfig run = resolve_config(load_config(config_path("toy.cfg")), {});
    const auto t0 = std::chrono::steady_clock::now();
    const auto rows = run_gradient_suite(run.model, 1);
    const double elapsed = seconds_since(t0);
    bool ok = rows.size() == 8 && elapsed < 120.0;
    double worst = 0;
    std::string failed;
    for (const auto& r : rows) {
        worst = std::max(worst, r.max_rel_error);
        if (!r.pass) {
            ok = false;
            failed += " " + r.module;
        }
    }
    return {ok, std::to_string(rows.size()) + " modules, max rel err " + fmt("%.2e", worst) + ", " +
                    fmt("%.1f s", elapsed) + (failed.empty() ? "" : ", failed:" + failed)};
}

// ---- 2 ---------------------------------------------------------------------

struct WindowSetup {
    std::size_t window, height, width, heads, channels, batch;
    int shift;
    std::size_t windows() const { return (height / window) * (width / window); }
};

WindowSetup random_window_setup(Rng& rng) {
    WindowSetup s;
    s.window = 1 + rng.below(3);
    s.height = s.window * (1 + rng.below(3));
    s.width = s.window * (1 + rng.below(3));
    s.heads = 1 + rng.below(2);
    s.channels = s.heads * (2 + rng.below(2));
    s.batch = 1 + rng.below(2);
    s.shift = block_shift(s.height, s.width, s.window, rng.bernoulli(0.7));
    return s;
}

/// Wrap region of in-window slot `t` of group `g` in the rolled frame.
std::pair<int, int> region(const WindowSetup& s, std::size_t g, std::size_t t) {
    const std::size_t w = g % s.windows(), per_row = s.width / s.window;
    const std::size_t y = (w / per_row) * s.window + t / s.window, x = (w % per_row) * s.window + t % s.window;
    return {oracle::wrapped(y, s.height, s.shift), oracle::wrapped(x, s.width, s.shift)};
}

double check_wsa(Rng& rng) {
    const WindowSetup s = random_window_setup(rng);
    ParamStore<double> store;
    auto params = AttentionParams<double>::create(store, "a", s.channels, s.heads, rng);
    auto bias = RelativeBias<double>::create(store, "b", s.window, s.heads, rng);
    jitter(store, rng);
    const std::size_t n = s.window * s.window, groups = s.batch * s.windows();
    auto q = random_tensor({groups, n, s.channels}, rng);
    auto kv = random_tensor({groups, n, s.channels}, rng);
    Tensor<double> mask;
    if (s.shift != 0) mask = attention_mask<double>(s.height, s.width, s.window, s.shift, s.shift, s.heads);
    auto res = wsa(q, kv, kv, params, &bias, mask);

    const auto attn = oracle::Attention::of(params);
    const auto qm = oracle::rows(q, s.channels), km = oracle::rows(kv, s.channels);
    std::vector<oracle::Mat> out;
    for (std::size_t g = 0; g < groups; ++g) {
        oracle::Mat qs(qm.begin() + g * n, qm.begin() + (g + 1) * n), ks(km.begin() + g * n, km.begin() + (g + 1) * n);
        out.push_back(oracle::attend(
            attn, qs, ks, [&](std::size_t h, std::size_t i, std::size_t j) { return oracle::relative_bias(bias, i, j, h); },
            [&](std::size_t i, std::size_t j) { return region(s, g, i) != region(s, g, j); }));
    }
    return max_diff(res.output.data(), flatten(out));
}

double check_wmca(Rng& rng) {
    const WindowSetup s = random_window_setup(rng);
    ParamStore<double> store;
    auto params = WmcaParams<double>::create(store, "w", s.channels, s.heads, s.window, rng);
    jitter(store, rng);
    const std::size_t n = s.window * s.window, groups = s.batch * s.windows();
    auto own = random_tensor({groups, n, s.channels}, rng);
    auto other = random_tensor({groups, n, s.channels}, rng);
    Tensor<double> mask;
    if (s.shift != 0) mask = attention_mask<double>(s.height, s.width, s.window, s.shift, s.shift, s.heads, 2);
    auto res = wmca(own, other, params, mask);

    const auto attn = oracle::Attention::of(params.attn);
    const auto ln_own = oracle::LayerNorm::of(params.norm_own), ln_other = oracle::LayerNorm::of(params.norm_other);
    const auto om = oracle::rows(own, s.channels), xm = oracle::rows(other, s.channels);
    std::vector<oracle::Mat> out;
    for (std::size_t g = 0; g < groups; ++g) {
        oracle::Mat qs, ks;
        for (std::size_t t = 0; t < n; ++t) qs.push_back(ln_own(om[g * n + t]));
        ks = qs;
        for (std::size_t t = 0; t < n; ++t) ks.push_back(ln_other(xm[g * n + t]));
        out.push_back(oracle::attend(
            attn, qs, ks,
            [&](std::size_t h, std::size_t i, std::size_t j) {
                return j < n ? oracle::relative_bias(params.bias_own, i, j, h)
                             : oracle::relative_bias(params.bias_other, i, j - n, h);
            },
            [&](std::size_t i, std::size_t j) { return region(s, g, i) != region(s, g, j % n); }));
    }
    return max_diff(res.output.data(), flatten(out));
}

double check_mca(Rng& rng) {
    const std::size_t heads = 1 + rng.below(4), dim = heads * (1 + rng.below(4)), keys = 1 + rng.below(4), batch = 2;
    ParamStore<double> store;
    auto params = AttentionParams<double>::create(store, "m", dim, heads, rng);
    jitter(store, rng);
    auto q = random_tensor({batch, 1, dim}, rng);
    auto kv = random_tensor({batch, keys, dim}, rng);
    auto res = mca(q, kv, params);
    const auto attn = oracle::Attention::of(params);
    const auto qm = oracle::rows(q, dim), km = oracle::rows(kv, dim);
    std::vector<oracle::Mat> out;
    for (std::size_t b = 0; b < batch; ++b) {
        oracle::Mat ks(km.begin() + b * keys, km.begin() + (b + 1) * keys);
        out.push_back(oracle::attend(
            attn, {qm[b]}, ks, [](std::size_t, std::size_t, std::size_t) { return 0.0; },
            [](std::size_t, std::size_t) { return false; }));
    }
    return max_diff(res.output.data(), flatten(out));
}

double check_hmt(Rng& rng) {
    WindowSetup s = random_window_setup(rng);
    s.batch = 2;
    HmtStackConfig cfg;
    cfg.shift = rng.bernoulli(0.6);
    s.shift = block_shift(s.height, s.width, s.window, cfg.shift);
    ParamStore<double> store;
    Rng init = rng.split(1);
    auto block = HmtBlock<double>::create(store, "h", s.channels, s.heads, s.window, cfg, init);
    jitter(store, rng);
    const std::size_t tokens = s.height * s.width;
    auto der = random_tensor({s.batch, tokens, s.channels}, rng);
    auto cli = random_tensor({s.batch, tokens, s.channels}, rng);
    auto [der_out, cli_out] =
        block.forward(TokenGrid<double>::from(der, s.height, s.width), TokenGrid<double>::from(cli, s.height, s.width));

    const auto dm = oracle::rows(der, s.channels), cm = oracle::rows(cli, s.channels);
    std::vector<oracle::Mat> want_der, want_cli;
    for (std::size_t b = 0; b < s.batch; ++b) {
        oracle::Mat d(dm.begin() + b * tokens, dm.begin() + (b + 1) * tokens);
        oracle::Mat c(cm.begin() + b * tokens, cm.begin() + (b + 1) * tokens);
        want_der.push_back(oracle::hmt_branch(block.to_der, d, c, s.height, s.width, s.window, s.shift));
        want_cli.push_back(oracle::hmt_branch(block.to_cli, c, d, s.height, s.width, s.window, s.shift));
    }
    return std::max(max_diff(der_out.tokens.data(), flatten(want_der)),
                    max_diff(cli_out.tokens.data(), flatten(want_cli)));
}

double check_mtp(Rng& rng) {
    const std::size_t heads = 1 + rng.below(4), dim = heads * (1 + rng.below(4)), batch = 2;
    ParamStore<double> store;
    auto block = MtpBlock<double>::create(store, "p", dim, heads, 4.0, rng);
    jitter(store, rng);
    auto f0 = random_tensor({batch, dim}, rng);
    auto fc = random_tensor({batch, dim}, rng);
    auto fd = random_tensor({batch, dim}, rng);
    auto got = block.forward(f0, fc, fd);
    const auto a = oracle::rows(f0, dim), c = oracle::rows(fc, dim), d = oracle::rows(fd, dim);
    oracle::Vec want;
    for (std::size_t b = 0; b < batch; ++b) {
        const auto row = oracle::mtp(block, a[b], c[b], d[b]);
        want.insert(want.end(), row.begin(), row.end());
    }
    return max_diff(got.data(), want);
}

Outcome attention_oracles() {
    constexpr int kInstances = 60;
    constexpr double kTol = 1e-10;
    const std::vector<std::pair<std::string, std::function<double(Rng&)>>> kernels = {
        {"wsa", check_wsa}, {"wmca", check_wmca}, {"mca", check_mca}, {"hmt", check_hmt}, {"mtp", check_mtp}};
    Rng rng(2024);
    bool ok = true;
    std::string detail;
    for (const auto& [name, fn] : kernels) {
        double worst = 0;
        for (int i = 0; i < kInstances; ++i) worst = std::max(worst, fn(rng));
        ok = ok && worst <= kTol;
        detail += name + " " + fmt("%.1e", worst) + " ";
    }
    return {ok, std::to_string(kInstances) + " instances each: " + detail};
}

// ---- 3 ---------------------------------------------------------------------

Outcome backbone_shapes() {
    Rng rng(99);
    int built = 0, attempts = 0;
    std::string problem;
    while (built < 24 && attempts < 2000) {
        ++attempts;
        ModelConfig mc;
        BackboneConfig& bb = mc.backbone;
        bb.patch_size = 1 + rng.below(2);
        bb.image_height = bb.patch_size * 8 * (1 + rng.below(3));
        bb.image_width = bb.patch_size * 8 * (1 + rng.below(3));
        if (bb.image_height * bb.image_width / (bb.patch_size * bb.patch_size) > 576) continue;
        bb.base_channels = 4 * (1 + rng.below(2));
        bb.window = 1 + rng.below(4);
        for (std::size_t s = 0; s < 4; ++s) {
            bb.stage_depths[s] = 1 + rng.below(2);
            bb.stage_heads[s] = 1 + rng.below(2);
            mc.fusion.stage_counts[s] = rng.below(3);
        }
        if (mc.fusion.total_blocks() == 0) mc.fusion.stage_counts[rng.below(4)] = 1;
        mc.fusion.shift = rng.bernoulli(0.5);
        mc.head_dim = 8;
        mc.mtp_heads = 2;
        mc.init_seed = rng.next_u64();
        try {
            mc.validate();
        } catch (const ConfigError&) {
            continue;
        }
        ++built;
        TFormer<float> model(mc);
        const std::size_t batch = 2;
        std::vector<float> img(batch * bb.image_height * bb.image_width * 3);
        for (float& v : img) v = float(rng.uniform());
        Tensor<float> derm({batch, bb.image_height, bb.image_width, 3}, img);
        Tensor<float> cli({batch, bb.image_height, bb.image_width, 3}, img);
        Tensor<float> meta = Tensor<float>::zeros({batch, mc.meta_length});

        NoGradGuard guard;
        const auto feats = model.der_backbone()->forward(derm);
        for (std::size_t s = 0; s < 4; ++s) {
            const std::size_t h = bb.image_height / (bb.patch_size << s), w = bb.image_width / (bb.patch_size << s);
            const std::size_t c = bb.base_channels << s;
            if (feats[s].height != h || feats[s].width != w || feats[s].channels != c ||
                feats[s].tokens.shape() != Shape{batch, h * w, c}) {
                problem = "stage " + std::to_string(s + 1) + " shape " + shape_str(feats[s].tokens.shape());
            }
        }
        std::vector<std::size_t> key_rows, expected;
        ForwardContext ctx;
        ctx.wmca_key_rows = &key_rows;
        model.forward(derm, cli, meta, ctx);
        for (std::size_t s = 0; s < 4; ++s) {
            const std::size_t m = bb.stage_window(s);
            for (std::size_t j = 0; j < 2 * mc.fusion.stage_counts[s]; ++j) expected.push_back(2 * m * m);
        }
        if (key_rows != expected) problem = "wmca key rows differ from 2*M^2";
        if (!problem.empty()) break;
    }
    return {built >= 20 && problem.empty(),
            std::to_string(built) + " configs" + (problem.empty() ? "" : ", " + problem)};
}

// ---- 4 ---------------------------------------------------------------------

Outcome loss_sanity() {
    const LabelSchema& schema = LabelSchema::derm7pt();
    const LabelVector truth{2, 1, 0, 2, 1, 0, 2, 1};
    std::vector<Tensor<double>> zeros, margin;
    for (std::size_t l = 0; l < kNumLabels; ++l) {
        const std::size_t k = schema.class_count(l);
        zeros.push_back(Tensor<double>::zeros({1, k}));
        std::vector<double> v(k, 0.0);
        v[truth[l]] = 50.0;
        margin.push_back(Tensor<double>({1, k}, v));
    }
    const double uniform = multi_label_loss(zeros, {truth}).item();
    const double want = (std::log(5.0) + 5 * std::log(3.0) + 2 * std::log(2.0)) / 8;
    const double confident = multi_label_loss(margin, {truth}).item();
    const bool ok = std::fabs(uniform - want) <= 1e-6 && confident < 1e-9;
    return {ok, "zero logits " + fmt("%.9f", uniform) + " (want " + fmt("%.9f", want) + "), margin 50 " +
                    fmt("%.2e", confident)};
}

// ---- 5 ---------------------------------------------------------------------

Outcome metric_checks() {
    std::vector<std::string> bad;
    auto near = [&](const std::string& what, double got, double want) {
        if (std::fabs(got - want) > 1e-4) bad.push_back(what + "=" + fmt("%.5f", got));
    };
    ClassCounts c;
    c.tp = 40;
    c.fn = 10;
    c.tn = 30;
    c.fp = 20;
    const auto m = class_metrics(c);
    near("SEN", m.sen.value, 0.8);
    near("SPE", m.spe.value, 0.6);
    near("PRE", m.pre.value, 0.6667);
    near("F1", m.f1.value, 0.7273);

    // Four cases; only DIAG is ever wrong. Expected values worked by hand.
    std::vector<LabelVector> truths(4, LabelVector{}), preds(4, LabelVector{});
    const std::size_t true_diag[] = {0, 1, 2, 0}, pred_diag[] = {0, 2, 2, 1};
    for (int i = 0; i < 4; ++i) {
        truths[i][0] = true_diag[i];
        preds[i][0] = pred_diag[i];
    }
    const auto report = compute_metrics(confusion(preds, truths));
    const auto& diag = report.labels[0];
    near("DIAG acc", diag.accuracy, 0.5);
    near("DIAG sen", diag.sen, 0.3);
    near("DIAG spe", diag.spe, 13.0 / 15.0);
    near("DIAG pre", diag.pre, 0.3);
    near("DIAG f1", diag.f1, 4.0 / 15.0);
    near("PN sen", report.labels[1].sen, 1.0 / 3.0);
    near("PN spe", report.labels[1].spe, 2.0 / 3.0);
    near("BWV f1", report.labels[2].f1, 0.5);
    near("avg", report.avg, 0.9375);
    near("AVE_SEN", report.ave_sen, (0.3 + 5.0 / 3.0 + 1.0) / 8);
    near("AVE_SPE", report.ave_spe, 0.65);
    near("AVE_PRE", report.ave_pre, (0.3 + 5.0 / 3.0 + 1.0) / 8);
    near("AVE_F1", report.ave_f1, (4.0 / 15.0 + 5.0 / 3.0 + 1.0) / 8);
    if (!report.any_degenerate) bad.push_back("degenerate flag not set");

    const fs::path dir = work_dir() / "metrics";
    emit_report(report, dir.string());
    std::ifstream in(dir / "per_class.csv");
    std::size_t lines = 0;
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) ++lines;
    if (lines != 25) bad.push_back("per_class rows " + std::to_string(lines - 1));

    std::string detail = "counts 40/10/30/20 and a four-case report, per_class rows " + std::to_string(lines - 1);
    for (const auto& b : bad) detail += "; " + b;
    return {bad.empty(), detail};
}

// ---- 6 ---------------------------------------------------------------------

Outcome synthetic_training() {
    const RunConfig base = load_config(config_path("synthetic.cfg"));
    const auto t0 = std::chrono::steady_clock::now();
    SyntheticSpec spec = resolve_config(base, {}).data.synthetic;
    spec.image_size = base.model.backbone.image_height;
    const SyntheticData syn = generate_synthetic(spec);

    auto run = [&](const std::vector<std::string>& overrides) {
        const RunConfig cfg = resolve_config(base, overrides);
        TFormer<float> model(cfg.model);
        train(model, syn.data, cfg.train);
        return evaluate(model, syn.data, Split::Test).report.labels[0].accuracy;
    };
    const double full = run({});
    const double derm = run({"model.modalities=der", "model.use_cli=false", "model.use_der=true", "model.use_meta=false"});
    const double cli = run({"model.modalities=cli", "model.use_cli=true", "model.use_der=false", "model.use_meta=false"});
    const double meta = run({"model.modalities=meta", "model.use_cli=false", "model.use_der=false", "model.use_meta=true"});
    const double elapsed = seconds_since(t0);

    const double c_derm = syn.report.at("derm"), c_cli = syn.report.at("cli"), c_meta = syn.report.at("meta");
    const double tol = 1e-9;
    const bool ok = full >= 0.90 - tol && full >= c_derm + 0.05 - tol && std::fabs(derm - c_derm) <= 0.03 + tol &&
                    std::fabs(cli - c_cli) <= 0.03 + tol && std::fabs(meta - c_meta) <= 0.03 + tol && elapsed < 900;
    return {ok, "DIAG full " + fmt("%.4f", full) + ", derm " + fmt("%.4f", derm) + "/" + fmt("%.4f", c_derm) +
                    ", cli " + fmt("%.4f", cli) + "/" + fmt("%.4f", c_cli) + ", meta " + fmt("%.4f", meta) + "/" +
                    fmt("%.4f", c_meta) + ", " + fmt("%.0f s", elapsed)};
}

// ---- 7 ---------------------------------------------------------------------

Outcome hmt_counts() {
    ModelConfig mc = resolve_config(load_config(config_path("toy.cfg")), {}).model;
    mc.fusion.stage_counts = {1, 1, 1, 1};
    const TFormer<float> four(mc);
    mc.fusion.stage_counts = {1, 1, 2, 1};
    const TFormer<float> five(mc);

    mc.fusion.stage_counts = {1, 1, 1, 1};
    mc.backbone.shared_weights = false;
    const TFormer<float> separate(mc);
    mc.backbone.shared_weights = true;
    const TFormer<float> shared(mc);
    const auto split = count_parameters(separate.params());
    const auto joint = count_parameters(shared.params());
    const std::size_t one_backbone = split.groups.at("backbone.der");
    const bool ok = four.hmt_block_count() == 4 && five.hmt_block_count() == 5 &&
                    split.total - joint.total == one_backbone && split.groups.at("backbone.cli") == one_backbone;
    return {ok, "blocks " + std::to_string(four.hmt_block_count()) + "/" + std::to_string(five.hmt_block_count()) +
                    ", sharing saves " + std::to_string(split.total - joint.total) + " of " +
                    std::to_string(one_backbone)};
}

// ---- 8 ---------------------------------------------------------------------

Outcome flops() {
    const std::uint64_t got = tfk_wmsa_flops(56, 56, 96, 7);
    return {got == 145108992ULL, "wmsa_flops(56,56,96,7) = " + std::to_string(got)};
}

// ---- 9 / 10 (through the C API) -----------------------------------------------

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

struct ApiFailure {
    std::string what;
};

void api(tfk_status s, const char* call) {
    if (s != TFK_OK) throw ApiFailure{std::string(call) + ": " + tfk_status_name(s) + " " + tfk_last_error()};
}

fs::path g_checkpoint;

Outcome determinism() {
    std::string logs[2], ckpts[2];
    for (int r = 0; r < 2; ++r) {
        const fs::path dir = work_dir() / ("run" + std::to_string(r));
        fs::create_directories(dir);
        tfk_config* cfg = nullptr;
        tfk_dataset* data = nullptr;
        tfk_model* model = nullptr;
        try {
            api(tfk_config_load(config_path("toy.cfg").c_str(), &cfg), "config_load");
            api(tfk_config_set(cfg, "model.precision", "64"), "config_set");
            api(tfk_config_set(cfg, "train.epochs", "4"), "config_set");
            api(tfk_config_resolve(cfg), "config_resolve");
            api(tfk_dataset_open(cfg, &data), "dataset_open");
            api(tfk_model_create(cfg, &model), "model_create");
            api(tfk_model_train(model, data, (dir / "train_log.csv").c_str(), nullptr, nullptr, nullptr), "train");
            api(tfk_model_save(model, (dir / "model.ckpt").c_str()), "save");
        } catch (...) {
            tfk_model_free(model);
            tfk_dataset_free(data);
            tfk_config_free(cfg);
            throw;
        }
        tfk_model_free(model);
        tfk_dataset_free(data);
        tfk_config_free(cfg);
        logs[r] = slurp(dir / "train_log.csv");
        ckpts[r] = slurp(dir / "model.ckpt");
        g_checkpoint = dir / "model.ckpt";
    }
    const bool ok = !logs[0].empty() && !ckpts[0].empty() && logs[0] == logs[1] && ckpts[0] == ckpts[1];
    return {ok, "log " + std::to_string(logs[0].size()) + " B, checkpoint " + std::to_string(ckpts[0].size()) + " B, " +
                    (ok ? "identical" : "different")};
}

Outcome attention_export() {
    if (g_checkpoint.empty()) return {false, "no checkpoint from the determinism run"};
    const fs::path dir = work_dir() / "attention";
    tfk_model* model = nullptr;
    tfk_config* cfg = nullptr;
    tfk_dataset* data = nullptr;
    std::size_t records = 0, blocks = 0;
    try {
        api(tfk_model_load(g_checkpoint.c_str(), &model), "model_load");
        api(tfk_model_config(model, &cfg), "model_config");
        api(tfk_dataset_open(cfg, &data), "dataset_open");
        api(tfk_model_hmt_blocks(model, &blocks), "hmt_blocks");
        api(tfk_model_export_attention(model, data, "syn00000", dir.c_str(), &records), "export_attention");
    } catch (...) {
        tfk_dataset_free(data);
        tfk_config_free(cfg);
        tfk_model_free(model);
        throw;
    }
    tfk_dataset_free(data);
    tfk_config_free(cfg);
    tfk_model_free(model);

    std::size_t csvs = 0, rows_checked = 0;
    double worst = 0;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.path().extension() != ".csv") continue;
        ++csvs;
        std::ifstream in(entry.path());
        std::string line;
        std::getline(in, line);
        std::map<std::pair<long, long>, double> sums;
        while (std::getline(in, line)) {
            long h, q, k;
            double w;
            if (std::sscanf(line.c_str(), "%ld,%ld,%ld,%lf", &h, &q, &k, &w) == 4) sums[{h, q}] += w;
        }
        for (const auto& [key, s] : sums) worst = std::max(worst, std::fabs(s - 1.0));
        rows_checked += sums.size();
    }
    const bool ok = csvs == 2 * blocks + 1 && records == csvs && rows_checked > 0 && worst <= 1e-5;
    return {ok, std::to_string(csvs) + " CSVs for " + std::to_string(blocks) + " HMT blocks, " +
                    std::to_string(rows_checked) + " rows, max |sum-1| " + fmt("%.1e", worst)};
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, Outcome (*)()>> criteria = {
        {"gradient suite", gradient_suite},     {"attention oracles", attention_oracles},
        {"backbone shapes", backbone_shapes},   {"loss sanity", loss_sanity},
        {"metrics", metric_checks},             {"synthetic training", synthetic_training},
        {"hmt count and sharing", hmt_counts},  {"wmsa flops", flops},
        {"determinism", determinism},           {"attention export", attention_export},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const ApiFailure& e) {
            o = {false, e.what};
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.pass) ++failures;
        std::printf("criterion %zu %s: %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].first,
                    o.detail.c_str());
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
