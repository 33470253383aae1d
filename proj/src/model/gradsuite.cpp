// SPDX-License-Identifier: Apache-2.0
#include "model/gradsuite.hpp"

#include <cmath>

#include "core/gradcheck.hpp"

namespace tfk {

namespace {

using T = Tensor<double>;

constexpr double kEps = 3e-4;
constexpr double kJitter = 0.3;
constexpr std::size_t kCoordsPerTensor = 12;

T random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
    T t = T::zeros(std::move(shape));
    for (auto& v : t.mutable_data()) v = rng.uniform(lo, hi);
    return t;
}

/// sum(out * R) for a fixed random R: avoids the cancellation a plain sum
/// suffers after layer norms.
struct Projection {
    T weights;
    T operator()(const T& out) const { return sum(mul(out, weights)); }
};

struct Input {
    std::string name;
    T tensor;
};

Projection projection(const Shape& shape, Rng& rng) { return {random_tensor(shape, rng)}; }

/// Parameters offset by uniform noise. At the 0.02 init scale, gradients deep
/// in the network are around 1e-8 and a finite difference of the loss cannot
/// resolve them in 64-bit; the chain rule is checked equally well anywhere.
std::vector<Input> all_params(const ParamStore<double>& store, Rng& rng) {
    std::vector<Input> out;
    for (const auto& p : store.params()) {
        T t = p.tensor;
        const double amp = t.shape().size() == 2 ? 1.0 / std::sqrt(double(t.shape()[0])) : kJitter;
        for (auto& v : t.mutable_data()) v += rng.uniform(-amp, amp);
        out.push_back({p.name, t});
    }
    return out;
}

/// Key-projection biases shift every logit of a query row equally, so the
/// softmax cancels them and the true gradient is exactly zero; a relative
/// error there only measures roundoff.
bool zero_gradient(const std::string& name) {
    const std::string tail = "w_k.bias";
    return name.size() >= tail.size() && name.compare(name.size() - tail.size(), tail.size(), tail) == 0;
}

double max_abs_gradient(const std::function<T()>& f, T x) {
    x.zero_grad();
    x.set_requires_grad(true);
    f().backward();
    double m = 0;
    for (double g : x.grad()) m = std::max(m, std::fabs(g));
    x.zero_grad();
    return m;
}

GradRow check(const std::string& module, const std::function<T()>& f, const std::vector<Input>& inputs, double eps,
              double tolerance) {
    GradRow row;
    row.module = module;
    // Per-tensor strided subsets keep large weight matrices affordable.
    for (const auto& [name, x] : inputs) {
        if (zero_gradient(name)) {
            if (max_abs_gradient(f, x) > 1e-12) row.max_rel_error = std::max(row.max_rel_error, 1.0);
            continue;
        }
        const auto r = grad_check<double>(f, {x}, eps, kCoordsPerTensor);
        row.max_rel_error = std::max(row.max_rel_error, r.max_rel_error);
        row.coordinates += r.coordinates;
    }
    row.pass = row.max_rel_error <= tolerance;
    return row;
}

}  // namespace

std::vector<GradRow> run_gradient_suite(const ModelConfig& config, std::uint64_t seed, double tolerance) {
    config.validate();
    const Rng root(seed);
    const std::size_t c = config.backbone.base_channels;
    const std::size_t heads = config.backbone.stage_heads[0];
    const std::size_t m = config.backbone.window;
    const std::size_t n = m * m;
    const std::size_t grid = 2 * m;  // four windows
    const std::size_t d = config.head_dim;
    std::vector<GradRow> rows;

    {
        Rng rng = root.split(1);
        ParamStore<double> store;
        auto p = AttentionParams<double>::create(store, "wsa", c, heads, rng);
        auto bias = RelativeBias<double>::create(store, "wsa.bias", m, heads, rng);
        T x = random_tensor({4, n, c}, rng);
        T mask = attention_mask<double>(grid, grid, m, int(m / 2), int(m / 2), heads);
        auto proj = projection({4, n, c}, rng);
        auto inputs = all_params(store, rng);
        inputs.push_back({"x", x});
        rows.push_back(check("wsa", [&] { return proj(wsa(x, x, x, p, &bias, mask).output); }, inputs, kEps,
                             tolerance));
    }
    {
        Rng rng = root.split(2);
        ParamStore<double> store;
        auto p = WmcaParams<double>::create(store, "wmca", c, heads, m, rng);
        T own = random_tensor({4, n, c}, rng), other = random_tensor({4, n, c}, rng);
        T mask = attention_mask<double>(grid, grid, m, int(m / 2), int(m / 2), heads, 2);
        auto proj = projection({4, n, c}, rng);
        auto inputs = all_params(store, rng);
        inputs.push_back({"own", own});
        inputs.push_back({"other", other});
        rows.push_back(
            check("wmca", [&] { return proj(wmca(own, other, p, mask).output); }, inputs, kEps, tolerance));
    }
    {
        Rng rng = root.split(3);
        ParamStore<double> store;
        auto p = AttentionParams<double>::create(store, "mca", d, config.mtp_heads, rng);
        T q = random_tensor({2, 1, d}, rng), kv = random_tensor({2, 3, d}, rng);
        auto proj = projection({2, 1, d}, rng);
        auto inputs = all_params(store, rng);
        inputs.push_back({"q", q});
        inputs.push_back({"kv", kv});
        rows.push_back(check("mca", [&] { return proj(mca(q, kv, p).output); }, inputs, kEps, tolerance));
    }
    {
        Rng rng = root.split(4);
        ParamStore<double> store;
        HmtStackConfig hc = config.fusion;
        hc.shift = true;
        hc.cli_to_der = hc.der_to_cli = true;
        auto block = HmtBlock<double>::create(store, "hmt", c, heads, m, hc, rng);
        T der = random_tensor({1, grid * grid, c}, rng), cli = random_tensor({1, grid * grid, c}, rng);
        auto proj_d = projection({1, grid * grid, c}, rng), proj_c = projection({1, grid * grid, c}, rng);
        auto inputs = all_params(store, rng);
        inputs.push_back({"der", der});
        inputs.push_back({"cli", cli});
        rows.push_back(check(
            "hmt_block",
            [&] {
                auto [od, oc] = block.forward(TokenGrid<double>::from(der, grid, grid),
                                              TokenGrid<double>::from(cli, grid, grid));
                return add(proj_d(od.tokens), proj_c(oc.tokens));
            },
            inputs, kEps, tolerance));
    }
    {
        Rng rng = root.split(5);
        ParamStore<double> store;
        auto block = MtpBlock<double>::create(store, "mtp", d, config.mtp_heads, config.fusion.mlp_ratio, rng);
        T f0 = random_tensor({2, d}, rng), fc = random_tensor({2, d}, rng), fd = random_tensor({2, d}, rng);
        auto proj = projection({2, d}, rng);
        auto inputs = all_params(store, rng);
        inputs.insert(inputs.end(), {{"f_meta0", f0}, {"f_cli", fc}, {"f_der", fd}});
        rows.push_back(
            check("mtp_block", [&] { return proj(block.forward(f0, fc, fd)); }, inputs, kEps, tolerance));
    }
    {
        Rng rng = root.split(6);
        ParamStore<double> store;
        auto mlp = MetaMlp<double>::create(store, "meta_mlp", config.meta_length, d, rng);
        T x = random_tensor({2, config.meta_length}, rng, 0.0, 1.0);
        auto proj = projection({2, d}, rng);
        auto inputs = all_params(store, rng);
        inputs.push_back({"x", x});
        rows.push_back(check("meta_mlp", [&] { return proj(mlp.forward(x)); }, inputs, kEps, tolerance));
    }
    {
        Rng rng = root.split(7);
        ParamStore<double> store;
        const std::size_t input = config.selection.count() * d;
        auto layer = ClassificationLayer<double>::create(store, "classifier", input, d, LabelSchema::derm7pt(), rng);
        T x = random_tensor({2, input}, rng);
        const std::vector<LabelVector> truth{LabelVector{1, 2, 1, 0, 1, 2, 0, 1},
                                             LabelVector{4, 0, 0, 2, 2, 0, 1, 0}};
        auto inputs = all_params(store, rng);
        inputs.push_back({"x", x});
        rows.push_back(check("classification_layer", [&] { return multi_label_loss(layer.forward(x), truth); },
                             inputs, kEps, tolerance));
    }
    {
        Rng rng = root.split(8);
        ModelConfig mc = config;
        mc.init_seed = seed;
        TFormer<double> model(mc);
        const std::size_t h = mc.backbone.image_height, w = mc.backbone.image_width;
        T derm = random_tensor({1, h, w, 3}, rng, 0.0, 1.0), cli = random_tensor({1, h, w, 3}, rng, 0.0, 1.0);
        T meta = T::zeros({1, mc.meta_length});
        for (auto& v : meta.mutable_data()) v = rng.bernoulli(0.3) ? 1.0 : 0.0;
        const std::vector<LabelVector> truth{LabelVector{1, 2, 1, 0, 1, 2, 0, 1}};
        auto inputs = all_params(model.params(), rng);
        if (mc.modalities.der) inputs.push_back({"derm", derm});
        if (mc.modalities.cli) inputs.push_back({"cli", cli});
        rows.push_back(check(
            "model",
            [&] {
                return multi_label_loss(
                    model.forward(mc.modalities.der ? derm : T{}, mc.modalities.cli ? cli : T{},
                                  mc.modalities.meta ? meta : T{})
                        .logits,
                    truth);
            },
            inputs, kEps, tolerance));
    }
    return rows;
}

}  // namespace tfk
