// SPDX-License-Identifier: Apache-2.0
#include "model/model.hpp"

#include <cmath>

namespace tfk {

namespace {
// Independent init streams per component, so adding or removing one part
// never perturbs the initial weights of another.
enum Stream : std::uint64_t { kDerBackbone = 1, kCliBackbone, kHmt, kHeads, kMeta, kMtp, kClassifier };
}  // namespace

void ModelConfig::validate() const {
    backbone.validate();
    const bool any_image = modalities.der || modalities.cli;
    if (!modalities.der && !modalities.cli && !modalities.meta) throw ConfigError("model.modalities: none enabled");
    if (modalities.meta && any_image && !(modalities.der && modalities.cli)) {
        throw ConfigError("model.modalities: meta data is fused only together with both image modalities");
    }
    if (selection.count() == 0) throw ConfigError("model.selection: at least one feature must be selected");
    if (selection.use_cli && !modalities.cli) throw ConfigError("model.selection: f_cli selected without cli input");
    if (selection.use_der && !modalities.der) throw ConfigError("model.selection: f_der selected without der input");
    if (selection.use_meta && !modalities.meta) throw ConfigError("model.selection: f_meta selected without meta input");
    if (head_dim == 0) throw ConfigError("model.head_dim must be positive");
    if (mtp_heads == 0 || head_dim % mtp_heads != 0) {
        throw ConfigError("fusion.mtp_heads = " + std::to_string(mtp_heads) + " does not divide head_dim " +
                          std::to_string(head_dim));
    }
    if (meta_length == 0) throw ConfigError("model.meta_length must be positive");
    if (modalities.der && modalities.cli && !fusion.cli_to_der && !fusion.der_to_cli) {
        throw ConfigError("fusion: at least one HMT branch must be enabled");
    }
}

template <typename Real>
ClassificationLayer<Real> ClassificationLayer<Real>::create(ParamStore<Real>& store, const std::string& prefix,
                                                            std::size_t input, std::size_t hidden,
                                                            const LabelSchema& schema, Rng& rng) {
    ClassificationLayer c;
    c.trunk = Linear<Real>::create(store, prefix + ".trunk", input, hidden, rng);
    for (std::size_t i = 0; i < kNumLabels; ++i) {
        c.heads.push_back(Linear<Real>::create(store, prefix + ".head." + schema.names[i], hidden,
                                               schema.class_count(i), rng));
    }
    return c;
}

template <typename Real>
std::vector<Tensor<Real>> ClassificationLayer<Real>::forward(const Tensor<Real>& features) const {
    if (features.rank() != 2 || features.dim(1) != trunk.weight.dim(0)) {
        throw ContractError("classification layer expects [batch, " + std::to_string(trunk.weight.dim(0)) +
                            "], got " + shape_str(features.shape()));
    }
    Tensor<Real> hidden = gelu(trunk(features));
    std::vector<Tensor<Real>> logits;
    logits.reserve(heads.size());
    for (const auto& h : heads) logits.push_back(h(hidden));
    return logits;
}

template <typename Real>
Prediction predict(const std::vector<Tensor<Real>>& logits) {
    Prediction p;
    if (logits.empty()) return p;
    const std::size_t batch = logits[0].dim(0);
    p.probs.assign(batch, std::vector<std::vector<double>>(logits.size()));
    p.classes.assign(batch, LabelVector{});
    for (std::size_t l = 0; l < logits.size(); ++l) {
        const std::size_t k = logits[l].dim(1);
        auto data = logits[l].data();
        for (std::size_t b = 0; b < batch; ++b) {
            const auto* row = data.data() + b * k;
            double hi = static_cast<double>(row[0]);
            std::size_t best = 0;
            for (std::size_t j = 1; j < k; ++j) {
                if (static_cast<double>(row[j]) > hi) {
                    hi = static_cast<double>(row[j]);
                    best = j;
                }
            }
            auto& probs = p.probs[b][l];
            probs.resize(k);
            double z = 0;
            for (std::size_t j = 0; j < k; ++j) z += (probs[j] = std::exp(static_cast<double>(row[j]) - hi));
            for (auto& v : probs) v /= z;
            p.classes[b][l] = best;
        }
    }
    return p;
}

template <typename Real>
Tensor<Real> multi_label_loss(const std::vector<Tensor<Real>>& logits, const std::vector<LabelVector>& truth,
                              const LabelSchema& schema) {
    if (logits.size() != kNumLabels) {
        throw ContractError("multi_label_loss: expected " + std::to_string(kNumLabels) + " label heads, got " +
                            std::to_string(logits.size()));
    }
    for (const auto& t : truth) schema.check(t);
    Tensor<Real> total;
    for (std::size_t l = 0; l < kNumLabels; ++l) {
        if (logits[l].dim(1) != schema.class_count(l)) {
            throw ContractError("multi_label_loss: head " + schema.names[l] + " has " +
                                std::to_string(logits[l].dim(1)) + " classes, schema has " +
                                std::to_string(schema.class_count(l)));
        }
        std::vector<std::size_t> targets(truth.size());
        for (std::size_t b = 0; b < truth.size(); ++b) targets[b] = truth[b][l];
        Tensor<Real> ce = cross_entropy(logits[l], targets);
        total = total.defined() ? add(total, ce) : ce;
    }
    return scale(total, Real(1) / Real(kNumLabels));
}

double multi_label_loss(const std::vector<std::vector<double>>& probs, const LabelVector& truth,
                        const LabelSchema& schema) {
    if (probs.size() != kNumLabels) throw ContractError("multi_label_loss: expected 8 probability vectors");
    schema.check(truth);
    double total = 0;
    for (std::size_t l = 0; l < kNumLabels; ++l) {
        if (probs[l].size() != schema.class_count(l)) {
            throw ContractError("multi_label_loss: " + schema.names[l] + " probability vector has wrong length");
        }
        total += -std::log(probs[l][truth[l]]);
    }
    return total / double(kNumLabels);
}

template <typename Real>
TFormer<Real>::TFormer(const ModelConfig& config, const LabelSchema& schema) : config_(config), schema_(schema) {
    config_.validate();
    const Rng root(config_.init_seed);
    const auto& m = config_.modalities;
    const std::size_t last = config_.backbone.stage_channels(3);
    if (m.der && m.cli && config_.backbone.shared_weights) {
        Rng rng = root.split(kDerBackbone);
        der_backbone_ = std::make_shared<Backbone<Real>>(config_.backbone, store_, "backbone.shared", rng);
        cli_backbone_ = der_backbone_;
    } else {
        if (m.der) {
            Rng rng = root.split(kDerBackbone);
            der_backbone_ = std::make_shared<Backbone<Real>>(config_.backbone, store_, "backbone.der", rng);
        }
        if (m.cli) {
            Rng rng = root.split(kCliBackbone);
            cli_backbone_ = std::make_shared<Backbone<Real>>(config_.backbone, store_, "backbone.cli", rng);
        }
    }
    if (m.der && m.cli) {
        Rng rng = root.split(kHmt);
        hmt_.emplace(config_.fusion, config_.backbone, store_, "hmt", rng);
    }
    {
        Rng rng = root.split(kHeads);
        if (m.der) head_der_ = Head<Real>::create(store_, "head.der", last, config_.head_dim, rng);
        if (m.cli) head_cli_ = Head<Real>::create(store_, "head.cli", last, config_.head_dim, rng);
    }
    if (m.meta) {
        Rng rng = root.split(kMeta);
        meta_ = MetaMlp<Real>::create(store_, "meta_mlp", config_.meta_length, config_.head_dim, rng);
        if (m.full() && config_.use_mtp) {
            Rng mtp_rng = root.split(kMtp);
            mtp_ = MtpBlock<Real>::create(store_, "mtp", config_.head_dim, config_.mtp_heads,
                                          config_.fusion.mlp_ratio, mtp_rng);
        }
    }
    Rng rng = root.split(kClassifier);
    classifier_ = ClassificationLayer<Real>::create(store_, "classifier", config_.selection.count() * config_.head_dim,
                                                    config_.head_dim, schema_, rng);
}

template <typename Real>
ForwardOutput<Real> TFormer<Real>::forward(const Tensor<Real>& derm, const Tensor<Real>& cli, const Tensor<Real>& meta,
                                           const ForwardContext& ctx) const {
    const auto& m = config_.modalities;
    if ((m.der && !derm.defined()) || (m.cli && !cli.defined()) || (m.meta && !meta.defined())) {
        throw ContractError("tformer_forward: an enabled modality has no input");
    }
    ForwardOutput<Real> out;
    auto& f = out.features;
    if (m.der && m.cli) {
        StageFeatures<Real> der_stages = der_backbone_->forward(derm);
        StageFeatures<Real> cli_stages = cli_backbone_->forward(cli);
        const Backbone<Real>* db = der_backbone_.get();
        const Backbone<Real>* cb = cli_backbone_.get();
        auto [der_final, cli_final] = hmt_->forward(
            der_stages, cli_stages, [db](std::size_t s, const TokenGrid<Real>& g) { return db->merge_into(s, g); },
            [cb](std::size_t s, const TokenGrid<Real>& g) { return cb->merge_into(s, g); }, ctx);
        f.f_der = head_der_->forward(der_final);
        f.f_cli = head_cli_->forward(cli_final);
    } else if (m.der) {
        f.f_der = head_der_->forward(der_backbone_->forward(derm)[3]);
    } else if (m.cli) {
        f.f_cli = head_cli_->forward(cli_backbone_->forward(cli)[3]);
    }
    if (m.meta) {
        if (meta.rank() != 2 || meta.dim(1) != config_.meta_length) {
            throw DimensionError("meta input must be [batch, " + std::to_string(config_.meta_length) + "], got " +
                                 shape_str(meta.shape()));
        }
        f.f_meta0 = meta_->forward(meta);
        f.f_meta = mtp_ ? mtp_->forward(f.f_meta0, f.f_cli, f.f_der, ctx) : f.f_meta0;
    }
    std::vector<Tensor<Real>> selected;
    if (config_.selection.use_cli) selected.push_back(f.f_cli);
    if (config_.selection.use_der) selected.push_back(f.f_der);
    if (config_.selection.use_meta) selected.push_back(f.f_meta);
    Tensor<Real> joined = selected.size() == 1 ? selected[0] : concat(selected, 1);
    out.logits = classifier_.forward(joined);
    return out;
}

template <typename Real>
ParameterCounts count_parameters(const ParamStore<Real>& store) {
    ParameterCounts counts;
    for (const auto& p : store.params()) {
        const auto first = p.name.find('.');
        std::string group = p.name.substr(0, first);
        if (group == "backbone" || group == "hmt" || group == "head") {
            const auto second = p.name.find('.', first + 1);
            group = p.name.substr(0, second);
        }
        counts.groups[group] += p.tensor.numel();
        counts.total += p.tensor.numel();
    }
    return counts;
}

std::size_t hmt_block_parameter_count(std::size_t channels, std::size_t window, std::size_t heads, double mlp_ratio) {
    const std::size_t c = channels;
    const auto hidden = static_cast<std::size_t>(std::lround(static_cast<double>(c) * mlp_ratio));
    const std::size_t span = 2 * window - 1;
    const std::size_t norms = 3 * 2 * c;                  // own, other, pre-MLP
    const std::size_t projections = 4 * (c * c + c);      // q, k, v, out
    const std::size_t bias_tables = 2 * span * span * heads;
    const std::size_t mlp = c * hidden + hidden + hidden * c + c;
    return 2 * (norms + projections + bias_tables + mlp);
}

template struct ClassificationLayer<float>;
template struct ClassificationLayer<double>;
template class TFormer<float>;
template class TFormer<double>;
template Prediction predict(const std::vector<Tensor<float>>&);
template Prediction predict(const std::vector<Tensor<double>>&);
template Tensor<float> multi_label_loss(const std::vector<Tensor<float>>&, const std::vector<LabelVector>&,
                                        const LabelSchema&);
template Tensor<double> multi_label_loss(const std::vector<Tensor<double>>&, const std::vector<LabelVector>&,
                                         const LabelSchema&);
template ParameterCounts count_parameters(const ParamStore<float>&);
template ParameterCounts count_parameters(const ParamStore<double>&);

}  // namespace tfk
