// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fusion/fusion.hpp"
#include "model/schema.hpp"

namespace tfk {

struct FeatureSelection {
    bool use_cli = false;
    bool use_der = true;
    bool use_meta = true;

    std::size_t count() const { return std::size_t(use_cli) + std::size_t(use_der) + std::size_t(use_meta); }
};

/// Which inputs the model consumes. All three is TFormer; the others are the
/// single-modality (or image-only) baselines.
struct Modalities {
    bool der = true;
    bool cli = true;
    bool meta = true;

    bool full() const { return der && cli && meta; }
};

struct ModelConfig {
    BackboneConfig backbone;
    HmtStackConfig fusion;
    Modalities modalities;
    FeatureSelection selection;
    std::size_t head_dim = 128;
    std::size_t mtp_heads = 4;
    bool use_mtp = true;
    std::size_t meta_length = 20;
    std::uint64_t init_seed = 0;

    void validate() const;
};

template <typename Real>
struct FusedFeatures {
    Tensor<Real> f_cli;
    Tensor<Real> f_der;
    Tensor<Real> f_meta0;
    Tensor<Real> f_meta;
};

/// Shared GELU trunk over the selected features, then one linear head per
/// label sized by its class count.
template <typename Real>
struct ClassificationLayer {
    Linear<Real> trunk;
    std::vector<Linear<Real>> heads;

    static ClassificationLayer create(ParamStore<Real>& store, const std::string& prefix, std::size_t input,
                                      std::size_t hidden, const LabelSchema& schema, Rng& rng);
    /// [B, k * dim] -> per-label logits [B, class_count].
    std::vector<Tensor<Real>> forward(const Tensor<Real>& features) const;
};

template <typename Real>
struct ForwardOutput {
    std::vector<Tensor<Real>> logits;  // one [B, class_count] per label
    FusedFeatures<Real> features;
};

/// Per-sample probabilities and argmax classes derived from logits.
struct Prediction {
    std::vector<std::vector<std::vector<double>>> probs;  // [sample][label][class]
    std::vector<LabelVector> classes;                     // [sample]
};

template <typename Real>
Prediction predict(const std::vector<Tensor<Real>>& logits);

/// Mean over labels of the batch-mean categorical cross-entropy.
template <typename Real>
Tensor<Real> multi_label_loss(const std::vector<Tensor<Real>>& logits, const std::vector<LabelVector>& truth,
                              const LabelSchema& schema = LabelSchema::derm7pt());

/// Same quantity from explicit probabilities of one sample.
double multi_label_loss(const std::vector<std::vector<double>>& probs, const LabelVector& truth,
                        const LabelSchema& schema = LabelSchema::derm7pt());

struct ParameterCounts {
    std::map<std::string, std::size_t> groups;
    std::size_t total = 0;
};

template <typename Real>
class TFormer {
public:
    explicit TFormer(const ModelConfig& config, const LabelSchema& schema = LabelSchema::derm7pt());

    /// derm, cli: [B, H, W, 3]; meta: [B, meta_length]. Inputs of absent
    /// modalities may be undefined tensors.
    ForwardOutput<Real> forward(const Tensor<Real>& derm, const Tensor<Real>& cli, const Tensor<Real>& meta,
                                const ForwardContext& ctx = {}) const;

    const ModelConfig& config() const { return config_; }
    const LabelSchema& schema() const { return schema_; }
    ParamStore<Real>& params() { return store_; }
    const ParamStore<Real>& params() const { return store_; }

    const Backbone<Real>* der_backbone() const { return der_backbone_.get(); }
    const Backbone<Real>* cli_backbone() const { return cli_backbone_.get(); }
    const HmtStack<Real>* hmt() const { return hmt_ ? &*hmt_ : nullptr; }
    const MtpBlock<Real>* mtp() const { return mtp_ ? &*mtp_ : nullptr; }
    const MetaMlp<Real>* meta_mlp() const { return meta_ ? &*meta_ : nullptr; }
    const ClassificationLayer<Real>& classifier() const { return classifier_; }
    std::size_t hmt_block_count() const { return hmt_ ? hmt_->block_count() : 0; }

private:
    ModelConfig config_;
    const LabelSchema& schema_;
    ParamStore<Real> store_;
    std::shared_ptr<Backbone<Real>> der_backbone_;
    std::shared_ptr<Backbone<Real>> cli_backbone_;
    std::optional<HmtStack<Real>> hmt_;
    std::optional<Head<Real>> head_der_;
    std::optional<Head<Real>> head_cli_;
    std::optional<MetaMlp<Real>> meta_;
    std::optional<MtpBlock<Real>> mtp_;
    ClassificationLayer<Real> classifier_;
};

/// Element counts grouped by the leading name components; shared
/// parameters are stored, and therefore counted, once.
template <typename Real>
ParameterCounts count_parameters(const ParamStore<Real>& store);

/// Closed-form element count of one HMT block at the given width.
std::size_t hmt_block_parameter_count(std::size_t channels, std::size_t window, std::size_t heads, double mlp_ratio);

}  // namespace tfk
