// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/ops.hpp"
#include "core/rng.hpp"

namespace tfk {

enum class Init { TruncNormal, Zeros, Ones };

std::string init_name(Init init);

template <typename Real>
struct Parameter {
    std::string name;
    Tensor<Real> tensor;
    std::string init_spec;
};

/// Owns every trainable tensor of a model, keyed by a unique dotted path.
/// Registration order is the canonical order for checkpoints and optimizers.
template <typename Real>
class ParamStore {
public:
    static constexpr double kInitStd = 0.02;

    Tensor<Real> create(const std::string& name, Shape shape, Init init, Rng& rng);

    const std::vector<Parameter<Real>>& params() const { return params_; }
    std::vector<Parameter<Real>>& params() { return params_; }
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    Tensor<Real> get(const std::string& name) const;

    std::size_t size() const { return params_.size(); }
    /// Total element count.
    std::size_t count() const;
    /// Element count over names starting with `prefix`.
    std::size_t count(const std::string& prefix) const;
    void zero_grad();

private:
    std::vector<Parameter<Real>> params_;
    std::map<std::string, std::size_t> index_;
};

template <typename Real>
struct Linear {
    Tensor<Real> weight;  // [d_in, d_out]
    Tensor<Real> bias;    // [d_out], may be undefined

    static Linear create(ParamStore<Real>& store, const std::string& prefix, std::size_t d_in, std::size_t d_out,
                         Rng& rng, bool with_bias = true);
    Tensor<Real> operator()(const Tensor<Real>& x) const { return linear(x, weight, bias); }
};

template <typename Real>
struct LayerNorm {
    Tensor<Real> gamma;
    Tensor<Real> beta;
    Real eps = Real(1e-5);

    static LayerNorm create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim, Rng& rng);
    Tensor<Real> operator()(const Tensor<Real>& x) const { return layer_norm(x, gamma, beta, eps); }
};

/// Two linear layers with GELU between; hidden width d * hidden_ratio.
template <typename Real>
struct Mlp {
    Linear<Real> fc1;
    Linear<Real> fc2;

    static Mlp create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim, double hidden_ratio,
                      Rng& rng);
    static Mlp create(ParamStore<Real>& store, const std::string& prefix, std::size_t d_in, std::size_t hidden,
                      std::size_t d_out, Rng& rng);
    Tensor<Real> operator()(const Tensor<Real>& x) const { return fc2(gelu(fc1(x))); }
};

/// Shape-preserving MLP block over the last axis.
template <typename Real>
Tensor<Real> mlp_block(const Mlp<Real>& mlp, const Tensor<Real>& x) {
    return mlp(x);
}

}  // namespace tfk
