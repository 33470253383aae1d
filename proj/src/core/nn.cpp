// SPDX-License-Identifier: Apache-2.0
#include "core/nn.hpp"

#include <cmath>

namespace tfk {

std::string init_name(Init init) {
    switch (init) {
        case Init::TruncNormal: return "trunc_normal(std=0.02)";
        case Init::Zeros: return "zeros";
        case Init::Ones: return "ones";
    }
    return "unknown";
}

template <typename Real>
Tensor<Real> ParamStore<Real>::create(const std::string& name, Shape shape, Init init, Rng& rng) {
    if (contains(name)) throw ContractError("duplicate parameter name '" + name + "'");
    std::vector<Real> data(numel(shape));
    switch (init) {
        case Init::TruncNormal:
            for (auto& v : data) v = static_cast<Real>(rng.trunc_normal(kInitStd));
            break;
        case Init::Zeros: break;
        case Init::Ones:
            for (auto& v : data) v = Real(1);
            break;
    }
    Tensor<Real> t(std::move(shape), std::move(data), true);
    index_.emplace(name, params_.size());
    params_.push_back({name, t, init_name(init)});
    return t;
}

template <typename Real>
Tensor<Real> ParamStore<Real>::get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("unknown parameter '" + name + "'");
    return params_[it->second].tensor;
}

template <typename Real>
std::size_t ParamStore<Real>::count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.tensor.numel();
    return n;
}

template <typename Real>
std::size_t ParamStore<Real>::count(const std::string& prefix) const {
    std::size_t n = 0;
    for (const auto& p : params_)
        if (p.name.compare(0, prefix.size(), prefix) == 0) n += p.tensor.numel();
    return n;
}

template <typename Real>
void ParamStore<Real>::zero_grad() {
    for (auto& p : params_) p.tensor.zero_grad();
}

template <typename Real>
Linear<Real> Linear<Real>::create(ParamStore<Real>& store, const std::string& prefix, std::size_t d_in,
                                  std::size_t d_out, Rng& rng, bool with_bias) {
    Linear l;
    l.weight = store.create(prefix + ".weight", {d_in, d_out}, Init::TruncNormal, rng);
    if (with_bias) l.bias = store.create(prefix + ".bias", {d_out}, Init::Zeros, rng);
    return l;
}

template <typename Real>
LayerNorm<Real> LayerNorm<Real>::create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim,
                                        Rng& rng) {
    LayerNorm n;
    n.gamma = store.create(prefix + ".gamma", {dim}, Init::Ones, rng);
    n.beta = store.create(prefix + ".beta", {dim}, Init::Zeros, rng);
    return n;
}

template <typename Real>
Mlp<Real> Mlp<Real>::create(ParamStore<Real>& store, const std::string& prefix, std::size_t dim,
                            double hidden_ratio, Rng& rng) {
    if (!(hidden_ratio > 0)) throw ConfigError("mlp hidden_ratio must be positive");
    const auto hidden = static_cast<std::size_t>(std::lround(static_cast<double>(dim) * hidden_ratio));
    return create(store, prefix, dim, hidden < 1 ? 1 : hidden, dim, rng);
}

template <typename Real>
Mlp<Real> Mlp<Real>::create(ParamStore<Real>& store, const std::string& prefix, std::size_t d_in,
                            std::size_t hidden, std::size_t d_out, Rng& rng) {
    Mlp m;
    m.fc1 = Linear<Real>::create(store, prefix + ".fc1", d_in, hidden, rng);
    m.fc2 = Linear<Real>::create(store, prefix + ".fc2", hidden, d_out, rng);
    return m;
}

template class ParamStore<float>;
template class ParamStore<double>;
template struct Linear<float>;
template struct Linear<double>;
template struct LayerNorm<float>;
template struct LayerNorm<double>;
template struct Mlp<float>;
template struct Mlp<double>;

}  // namespace tfk
