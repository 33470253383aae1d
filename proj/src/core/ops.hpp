// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "core/tensor.hpp"

namespace tfk {

using IndexMap = std::shared_ptr<const std::vector<std::uint32_t>>;

// Elementwise and broadcast arithmetic. No implicit broadcasting except the
// trailing-shape form of add_broadcast.
template <typename Real> Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b);
template <typename Real> Tensor<Real> scale(const Tensor<Real>& x, Real s);
/// x + b where x.shape ends with b.shape; b repeats over the leading axes.
template <typename Real> Tensor<Real> add_broadcast(const Tensor<Real>& x, const Tensor<Real>& b);

/// Affine map over the last axis: x[..., d_in] * w[d_in, d_out] + b[d_out].
template <typename Real>
Tensor<Real> linear(const Tensor<Real>& x, const Tensor<Real>& w, const Tensor<Real>& b = {});

/// Batched product over matching leading axes: a[..., n, k] * b[..., k, m],
/// or a[..., n, k] * b[..., m, k]^T when `transpose_b`.
template <typename Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b, bool transpose_b = false);

template <typename Real> Tensor<Real> softmax(const Tensor<Real>& x);
template <typename Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gamma, const Tensor<Real>& beta, Real eps);
/// Exact (erf) GELU.
template <typename Real> Tensor<Real> gelu(const Tensor<Real>& x);

/// out[i] = x[index[i]] reshaped to `shape`; the backward scatter-adds.
template <typename Real> Tensor<Real> gather(const Tensor<Real>& x, const IndexMap& index, Shape shape);
template <typename Real> Tensor<Real> reshape(const Tensor<Real>& x, Shape shape);
template <typename Real> Tensor<Real> permute(const Tensor<Real>& x, const std::vector<std::size_t>& axes);
template <typename Real> Tensor<Real> concat(const std::vector<Tensor<Real>>& parts, std::size_t axis);

template <typename Real> Tensor<Real> sum(const Tensor<Real>& x);
template <typename Real> Tensor<Real> mean(const Tensor<Real>& x);
/// Arithmetic mean over one axis, which is removed from the shape.
template <typename Real> Tensor<Real> mean_axis(const Tensor<Real>& x, std::size_t axis);

/// Mean over rows of -log softmax(logits[b])[target[b]].
template <typename Real>
Tensor<Real> cross_entropy(const Tensor<Real>& logits, const std::vector<std::size_t>& targets);

/// Index map for a permutation of axes, usable with gather().
IndexMap permute_index(const Shape& shape, const std::vector<std::size_t>& axes);

}  // namespace tfk
