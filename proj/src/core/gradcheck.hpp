// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "core/tensor.hpp"

namespace tfk {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t coordinates = 0;
};

/// Compares the tape gradient of scalar `f` with central finite differences
/// over every coordinate of each tensor in `inputs` (or an evenly strided
/// subset when `max_coords` is nonzero). The error per coordinate is
/// |a - n| / max(|a|, |n|, 1e-8).
template <typename Real>
GradCheckResult grad_check(const std::function<Tensor<Real>()>& f, std::vector<Tensor<Real>> inputs, double eps,
                           std::size_t max_coords = 0) {
    for (auto& x : inputs) {
        x.zero_grad();
        x.set_requires_grad(true);
    }
    {
        Tensor<Real> y = f();
        if (y.numel() != 1) throw ContractError("grad_check: f must be scalar, got " + shape_str(y.shape()));
        y.backward();
    }
    GradCheckResult result;
    for (auto& x : inputs) {
        const std::vector<Real> analytic =
            x.has_grad() ? std::vector<Real>(x.grad().begin(), x.grad().end()) : std::vector<Real>(x.numel(), Real(0));
        const std::size_t n = x.numel();
        const std::size_t stride = (max_coords == 0 || n <= max_coords) ? 1 : (n + max_coords - 1) / max_coords;
        auto values = x.mutable_data();
        for (std::size_t i = 0; i < n; i += stride) {
            const Real saved = values[i];
            Real plus, minus;
            {
                NoGradGuard guard;
                values[i] = saved + static_cast<Real>(eps);
                plus = f().item();
                values[i] = saved - static_cast<Real>(eps);
                minus = f().item();
            }
            values[i] = saved;
            const double numeric = (static_cast<double>(plus) - static_cast<double>(minus)) / (2.0 * eps);
            const double a = static_cast<double>(analytic[i]);
            const double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
            result.max_rel_error = std::max(result.max_rel_error, std::fabs(a - numeric) / denom);
            ++result.coordinates;
        }
        x.zero_grad();
    }
    return result;
}

}  // namespace tfk
