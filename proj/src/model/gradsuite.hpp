// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "model/model.hpp"

namespace tfk {

struct GradRow {
    std::string module;
    double max_rel_error = 0;
    std::size_t coordinates = 0;
    bool pass = false;
};

/// Finite-difference checks (64-bit) of every trainable component at the
/// widths of `config`: wsa, wmca, mca, hmt_block, mtp_block, meta_mlp,
/// classification_layer and the end-to-end loss.
std::vector<GradRow> run_gradient_suite(const ModelConfig& config, std::uint64_t seed, double tolerance = 1e-4);

}  // namespace tfk
