// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "data/dataset.hpp"

namespace tfk {

/// (derm texture, cli shape, meta bit) -> DIAG with probability `prob`.
struct DependencyRow {
    unsigned derm = 0;
    unsigned cli = 0;
    unsigned meta = 0;
    std::size_t diag = 0;
    double prob = 0;
};

struct SyntheticSpec {
    static constexpr unsigned kDermSignals = 4;  // horizontal, vertical, checker, dots
    static constexpr unsigned kCliSignals = 5;   // large disk, small disk, wide ellipse, tall ellipse, ring

    std::size_t num_cases = 2000;
    std::size_t image_size = 32;
    std::vector<DependencyRow> table = default_table();
    /// Probability that DIAG is replaced by a uniform draw over its classes.
    double label_noise = 0.0;
    /// Std of additive pixel noise, in units of full scale.
    double pixel_noise = 0.04;
    double val_fraction = 0.15;
    double test_fraction = 0.30;
    /// Exact per-row quotas (split-wise too) instead of i.i.d. row draws.
    bool stratified = true;
    std::uint64_t seed = 7;

    static std::vector<DependencyRow> default_table();
    /// ConfigError naming the inconsistency.
    void validate() const;
};

struct Latent {
    unsigned derm = 0, cli = 0, meta = 0;
};

struct BayesReport {
    std::vector<std::pair<std::string, double>> entries;  // subset name -> accuracy
    double at(const std::string& subset) const;
};

/// Optimal DIAG accuracy when observing only the flagged signals, by exact
/// enumeration of the table (label noise included).
double bayes_accuracy(const SyntheticSpec& spec, bool derm, bool cli, bool meta);
BayesReport bayes_report(const SyntheticSpec& spec);

/// The seven checklist labels are fixed functions of the latent triple.
LabelVector synthetic_labels(const Latent& z, std::size_t diag);

Image render_derm(unsigned texture, std::size_t size, double noise, Rng& rng);
Image render_cli(unsigned shape, std::size_t size, double noise, Rng& rng);

struct SyntheticData {
    Dataset data;
    std::vector<Latent> latent;  // parallel to data.cases
    BayesReport report;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace tfk
