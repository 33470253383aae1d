// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "model/schema.hpp"

namespace tfk {

struct ClassCounts {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    std::size_t total() const { return tp + fp + tn + fn; }
};

/// One-vs-rest counts per (label, class), plus exact-match hits per label.
struct ConfusionCounts {
    std::size_t cases = 0;
    std::vector<std::vector<ClassCounts>> per_class;  // [label][class]
    std::vector<std::size_t> correct;                 // [label]
};

ConfusionCounts confusion(const std::vector<LabelVector>& preds, const std::vector<LabelVector>& truths,
                          const LabelSchema& schema = LabelSchema::derm7pt());

/// A ratio whose denominator was zero reports 0 and sets `degenerate`.
struct Ratio {
    double value = 0;
    bool degenerate = false;
};

Ratio safe_ratio(double num, double den);

struct ClassMetrics {
    Ratio sen, spe, pre, f1, acc;
};

/// Applies the one-vs-rest definitions to a single count set.
ClassMetrics class_metrics(const ClassCounts& c);

struct LabelMetrics {
    std::string name;
    double accuracy = 0;                       // exact match on this label
    std::vector<std::string> class_names;
    std::vector<ClassMetrics> classes;
    double sen = 0, spe = 0, pre = 0, f1 = 0;  // macro over classes
};

struct MetricReport {
    std::vector<LabelMetrics> labels;
    double avg = 0;  // mean of the label accuracies
    double ave_sen = 0, ave_spe = 0, ave_pre = 0, ave_f1 = 0;
    bool any_degenerate = false;
};

MetricReport compute_metrics(const ConfusionCounts& counts, const LabelSchema& schema = LabelSchema::derm7pt());

/// Writes per_label.csv, per_class.csv and summary.csv under `dir`.
void emit_report(const MetricReport& report, const std::string& dir);

}  // namespace tfk
