// SPDX-License-Identifier: Apache-2.0
#include "metrics/metrics.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "core/error.hpp"

namespace tfk {

ConfusionCounts confusion(const std::vector<LabelVector>& preds, const std::vector<LabelVector>& truths,
                          const LabelSchema& schema) {
    if (preds.size() != truths.size()) {
        throw ContractError("confusion: " + std::to_string(preds.size()) + " predictions vs " +
                            std::to_string(truths.size()) + " truths");
    }
    ConfusionCounts c;
    c.cases = preds.size();
    c.correct.assign(kNumLabels, 0);
    for (std::size_t l = 0; l < kNumLabels; ++l) c.per_class.emplace_back(schema.class_count(l));
    for (std::size_t i = 0; i < preds.size(); ++i) {
        schema.check(preds[i]);
        schema.check(truths[i]);
        for (std::size_t l = 0; l < kNumLabels; ++l) {
            const std::size_t p = preds[i][l], t = truths[i][l];
            if (p == t) ++c.correct[l];
            for (std::size_t k = 0; k < schema.class_count(l); ++k) {
                auto& cc = c.per_class[l][k];
                if (p == k && t == k) ++cc.tp;
                else if (p == k) ++cc.fp;
                else if (t == k) ++cc.fn;
                else ++cc.tn;
            }
        }
    }
    return c;
}

Ratio safe_ratio(double num, double den) {
    if (den == 0) return {0.0, true};
    return {num / den, false};
}

ClassMetrics class_metrics(const ClassCounts& c) {
    ClassMetrics m;
    m.sen = safe_ratio(double(c.tp), double(c.tp + c.fn));
    m.spe = safe_ratio(double(c.tn), double(c.tn + c.fp));
    m.pre = safe_ratio(double(c.tp), double(c.tp + c.fp));
    m.acc = safe_ratio(double(c.tp + c.tn), double(c.total()));
    // F-beta with beta = 1.
    constexpr double beta2 = 1.0;
    m.f1 = safe_ratio((1 + beta2) * m.pre.value * m.sen.value, beta2 * m.pre.value + m.sen.value);
    m.f1.degenerate = m.f1.degenerate || m.pre.degenerate || m.sen.degenerate;
    return m;
}

MetricReport compute_metrics(const ConfusionCounts& counts, const LabelSchema& schema) {
    if (counts.per_class.size() != kNumLabels || counts.correct.size() != kNumLabels) {
        throw ContractError("compute_metrics: counts do not cover the 8 labels");
    }
    MetricReport r;
    for (std::size_t l = 0; l < kNumLabels; ++l) {
        LabelMetrics lm;
        lm.name = schema.names[l];
        lm.class_names = schema.classes[l];
        lm.accuracy = safe_ratio(double(counts.correct[l]), double(counts.cases)).value;
        const auto& classes = counts.per_class[l];
        if (classes.size() != schema.class_count(l)) throw ContractError("compute_metrics: class count mismatch");
        for (const auto& cc : classes) {
            ClassMetrics m = class_metrics(cc);
            r.any_degenerate = r.any_degenerate || m.sen.degenerate || m.spe.degenerate || m.pre.degenerate ||
                               m.f1.degenerate;
            lm.sen += m.sen.value;
            lm.spe += m.spe.value;
            lm.pre += m.pre.value;
            lm.f1 += m.f1.value;
            lm.classes.push_back(m);
        }
        const double k = double(classes.size());
        lm.sen /= k;
        lm.spe /= k;
        lm.pre /= k;
        lm.f1 /= k;
        r.avg += lm.accuracy;
        r.ave_sen += lm.sen;
        r.ave_spe += lm.spe;
        r.ave_pre += lm.pre;
        r.ave_f1 += lm.f1;
        r.labels.push_back(std::move(lm));
    }
    const double n = double(kNumLabels);
    r.avg /= n;
    r.ave_sen /= n;
    r.ave_spe /= n;
    r.ave_pre /= n;
    r.ave_f1 /= n;
    return r;
}

namespace {

std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

std::ofstream open_csv(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw IoError("cannot write '" + p.string() + "'");
    return f;
}

}  // namespace

void emit_report(const MetricReport& report, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());

    auto per_label = open_csv(fs::path(dir) / "per_label.csv");
    per_label << "label,accuracy,SEN,SPE,PRE,F1\n";
    for (const auto& l : report.labels) {
        per_label << l.name << ',' << fmt4(l.accuracy) << ',' << fmt4(l.sen) << ',' << fmt4(l.spe) << ','
                  << fmt4(l.pre) << ',' << fmt4(l.f1) << '\n';
    }

    auto per_class = open_csv(fs::path(dir) / "per_class.csv");
    per_class << "label,class,SEN,SPE,PRE,F1,degenerate\n";
    for (const auto& l : report.labels) {
        for (std::size_t k = 0; k < l.classes.size(); ++k) {
            const auto& m = l.classes[k];
            const bool deg = m.sen.degenerate || m.spe.degenerate || m.pre.degenerate || m.f1.degenerate;
            per_class << l.name << ',' << l.class_names[k] << ',' << fmt4(m.sen.value) << ',' << fmt4(m.spe.value)
                      << ',' << fmt4(m.pre.value) << ',' << fmt4(m.f1.value) << ',' << (deg ? 1 : 0) << '\n';
        }
    }

    auto summary = open_csv(fs::path(dir) / "summary.csv");
    summary << "metric,value\n"
            << "avg," << fmt4(report.avg) << '\n'
            << "AVE_SEN," << fmt4(report.ave_sen) << '\n'
            << "AVE_SPE," << fmt4(report.ave_spe) << '\n'
            << "AVE_PRE," << fmt4(report.ave_pre) << '\n'
            << "AVE_F1," << fmt4(report.ave_f1) << '\n';
    if (!per_label || !per_class || !summary) throw IoError("write failed under '" + dir + "'");
}

}  // namespace tfk
