// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace tfk {

inline constexpr std::size_t kNumLabels = 8;

using LabelVector = std::array<std::size_t, kNumLabels>;

/// The diagnosis label followed by the seven-point checklist labels, each
/// with its ordered class abbreviations.
struct LabelSchema {
    std::array<std::string, kNumLabels> names;
    std::array<std::vector<std::string>, kNumLabels> classes;

    static const LabelSchema& derm7pt();

    std::size_t class_count(std::size_t label) const { return classes[label].size(); }
    std::size_t total_classes() const;
    /// Class index of `abbrev` within `label`; throws SchemaError quoting the cell.
    std::size_t class_index(std::size_t label, const std::string& abbrev) const;
    /// Label position by name (e.g. "DaG"); throws SchemaError.
    std::size_t label_index(const std::string& name) const;
    /// Throws LabelError naming the label if any index is out of range.
    void check(const LabelVector& labels) const;
};

}  // namespace tfk
