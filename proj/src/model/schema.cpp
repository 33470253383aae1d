// SPDX-License-Identifier: Apache-2.0
#include "model/schema.hpp"

#include "core/error.hpp"

namespace tfk {

const LabelSchema& LabelSchema::derm7pt() {
    static const LabelSchema schema{
        {"DIAG", "PN", "BWV", "VS", "PIG", "STR", "DaG", "RS"},
        {{
            {"MEL", "NEV", "SK", "BCC", "MISC"},
            {"ABS", "TYP", "ATP"},
            {"ABS", "PRS"},
            {"ABS", "REG", "IR"},
            {"ABS", "REG", "IR"},
            {"ABS", "REG", "IR"},
            {"ABS", "REG", "IR"},
            {"ABS", "PRS"},
        }},
    };
    return schema;
}

std::size_t LabelSchema::total_classes() const {
    std::size_t n = 0;
    for (const auto& c : classes) n += c.size();
    return n;
}

std::size_t LabelSchema::class_index(std::size_t label, const std::string& abbrev) const {
    const auto& list = classes.at(label);
    for (std::size_t i = 0; i < list.size(); ++i)
        if (list[i] == abbrev) return i;
    throw SchemaError("unknown " + names[label] + " class '" + abbrev + "'");
}

std::size_t LabelSchema::label_index(const std::string& name) const {
    for (std::size_t i = 0; i < kNumLabels; ++i)
        if (names[i] == name) return i;
    throw SchemaError("unknown label '" + name + "'");
}

void LabelSchema::check(const LabelVector& labels) const {
    for (std::size_t i = 0; i < kNumLabels; ++i) {
        if (labels[i] >= class_count(i)) {
            throw LabelError("label " + names[i] + " index " + std::to_string(labels[i]) + " out of range [0, " +
                             std::to_string(class_count(i)) + ")");
        }
    }
}

}  // namespace tfk
