// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "data/synthetic.hpp"
#include "model/train.hpp"

namespace tfk {

enum class DataSource { Synthetic, Manifest };

struct DataConfig {
    DataSource source = DataSource::Synthetic;
    std::string manifest;
    SyntheticSpec synthetic;
};

/// Everything one CLI invocation needs, merged from the config file, flag
/// overrides and TFK_SEED.
struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    DataConfig data;
    unsigned precision = 32;  // 32 or 64

    /// Throws ConfigError on the first invalid value.
    void validate() const;
    /// Every key, one `section.key = value` line each, in a fixed order.
    std::string canonical_text() const;
};

/// Applies one `section.key = value` assignment.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);

/// Parses the flat text format: `section.key = value` lines, `#` comments,
/// blank lines ignored. Unknown keys are errors.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::string& path);

/// `key=value` overrides, then TFK_SEED if set; validates the result.
RunConfig resolve_config(RunConfig config, const std::vector<std::string>& overrides);

}  // namespace tfk
