// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <string>

#include "core/nn.hpp"

namespace tfk {

inline constexpr char kCheckpointTag[] = "tfk-ckpt-v1";

/// FNV-1a 64-bit digest of a canonical config text.
std::uint64_t config_digest(const std::string& text);

struct CheckpointHeader {
    std::string config_text;
    std::uint64_t digest = 0;
    unsigned value_bytes = 8;
    std::size_t records = 0;
};

/// Layout, all integers little-endian:
///   "tfk-ckpt-v1\0" | u32 value_bytes | u64 len, config text | u64 digest |
///   u64 record count | per record: u32 len, name | u32 rank | u64 extents[rank] | values
template <typename Real>
void save_checkpoint(const std::string& path, const ParamStore<Real>& store, const std::string& config_text);

CheckpointHeader read_checkpoint_header(const std::string& path);

/// Loads every record into the matching parameter; names and shapes must
/// match exactly and every parameter must be covered.
template <typename Real>
CheckpointHeader load_checkpoint(const std::string& path, ParamStore<Real>& store);

/// Partial import through a rename table (checkpoint name -> parameter
/// name). Unmapped names are tried verbatim; records without a same-shaped
/// target are skipped. Returns how many parameters were filled.
template <typename Real>
std::size_t import_checkpoint(const std::string& path, ParamStore<Real>& store,
                              const std::map<std::string, std::string>& rename);

/// Reads a two-column "source target" rename table; '#' starts a comment.
std::map<std::string, std::string> read_rename_table(const std::string& path);

}  // namespace tfk
