// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "data/image.hpp"
#include "model/schema.hpp"

namespace tfk {

enum class Split { Train, Val, Test };

const char* split_name(Split s);
Split parse_split(const std::string& s);  // DataError on anything else

/// Categorical patient fields and their vocabularies, concatenated into one
/// one-hot vector.
struct MetaSchema {
    std::vector<std::string> fields;
    std::vector<std::vector<std::string>> vocab;

    /// location 9, sex 2, management 3, elevation 3, difficulty 3.
    static const MetaSchema& derm7pt();

    std::size_t length() const;
    std::size_t offset(std::size_t field) const;
    std::size_t field_index(const std::string& name) const;  // SchemaError
};

/// One value per field, in schema order. SchemaError on an unknown value.
std::vector<std::uint8_t> encode_meta(const std::vector<std::string>& values,
                                      const MetaSchema& schema = MetaSchema::derm7pt());
/// Segment-wise argmax back to values.
std::vector<std::string> decode_meta(const std::vector<std::uint8_t>& onehot,
                                     const MetaSchema& schema = MetaSchema::derm7pt());

struct Case {
    std::string id;
    Image derm;
    Image cli;
    std::vector<std::uint8_t> meta;
    LabelVector labels{};
    Split split = Split::Train;
};

struct SplitCounts {
    std::size_t train = 0, val = 0, test = 0;
};

struct Dataset {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<Case> cases;

    std::vector<std::size_t> indices(Split split) const;
    SplitCounts counts() const;
    const Case& find(const std::string& id) const;  // DataError if absent
};

/// True for the 413 / 203 / 395 partition of the public release.
bool is_official_split(const SplitCounts& counts);

/// CSV header: case_id, derm_path, cli_path, split, the eight label names,
/// then the meta field names. Relative image paths resolve against the
/// manifest's directory. Images are resized to height x width.
Dataset load_manifest(const std::string& path, std::size_t height, std::size_t width,
                      const LabelSchema& labels = LabelSchema::derm7pt(),
                      const MetaSchema& meta = MetaSchema::derm7pt());

/// Writes images as PNG under `dir` and a manifest CSV pointing at them.
void write_manifest(const std::string& dir, const Dataset& data, const LabelSchema& labels = LabelSchema::derm7pt(),
                    const MetaSchema& meta = MetaSchema::derm7pt());

/// Minimal RFC 4180 line splitter (quoted fields, doubled quotes).
std::vector<std::string> split_csv_line(const std::string& line);

/// One geometric transform applied identically to both images of a case.
struct AugmentDraw {
    bool hflip = false;
    bool vflip = false;
    unsigned rot90 = 0;  // quarter turns, counter-clockwise; square images only
    int shift_y = 0;     // cyclic
    int shift_x = 0;

    bool identity() const { return !hflip && !vflip && rot90 % 4 == 0 && shift_y == 0 && shift_x == 0; }
};

AugmentDraw draw_augment(Rng& rng, std::size_t height, std::size_t width, int max_shift);
Image apply_augment(const Image& image, const AugmentDraw& draw);
/// Non-train cases come back unchanged; labels and meta are never touched.
Case augment(const Case& c, const AugmentDraw& draw);
Case augment(const Case& c, Rng& rng, int max_shift);

template <typename Real>
struct Batch {
    Tensor<Real> derm;  // [B, H, W, 3] in [0, 1]
    Tensor<Real> cli;
    Tensor<Real> meta;  // [B, meta_length]
    std::vector<LabelVector> labels;
};

template <typename Real>
Batch<Real> make_batch(const std::vector<const Case*>& cases);

}  // namespace tfk
