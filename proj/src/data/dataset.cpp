// SPDX-License-Identifier: Apache-2.0
#include "data/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "core/error.hpp"

namespace tfk {

namespace fs = std::filesystem;

const char* split_name(Split s) {
    switch (s) {
        case Split::Train: return "train";
        case Split::Val: return "val";
        case Split::Test: return "test";
    }
    return "?";
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::Train;
    if (s == "val" || s == "valid" || s == "validation") return Split::Val;
    if (s == "test") return Split::Test;
    throw DataError("unknown split '" + s + "'");
}

const MetaSchema& MetaSchema::derm7pt() {
    static const MetaSchema schema{
        {"location", "sex", "management", "elevation", "difficulty"},
        {
            {"abdomen", "acral", "back", "buttocks", "chest", "genital areas", "head neck", "lower limbs",
             "upper limbs"},
            {"female", "male"},
            {"clinical follow up", "excision", "no further examination"},
            {"flat", "palpable", "nodular"},
            {"low", "medium", "high"},
        },
    };
    return schema;
}

std::size_t MetaSchema::length() const {
    std::size_t n = 0;
    for (const auto& v : vocab) n += v.size();
    return n;
}

std::size_t MetaSchema::offset(std::size_t field) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < field; ++i) n += vocab[i].size();
    return n;
}

std::size_t MetaSchema::field_index(const std::string& name) const {
    for (std::size_t i = 0; i < fields.size(); ++i)
        if (fields[i] == name) return i;
    throw SchemaError("unknown meta field '" + name + "'");
}

std::vector<std::uint8_t> encode_meta(const std::vector<std::string>& values, const MetaSchema& schema) {
    if (values.size() != schema.fields.size()) {
        throw SchemaError("encode_meta: expected " + std::to_string(schema.fields.size()) + " values, got " +
                          std::to_string(values.size()));
    }
    std::vector<std::uint8_t> out(schema.length(), 0);
    for (std::size_t f = 0; f < values.size(); ++f) {
        const auto& vocab = schema.vocab[f];
        std::size_t k = 0;
        while (k < vocab.size() && vocab[k] != values[f]) ++k;
        if (k == vocab.size()) throw SchemaError("unknown " + schema.fields[f] + " value '" + values[f] + "'");
        out[schema.offset(f) + k] = 1;
    }
    return out;
}

std::vector<std::string> decode_meta(const std::vector<std::uint8_t>& onehot, const MetaSchema& schema) {
    if (onehot.size() != schema.length()) throw SchemaError("decode_meta: wrong vector length");
    std::vector<std::string> out;
    for (std::size_t f = 0; f < schema.fields.size(); ++f) {
        const std::size_t base = schema.offset(f);
        std::size_t best = 0;
        for (std::size_t k = 1; k < schema.vocab[f].size(); ++k)
            if (onehot[base + k] > onehot[base + best]) best = k;
        out.push_back(schema.vocab[f][best]);
    }
    return out;
}

std::vector<std::size_t> Dataset::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < cases.size(); ++i)
        if (cases[i].split == split) out.push_back(i);
    return out;
}

SplitCounts Dataset::counts() const {
    SplitCounts c;
    for (const auto& k : cases) {
        if (k.split == Split::Train) ++c.train;
        else if (k.split == Split::Val) ++c.val;
        else ++c.test;
    }
    return c;
}

const Case& Dataset::find(const std::string& id) const {
    for (const auto& c : cases)
        if (c.id == id) return c;
    throw DataError("no case with id '" + id + "'");
}

bool is_official_split(const SplitCounts& c) { return c.train == 413 && c.val == 203 && c.test == 395; }

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char ch = line[i];
        if (quoted) {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (ch == '"') {
                quoted = false;
            } else {
                cur += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (ch != '\r') {
            cur += ch;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

namespace {

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

}  // namespace

Dataset load_manifest(const std::string& path, std::size_t height, std::size_t width, const LabelSchema& labels,
                      const MetaSchema& meta) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open manifest '" + path + "'");
    const fs::path root = fs::path(path).parent_path();
    std::string line;
    if (!std::getline(f, line)) throw DataError("manifest '" + path + "' is empty");
    const auto header = split_csv_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    auto need = [&](const std::string& name) {
        auto it = col.find(name);
        if (it == col.end()) throw DataError("manifest '" + path + "' lacks column '" + name + "'");
        return it->second;
    };
    const std::size_t c_id = need("case_id"), c_derm = need("derm_path"), c_cli = need("cli_path"),
                      c_split = need("split");
    std::array<std::size_t, kNumLabels> c_label{};
    for (std::size_t l = 0; l < kNumLabels; ++l) c_label[l] = need(labels.names[l]);
    std::vector<std::size_t> c_meta;
    for (const auto& name : meta.fields) c_meta.push_back(need(name));

    Dataset data;
    data.height = height;
    data.width = width;
    std::size_t row = 1;
    while (std::getline(f, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != header.size()) {
            throw DataError("manifest row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                            " cells, header has " + std::to_string(header.size()));
        }
        Case c;
        c.id = cells[c_id];
        c.split = parse_split(cells[c_split]);
        for (std::size_t l = 0; l < kNumLabels; ++l) {
            try {
                c.labels[l] = labels.class_index(l, cells[c_label[l]]);
            } catch (const SchemaError& e) {
                throw SchemaError(std::string(e.what()) + " at manifest row " + std::to_string(row) + ", column " +
                                  labels.names[l]);
            }
        }
        std::vector<std::string> values;
        for (auto i : c_meta) values.push_back(cells[i]);
        c.meta = encode_meta(values, meta);
        auto resolve = [&](const std::string& p) {
            const fs::path q(p);
            return (q.is_absolute() ? q : root / q).string();
        };
        const std::string derm_path = resolve(cells[c_derm]), cli_path = resolve(cells[c_cli]);
        if (!fs::exists(derm_path)) throw IoError("missing image '" + derm_path + "' for case " + c.id);
        if (!fs::exists(cli_path)) throw IoError("missing image '" + cli_path + "' for case " + c.id);
        c.derm = resize_bilinear(read_png(derm_path), height, width);
        c.cli = resize_bilinear(read_png(cli_path), height, width);
        data.cases.push_back(std::move(c));
    }
    return data;
}

void write_manifest(const std::string& dir, const Dataset& data, const LabelSchema& labels, const MetaSchema& meta) {
    fs::create_directories(fs::path(dir) / "images");
    std::ofstream f(fs::path(dir) / "manifest.csv");
    if (!f) throw IoError("cannot write manifest under '" + dir + "'");
    f << "case_id,derm_path,cli_path,split";
    for (const auto& n : labels.names) f << ',' << n;
    for (const auto& n : meta.fields) f << ',' << n;
    f << '\n';
    for (const auto& c : data.cases) {
        const std::string derm = "images/" + c.id + "_derm.png", cli = "images/" + c.id + "_cli.png";
        write_png((fs::path(dir) / derm).string(), c.derm);
        write_png((fs::path(dir) / cli).string(), c.cli);
        f << csv_field(c.id) << ',' << derm << ',' << cli << ',' << split_name(c.split);
        for (std::size_t l = 0; l < kNumLabels; ++l) f << ',' << labels.classes[l][c.labels[l]];
        for (const auto& v : decode_meta(c.meta, meta)) f << ',' << csv_field(v);
        f << '\n';
    }
    if (!f) throw IoError("write failed for manifest under '" + dir + "'");
}

AugmentDraw draw_augment(Rng& rng, std::size_t height, std::size_t width, int max_shift) {
    AugmentDraw d;
    d.hflip = rng.bernoulli(0.5);
    d.vflip = rng.bernoulli(0.5);
    d.rot90 = height == width ? static_cast<unsigned>(rng.below(4)) : 0u;
    if (max_shift > 0) {
        const auto span = static_cast<std::uint64_t>(2 * max_shift + 1);
        d.shift_y = static_cast<int>(rng.below(span)) - max_shift;
        d.shift_x = static_cast<int>(rng.below(span)) - max_shift;
    }
    return d;
}

Image apply_augment(const Image& image, const AugmentDraw& draw) {
    if (draw.identity()) return image;
    const std::size_t h = image.height, w = image.width;
    if (draw.rot90 % 4 != 0 && h != w) throw DataError("rotation needs a square image");
    Image out = image;
    const auto wrap = [](long v, std::size_t n) { return static_cast<std::size_t>(((v % long(n)) + long(n)) % long(n)); };
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            // Output (y, x) pulls from the source through the inverse transform.
            std::size_t sy = wrap(long(y) - draw.shift_y, h), sx = wrap(long(x) - draw.shift_x, w);
            for (unsigned r = 0; r < draw.rot90 % 4; ++r) {
                const std::size_t ty = sx, tx = w - 1 - sy;
                sy = ty;
                sx = tx;
            }
            if (draw.vflip) sy = h - 1 - sy;
            if (draw.hflip) sx = w - 1 - sx;
            for (std::size_t c = 0; c < 3; ++c) out.at(y, x, c) = image.at(sy, sx, c);
        }
    }
    return out;
}

Case augment(const Case& c, const AugmentDraw& draw) {
    if (c.split != Split::Train) return c;
    Case out = c;
    out.derm = apply_augment(c.derm, draw);
    out.cli = apply_augment(c.cli, draw);
    return out;
}

Case augment(const Case& c, Rng& rng, int max_shift) {
    if (c.split != Split::Train) return c;
    return augment(c, draw_augment(rng, c.derm.height, c.derm.width, max_shift));
}

template <typename Real>
Batch<Real> make_batch(const std::vector<const Case*>& cases) {
    if (cases.empty()) throw DataError("make_batch: no cases");
    const std::size_t b = cases.size(), h = cases[0]->derm.height, w = cases[0]->derm.width,
                      m = cases[0]->meta.size();
    Batch<Real> out;
    std::vector<Real> derm(b * h * w * 3), cli(b * h * w * 3), meta(b * m);
    constexpr Real kScale = Real(1) / Real(255);
    for (std::size_t i = 0; i < b; ++i) {
        const Case& c = *cases[i];
        if (c.derm.height != h || c.derm.width != w || c.cli.height != h || c.cli.width != w || c.meta.size() != m) {
            throw DataError("make_batch: case " + c.id + " differs in size from the batch");
        }
        for (std::size_t j = 0; j < h * w * 3; ++j) {
            derm[i * h * w * 3 + j] = Real(c.derm.pixels[j]) * kScale;
            cli[i * h * w * 3 + j] = Real(c.cli.pixels[j]) * kScale;
        }
        for (std::size_t j = 0; j < m; ++j) meta[i * m + j] = Real(c.meta[j]);
        out.labels.push_back(c.labels);
    }
    out.derm = Tensor<Real>(Shape{b, h, w, 3}, std::move(derm));
    out.cli = Tensor<Real>(Shape{b, h, w, 3}, std::move(cli));
    out.meta = Tensor<Real>(Shape{b, m}, std::move(meta));
    return out;
}

template Batch<float> make_batch(const std::vector<const Case*>&);
template Batch<double> make_batch(const std::vector<const Case*>&);

}  // namespace tfk
