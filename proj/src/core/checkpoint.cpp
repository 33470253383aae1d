// SPDX-License-Identifier: Apache-2.0
#include "core/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace tfk {

namespace {

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path, std::ios::binary), path_(path) {
        if (!out_) throw IoError("cannot open '" + path + "' for writing");
    }
    void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
    template <typename U>
    void uint(U v) {
        unsigned char buf[sizeof(U)];
        for (std::size_t i = 0; i < sizeof(U); ++i) buf[i] = static_cast<unsigned char>(v >> (8 * i));
        bytes(buf, sizeof(U));
    }
    void str(const std::string& s) {
        bytes(s.data(), s.size());
    }
    void finish() {
        out_.flush();
        if (!out_) throw IoError("write failed for '" + path_ + "'");
    }

private:
    std::ofstream out_;
    std::string path_;
};

class Reader {
public:
    explicit Reader(const std::string& path) : in_(path, std::ios::binary), path_(path) {
        if (!in_) throw IoError("cannot open checkpoint '" + path + "'");
    }
    void bytes(void* p, std::size_t n) {
        in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
        if (!in_) throw IoError("truncated checkpoint '" + path_ + "'");
    }
    template <typename U>
    U uint() {
        unsigned char buf[sizeof(U)];
        bytes(buf, sizeof(U));
        U v = 0;
        for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(buf[i]) << (8 * i);
        return v;
    }
    std::string str(std::size_t n) {
        if (n > (1u << 30)) throw IoError("corrupt checkpoint '" + path_ + "'");
        std::string s(n, '\0');
        if (n) bytes(s.data(), n);
        return s;
    }
    double value(unsigned width) {
        if (width == 8) return std::bit_cast<double>(uint<std::uint64_t>());
        return static_cast<double>(std::bit_cast<float>(uint<std::uint32_t>()));
    }

private:
    std::ifstream in_;
    std::string path_;
};

struct Record {
    std::string name;
    Shape shape;
    std::vector<double> values;      // widened copy
    std::vector<std::uint64_t> raw;  // exact bit patterns at the stored width
};

CheckpointHeader read_header(Reader& r, const std::string& path) {
    char tag[sizeof(kCheckpointTag)];
    r.bytes(tag, sizeof(tag));
    if (std::memcmp(tag, kCheckpointTag, sizeof(tag)) != 0) throw IoError("'" + path + "' is not a tfk-ckpt-v1 file");
    CheckpointHeader h;
    h.value_bytes = r.uint<std::uint32_t>();
    if (h.value_bytes != 4 && h.value_bytes != 8) throw IoError("unsupported value width in '" + path + "'");
    h.config_text = r.str(r.uint<std::uint64_t>());
    h.digest = r.uint<std::uint64_t>();
    h.records = r.uint<std::uint64_t>();
    if (config_digest(h.config_text) != h.digest) throw IoError("config digest mismatch in '" + path + "'");
    return h;
}

std::vector<Record> read_records(Reader& r, const CheckpointHeader& h) {
    std::vector<Record> out(h.records);
    for (auto& rec : out) {
        rec.name = r.str(r.uint<std::uint32_t>());
        const auto rank = r.uint<std::uint32_t>();
        for (std::uint32_t i = 0; i < rank; ++i) rec.shape.push_back(r.uint<std::uint64_t>());
        const std::size_t n = numel(rec.shape);
        rec.values.resize(n);
        rec.raw.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (h.value_bytes == 8) {
                rec.raw[i] = r.uint<std::uint64_t>();
                rec.values[i] = std::bit_cast<double>(rec.raw[i]);
            } else {
                rec.raw[i] = r.uint<std::uint32_t>();
                rec.values[i] = std::bit_cast<float>(static_cast<std::uint32_t>(rec.raw[i]));
            }
        }
    }
    return out;
}

template <typename Real>
void fill(Tensor<Real>& t, const Record& rec, unsigned width) {
    auto dst = t.mutable_data();
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if constexpr (sizeof(Real) == 8) {
            dst[i] = width == 8 ? std::bit_cast<double>(rec.raw[i]) : rec.values[i];
        } else {
            dst[i] = width == 4 ? std::bit_cast<float>(static_cast<std::uint32_t>(rec.raw[i]))
                                : static_cast<float>(rec.values[i]);
        }
    }
}

}  // namespace

std::uint64_t config_digest(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

template <typename Real>
void save_checkpoint(const std::string& path, const ParamStore<Real>& store, const std::string& config_text) {
    Writer w(path);
    w.bytes(kCheckpointTag, sizeof(kCheckpointTag));
    w.uint<std::uint32_t>(sizeof(Real));
    w.uint<std::uint64_t>(config_text.size());
    w.str(config_text);
    w.uint<std::uint64_t>(config_digest(config_text));
    w.uint<std::uint64_t>(store.size());
    for (const auto& p : store.params()) {
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(p.name.size()));
        w.str(p.name);
        w.uint<std::uint32_t>(static_cast<std::uint32_t>(p.tensor.rank()));
        for (auto e : p.tensor.shape()) w.uint<std::uint64_t>(e);
        for (Real v : p.tensor.data()) {
            if constexpr (sizeof(Real) == 8) {
                w.uint(std::bit_cast<std::uint64_t>(v));
            } else {
                w.uint(std::bit_cast<std::uint32_t>(v));
            }
        }
    }
    w.finish();
}

CheckpointHeader read_checkpoint_header(const std::string& path) {
    Reader r(path);
    return read_header(r, path);
}

template <typename Real>
CheckpointHeader load_checkpoint(const std::string& path, ParamStore<Real>& store) {
    Reader r(path);
    CheckpointHeader h = read_header(r, path);
    auto records = read_records(r, h);
    if (records.size() != store.size()) {
        throw IoError("checkpoint '" + path + "' holds " + std::to_string(records.size()) + " records, model has " +
                      std::to_string(store.size()) + " parameters");
    }
    for (const auto& rec : records) {
        if (!store.contains(rec.name)) throw IoError("checkpoint parameter '" + rec.name + "' not in model");
        Tensor<Real> t = store.get(rec.name);
        if (t.shape() != rec.shape) {
            throw IoError("checkpoint parameter '" + rec.name + "' has shape " + shape_str(rec.shape) +
                          ", model expects " + shape_str(t.shape()));
        }
        fill(t, rec, h.value_bytes);
    }
    return h;
}

template <typename Real>
std::size_t import_checkpoint(const std::string& path, ParamStore<Real>& store,
                              const std::map<std::string, std::string>& rename) {
    Reader r(path);
    CheckpointHeader h = read_header(r, path);
    std::size_t filled = 0;
    for (const auto& rec : read_records(r, h)) {
        auto it = rename.find(rec.name);
        const std::string& target = it == rename.end() ? rec.name : it->second;
        if (!store.contains(target)) continue;
        Tensor<Real> t = store.get(target);
        if (t.shape() != rec.shape) continue;
        fill(t, rec, h.value_bytes);
        ++filled;
    }
    return filled;
}

std::map<std::string, std::string> read_rename_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open rename table '" + path + "'");
    std::map<std::string, std::string> table;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        std::string from, to;
        if (!(fields >> from)) continue;
        if (!(fields >> to)) throw ConfigError("rename table line without target: '" + line + "'");
        table[from] = to;
    }
    return table;
}

template void save_checkpoint(const std::string&, const ParamStore<float>&, const std::string&);
template void save_checkpoint(const std::string&, const ParamStore<double>&, const std::string&);
template CheckpointHeader load_checkpoint(const std::string&, ParamStore<float>&);
template CheckpointHeader load_checkpoint(const std::string&, ParamStore<double>&);
template std::size_t import_checkpoint(const std::string&, ParamStore<float>&, const std::map<std::string, std::string>&);
template std::size_t import_checkpoint(const std::string&, ParamStore<double>&,
                                       const std::map<std::string, std::string>&);

}  // namespace tfk
