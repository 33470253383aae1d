// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace tfk {

/// Base class for every error raised by the library. `kind()` maps onto the
/// stable status codes of the C API.
class Error : public std::runtime_error {
public:
    enum class Kind { Config, Data, Numeric, Io, Contract, Dimension, Window, Fusion, Label, Schema, Internal };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

#define TFK_DEFINE_ERROR(Name, K)                                   \
    class Name : public Error {                                     \
    public:                                                         \
        explicit Name(const std::string& what) : Error(Kind::K, what) {} \
    };

TFK_DEFINE_ERROR(ConfigError, Config)
TFK_DEFINE_ERROR(DataError, Data)
TFK_DEFINE_ERROR(NumericError, Numeric)
TFK_DEFINE_ERROR(IoError, Io)
TFK_DEFINE_ERROR(ContractError, Contract)
TFK_DEFINE_ERROR(DimensionError, Dimension)
TFK_DEFINE_ERROR(WindowError, Window)
TFK_DEFINE_ERROR(FusionError, Fusion)
TFK_DEFINE_ERROR(LabelError, Label)
TFK_DEFINE_ERROR(SchemaError, Schema)

#undef TFK_DEFINE_ERROR

inline std::string shape_str(const std::vector<std::size_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace tfk
