#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vrstc {

// Coarse failure classes; the CLI maps them to its one-line error output.
enum class ErrorKind { usage, config, io, shape, data, numeric, stage };

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::usage: return "usage";
    case ErrorKind::config: return "config";
    case ErrorKind::io: return "io";
    case ErrorKind::shape: return "shape";
    case ErrorKind::data: return "data";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::stage: return "stage";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

} // namespace vrstc
