#pragma once

#include <stdexcept>
#include <string>

namespace kgmask {

// Error taxonomy shared by the library and the CLI exit-code contract:
// usage -> 1, data -> 2, runtime -> 3.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct RuntimeError : std::runtime_error {
    explicit RuntimeError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace kgmask
