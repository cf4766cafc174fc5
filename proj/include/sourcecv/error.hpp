#pragma once

#include <stdexcept>
#include <string>

namespace sourcecv {

/// Malformed or inconsistent input data (manifests, payload files, reference tables).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid experiment or generator configuration.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace sourcecv
