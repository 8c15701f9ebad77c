#pragma once

#include <stdexcept>
#include <string>

namespace drex {

/// Domain failure: malformed data, diverged run, non-empty review queue, ...
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Configuration or environment problem. The CLI maps this to exit code 2.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(what) {}
};

} // namespace drex
