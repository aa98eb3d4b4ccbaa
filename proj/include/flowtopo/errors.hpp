#pragma once

#include <stdexcept>
#include <string>

namespace flowtopo {

/// Raised when a run configuration is malformed or out of range.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error("config: " + msg) {}
};

/// Raised when a linear or nonlinear solve cannot be completed.
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& msg) : std::runtime_error("solver: " + msg) {}
};

/// Raised on file read/write failures.
class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& msg) : std::runtime_error("io: " + msg) {}
};

} // namespace flowtopo
