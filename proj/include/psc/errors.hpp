#pragma once

#include <stdexcept>
#include <string>

namespace psc {

/// A hypothesis required by an operation does not hold for the given input.
/// The CLI maps this to exit code 2.
class PreconditionError : public std::invalid_argument {
public:
    explicit PreconditionError(const std::string& what) : std::invalid_argument(what) {}
};

/// An iterative solver stopped without meeting its tolerance (exit code 3).
class SolverError : public std::runtime_error {
public:
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed configuration, unknown preset, unreadable file (exit code 4).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace psc
