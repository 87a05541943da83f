#pragma once

#include <stdexcept>
#include <utility>
#include <string>

namespace exo {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Mounting triangle or cylinder geometry is degenerate at the requested angle.
class GeometryError : public Error {
public:
    using Error::Error;
};

/// A configuration value violates its schema or a physical invariant.
/// `path` is the dotted key path in the scenario file ("plant.valve_gain").
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& what)
        : Error(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

    [[nodiscard]] const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

/// NaN/Inf or divergence detected while simulating.
class NumericError : public Error {
public:
    using Error::Error;
};

/// One validation failure, reported against a scenario key path.
struct Issue {
    std::string path;
    std::string message;
};

}  // namespace exo
