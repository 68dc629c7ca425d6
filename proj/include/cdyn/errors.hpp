#pragma once

#include <stdexcept>
#include <string>

namespace cdyn {

// Base for every error this library raises on purpose.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Fields or kernels on incompatible grids.
class GeometryError : public Error {
public:
    using Error::Error;
};

// A parameter outside its documented domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

// Scenario file / override problems. Carries the offending line when known.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

// Unknown builtin scenario name.
class LookupError : public Error {
public:
    using Error::Error;
};

// Step size collapsed below the floor; the integrator cannot make progress.
class StiffnessError : public Error {
public:
    using Error::Error;
};

}  // namespace cdyn
