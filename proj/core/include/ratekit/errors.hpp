#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ratekit {

/// Base class for all engine errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Expression syntax error; `offset` is the byte position in the source text.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t offset)
        : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Domain error during expression evaluation (ln of non-positive, division
/// by zero, 0^negative, non-differentiable point). `offset` locates the
/// offending node in the source text.
class EvalError : public Error {
public:
    EvalError(const std::string& what, std::size_t offset)
        : Error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Scenario or argument validation failure (CLI exit code 2).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Numerical kernel failure: Newton non-convergence, singular Jacobian,
/// QR iteration cap, integrator misuse (CLI exit code 3).
class NumericsError : public Error {
public:
    using Error::Error;
};

}  // namespace ratekit
