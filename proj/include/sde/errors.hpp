#pragma once

#include <stdexcept>
#include <string>

namespace sde {

// Base class for every error the library raises on purpose.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-conforming shapes (zero dimensions, mismatched operands).
class DimensionError : public Error {
public:
    using Error::Error;
};

// Argument outside its documented domain (tolerances, step counts, fractions).
class RangeError : public Error {
public:
    using Error::Error;
};

// Input that is structurally valid but has no meaningful answer
// (all-zero spectrum, zero-norm vector, empty partition).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

// Non-finite values or a numerical breakdown inside an algorithm.
class NumericError : public Error {
public:
    using Error::Error;
};

// Iteration cap reached before the residual target.
class ConvergenceError : public NumericError {
public:
    using NumericError::NumericError;
};

// Singular-value gap too small to differentiate the spectral losses.
class DegenerateGapError : public NumericError {
public:
    using NumericError::NumericError;
};

// Caller violated a documented precondition (e.g. non-orthonormal columns).
class ContractViolationError : public Error {
public:
    using Error::Error;
};

// Filesystem-level failure; carries the byte offset when known.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg, long long byte_offset = -1)
        : Error(byte_offset >= 0 ? msg + " (byte offset " + std::to_string(byte_offset) + ")"
                                 : msg),
          offset_(byte_offset) {}
    long long byte_offset() const noexcept { return offset_; }

private:
    long long offset_;
};

// Well-formed file with contents that do not match the declared format.
class FormatError : public IoError {
public:
    using IoError::IoError;
};

// Bad configuration; the message names the offending key.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Training diverged; carries the step at which it happened.
class TrainingError : public Error {
public:
    TrainingError(const std::string& msg, std::size_t step)
        : Error(msg + " at step " + std::to_string(step)), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

}  // namespace sde
