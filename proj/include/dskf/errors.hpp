#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dskf {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A builder or operation received an argument outside its precondition.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Matrix/series dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// An experiment description (scenario, run plan, ROI) is inconsistent.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An input series was degenerate (zero norm, all-zero diagonal, ...).
class DegenerateInputError : public Error {
public:
    using Error::Error;
};

/// A factorization or recursion failed numerically. Carries the filter
/// step index when the failure happened inside a recursion (-1 otherwise).
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg, int step = -1)
        : Error(step >= 0 ? msg + " (step " + std::to_string(step) + ")" : msg),
          step_(step) {}

    int step() const { return step_; }

private:
    int step_;
};

/// A file did not match its expected on-disk format. Carries the byte
/// offset at which parsing failed (-1 when not applicable, e.g. text files).
class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg, std::int64_t offset = -1)
        : Error(offset >= 0 ? msg + " (byte offset " + std::to_string(offset) + ")" : msg),
          offset_(offset) {}

    std::int64_t offset() const { return offset_; }

private:
    std::int64_t offset_;
};

}  // namespace dskf
