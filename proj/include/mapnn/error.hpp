#pragma once

#include <stdexcept>
#include <string>

namespace mapnn {

/// Base class for all errors raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A tensor argument has the wrong extent along a named dimension.
class ShapeError : public Error {
public:
    ShapeError(std::string op, std::string dimension, long expected, long actual)
        : Error(op + ": dimension '" + dimension + "' expected " + std::to_string(expected) +
                " but got " + std::to_string(actual)),
          op_(std::move(op)),
          dimension_(std::move(dimension)),
          expected_(expected),
          actual_(actual) {}

    ShapeError(std::string op, std::string message)
        : Error(op + ": " + message), op_(std::move(op)) {}

    const std::string& op() const noexcept { return op_; }
    const std::string& dimension() const noexcept { return dimension_; }
    long expected() const noexcept { return expected_; }
    long actual() const noexcept { return actual_; }

private:
    std::string op_;
    std::string dimension_;
    long expected_ = -1;
    long actual_ = -1;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class FileNotFound : public IoError {
public:
    using IoError::IoError;
};

/// A file decodes but is not in the expected format (e.g. wrong bit depth).
class FormatError : public IoError {
public:
    using IoError::IoError;
};

/// Two images that must share a pixel grid do not.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

}  // namespace mapnn
