#pragma once

#include <stdexcept>
#include <string>

namespace cyclosense {

// Error categories surfaced by the library. The CLI maps them onto exit codes.
enum class ErrorKind {
    InvalidInput,
    ShapeError,
    NumericalError,
    FormatError,
    FileNotFound,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class InvalidInput : public Error {
public:
    explicit InvalidInput(const std::string& what) : Error(ErrorKind::InvalidInput, what) {}
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorKind::ShapeError, what) {}
};

class NumericalError : public Error {
public:
    NumericalError(const std::string& what, int epoch = -1)
        : Error(ErrorKind::NumericalError, what), epoch_(epoch) {}
    // Epoch index at which training diverged, -1 outside training.
    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

class FormatError : public Error {
public:
    FormatError(const std::string& what, long long byte_offset = -1)
        : Error(ErrorKind::FormatError, what), offset_(byte_offset) {}
    long long byte_offset() const noexcept { return offset_; }

private:
    long long offset_;
};

class FileNotFound : public Error {
public:
    explicit FileNotFound(const std::string& path)
        : Error(ErrorKind::FileNotFound, "file not found: " + path) {}
};

} // namespace cyclosense
