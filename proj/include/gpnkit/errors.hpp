#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gpnkit {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Matrix/vector dimensions disagree with what an operation expects.
class ShapeError : public Error {
public:
    ShapeError(const std::string& what, std::size_t expected, std::size_t actual)
        : Error(what + ": expected " + std::to_string(expected) + ", got " + std::to_string(actual)),
          expected_(expected), actual_(actual) {}

    std::size_t expected() const noexcept { return expected_; }
    std::size_t actual() const noexcept { return actual_; }

private:
    std::size_t expected_;
    std::size_t actual_;
};

/// A non-finite value showed up where a finite one is required.
class NumericalError : public Error {
public:
    NumericalError(const std::string& what, std::size_t index)
        : Error(what + " (index " + std::to_string(index) + ")"), index_(index) {}

    /// Same index, message prefixed with context.
    static NumericalError wrap(const std::string& context, const NumericalError& inner) {
        return NumericalError(context + ": " + inner.what(), inner.index_, Raw{});
    }

    std::size_t index() const noexcept { return index_; }

private:
    struct Raw {};
    NumericalError(const std::string& what, std::size_t index, Raw) : Error(what), index_(index) {}

    std::size_t index_;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class LinAlgError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace gpnkit
