#pragma once

#include <stdexcept>
#include <string>

namespace ccrnn {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A numeric argument is outside its admissible range.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Malformed or insufficient input data (empty corpus, non 8-bit text, ...).
class InputError : public Error {
public:
    using Error::Error;
};

/// An id is outside the table it indexes.
class IndexError : public Error {
public:
    using Error::Error;
};

/// Inconsistent configuration, or a model paired with the wrong vocabulary.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// The training loss became NaN.
class DivergenceError : public Error {
public:
    DivergenceError(std::size_t step, const std::string& what)
        : Error(what), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class CheckpointError : public Error {
public:
    enum class Code { bad_magic, version_mismatch, truncated, checksum, kind_mismatch, malformed };

    CheckpointError(Code code, const std::string& what) : Error(what), code_(code) {}

    Code code() const noexcept { return code_; }

private:
    Code code_;
};

} // namespace ccrnn
