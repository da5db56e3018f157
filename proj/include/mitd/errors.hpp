#pragma once

#include <stdexcept>
#include <string>

namespace mitd {

/// Unreadable or unwritable file.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid hyperparameters, or an operation called in the wrong state.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Data that violates an operation's input contract (IDs out of range, negative intervals, ...).
class InputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Tensor shapes that do not line up.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Malformed model file or JSONL record.
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace mitd
