#pragma once

#include <stdexcept>
#include <string>

namespace sta {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// A precondition on an argument was violated (empty input, bad index, ...).
class ContractError : public Error {
public:
    using Error::Error;
};

/// A non-finite value showed up where a finite one is required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed text input; the message carries the offending line number.
class ParseError : public Error {
public:
    using Error::Error;
};

class DataError : public Error {
public:
    using Error::Error;
};

/// Dataset directory does not follow the expected layout.
class LayoutError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Checkpoint could not be reconstructed for the requested model.
class LoadError : public Error {
public:
    using Error::Error;
};

class CorruptionError : public LoadError {
public:
    using LoadError::LoadError;
};

class VersionError : public LoadError {
public:
    using LoadError::LoadError;
};

}  // namespace sta
