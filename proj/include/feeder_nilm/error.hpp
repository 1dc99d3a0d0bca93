#pragma once

#include <stdexcept>
#include <string>

namespace feeder_nilm {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Arguments violate an operation's preconditions.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// A feature is mathematically undefined on the given window (e.g. all zeros).
class UndefinedFeature : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

/// Malformed or inconsistent configuration / library text.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Artifacts that do not belong together (fingerprint, version or dimension mismatch).
class ContractViolation : public Error {
public:
    using Error::Error;
};

}  // namespace feeder_nilm
