#pragma once

#include <stdexcept>
#include <string>

namespace vikin {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Unsupported or inconsistent configuration parameter.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Tensor or vector dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed model or run-config file.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Model file written by an incompatible format version or containing unknown tags.
class VersionError : public Error {
public:
    using Error::Error;
};

/// Network kind does not match the requested simulation mode.
class ModeError : public Error {
public:
    using Error::Error;
};

/// Offset or address outside the addressable range.
class IndexError : public Error {
public:
    using Error::Error;
};

}  // namespace vikin
