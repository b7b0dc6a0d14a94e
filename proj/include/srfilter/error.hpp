#pragma once

#include <stdexcept>
#include <string>

namespace srfilter {

// Base of every error raised by the library. The CLI maps ConfigError to
// exit code 2 and everything else to exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A specification object (mixture, split, network shape, ...) violates one
// of its invariants.
class SpecError : public Error {
public:
    using Error::Error;
};

// Malformed input file.
class ParseError : public Error {
public:
    using Error::Error;
};

// Data that cannot support the requested computation (single-class
// training data, zero-range dimensions, empty inputs).
class DataError : public Error {
public:
    using Error::Error;
};

// Input vector or matrix width does not match the model.
class DimensionError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace srfilter
