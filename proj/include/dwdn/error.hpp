#pragma once

#include <stdexcept>
#include <string>

namespace dwdn {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Extents that do not line up (kernel larger than image, mismatched planes, ...)
class DimensionError : public Error {
public:
    using Error::Error;
};

class ParameterError : public Error {
public:
    using Error::Error;
};

// Malformed file contents.
class FormatError : public Error {
public:
    using Error::Error;
};

class NumericError : public Error {
public:
    using Error::Error;
};

// Network channel counts that do not match the declared topology.
class TopologyError : public Error {
public:
    using Error::Error;
};

class InputError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Bug guard for the autodiff graph.
class InternalError : public Error {
public:
    using Error::Error;
};

} // namespace dwdn
