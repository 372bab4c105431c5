#pragma once

#include <stdexcept>
#include <string>

namespace hdqt {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

// A numeric argument is outside its documented domain.
class ParameterError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data (files, labels, datasets).
class DataError : public Error {
public:
    using Error::Error;
};

// Experiment configuration rejected before any work is done.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace hdqt
