#pragma once

#include <stdexcept>
#include <string>

namespace rfbarrier {

// Base class for every error raised by the library. The CLI maps each
// subclass onto a process exit code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid layout, channel, simulation or learner parameters.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Argument outside the mathematical domain of a function (e.g. d <= 0).
class DomainError : public Error {
public:
    using Error::Error;
};

// Malformed or insufficient input data (streams, tables, files).
class InputError : public Error {
public:
    using Error::Error;
};

// Speed/length estimation could not be carried out on a segment.
class EstimationError : public Error {
public:
    using Error::Error;
};

// Classifier fit failed (single class, solver did not converge).
class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace rfbarrier
