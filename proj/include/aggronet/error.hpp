#pragma once

#include <stdexcept>
#include <string>

namespace aggronet {

// Base class for all errors raised by the library.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor shape / dimension disagreements.
struct ShapeError : Error {
    using Error::Error;
};

// Non-finite values, divergence during training.
struct NumericError : Error {
    using Error::Error;
};

// Config file / CLI validation failures. Messages carry the field path.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed input files: PPM streams, checkpoints, CSV.
struct FormatError : Error {
    using Error::Error;
};

// Filesystem failures, always with the offending path in the message.
struct IoError : Error {
    using Error::Error;
};

}  // namespace aggronet
