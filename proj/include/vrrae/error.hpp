#pragma once

#include <stdexcept>
#include <string>

namespace vrrae {

/// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not fit the operation.
struct ShapeError : Error {
  using Error::Error;
};

/// Invalid values (non-finite input, zero sigma, bad rank, ...).
struct ValueError : Error {
  using Error::Error;
};

/// File and stream failures; message carries the byte offset when known.
struct IoError : Error {
  using Error::Error;
};

}  // namespace vrrae
