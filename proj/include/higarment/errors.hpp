#pragma once

#include <stdexcept>
#include <string>

namespace hg {

// Base class for every error raised by the library. The CLI maps the
// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or index contract violated by a caller.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Input rejected on content: bad config key, malformed record, empty db.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced or consumed, or a degenerate numeric input.
class NumericError : public Error {
 public:
  using Error::Error;
};

// File system or encoding failure.
class IoError : public Error {
 public:
  using Error::Error;
};

// Misuse of the autodiff tape (backward twice, use after free).
class GraphError : public Error {
 public:
  using Error::Error;
};

}  // namespace hg
