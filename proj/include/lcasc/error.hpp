#pragma once

#include <stdexcept>
#include <string>

namespace lcasc {

// Base for every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shapes of two operands disagree; the message names the axis.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// LCA membrane potentials blew up (step size too large).
class DivergenceError : public Error {
 public:
  using Error::Error;
};

// Autoencoder epoch loss left the stable regime.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents (checkpoint, manifest, CSV, PNG).
class FormatError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace lcasc
