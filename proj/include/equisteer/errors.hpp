#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace equisteer {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-contract input (even patch size, unknown capsule id, bad shapes).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Unreadable files: bad magic, truncation, malformed JSON or wrong shapes.
class FormatError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class GridMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class FiberMismatch : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class InvalidSubgroup : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

class SizeGuardExceeded : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

// Character inner products that are not integral, or a failed homomorphism check.
class NotARepresentation : public Error {
 public:
  using Error::Error;
};

// A numerical routine could not certify its result (rank mismatch, ill-conditioning).
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class UndefinedUtilization : public Error {
 public:
  using Error::Error;
};

// Violations of the capsule type system: bad residual additions, inadmissible
// nonlinearities, fibers that do not chain. Carries the offending layer when known.
class TypeSystemError : public Error {
 public:
  explicit TypeSystemError(const std::string& msg, std::optional<int> layer = std::nullopt)
      : Error(layer ? "layer " + std::to_string(*layer) + ": " + msg : msg), layer_(layer) {}

  std::optional<int> layer() const { return layer_; }

 private:
  std::optional<int> layer_;
};

class AdmissibilityError : public TypeSystemError {
 public:
  using TypeSystemError::TypeSystemError;
};

class TrainingFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace equisteer
