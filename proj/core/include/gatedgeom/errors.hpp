#pragma once

#include <stdexcept>
#include <string>

namespace gatedgeom {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Evaluation point outside an embedding's domain, a finite-difference stencil
// leaving the domain, or a non-finite value.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Induced metric too close to singular for curvature to be defined.
class RegularityError : public Error {
 public:
  RegularityError(const std::string& what, double det)
      : Error(what + " (det g = " + std::to_string(det) + ")"), det_(det) {}
  double determinant() const noexcept { return det_; }

 private:
  double det_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

// A checked mathematical precondition (e.g. a critical point) failed.
class PreconditionError : public Error {
 public:
  PreconditionError(const std::string& what, double measured)
      : Error(what + " (measured " + std::to_string(measured) + ")"),
        measured_(measured) {}
  double measured() const noexcept { return measured_; }

 private:
  double measured_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A witness construction whose invariants do not hold.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

}  // namespace gatedgeom
