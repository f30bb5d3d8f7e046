#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tdsafe {

// Base for every error the library reports deliberately.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Polynomials from different variable spaces were combined.
class SpaceMismatch : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Product of two unknowns; the SOS pipeline only handles affine data.
class BilinearError : public Error {
 public:
  BilinearError(int lhs, int rhs, const std::string& what)
      : Error(what), lhs_(lhs), rhs_(rhs) {}
  int lhs() const noexcept { return lhs_; }
  int rhs() const noexcept { return rhs_; }

 private:
  int lhs_;
  int rhs_;
};

// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace tdsafe
