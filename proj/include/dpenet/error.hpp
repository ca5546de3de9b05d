#ifndef DPENET_ERROR_HPP_
#define DPENET_ERROR_HPP_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dpenet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A distribution or map was handed a parameter outside its domain.
class ParameterDomainError : public Error {
 public:
  using Error::Error;
};

/// Truncated inverse-Gamma whose mass on (0,1) underflows.
class DegenerateTruncationError : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization failed; `minor()` is the 0-based leading minor that was not positive.
class NonPositiveDefiniteError : public Error {
 public:
  NonPositiveDefiniteError(const std::string& what, std::size_t minor)
      : Error(what), minor_(minor) {}
  std::size_t minor() const noexcept { return minor_; }

 private:
  std::size_t minor_;
};

/// A response value is outside the domain required by a transform.
class ResponseDomainError : public Error {
 public:
  ResponseDomainError(const std::string& what, std::size_t row)
      : Error(what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

/// Every categorical weight was -inf, or some other state divergence.
class NumericalCollapseError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class EmptyModelError : public Error {
 public:
  using Error::Error;
};

class EmptyMaskError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files. `line()` is 1-based, 0 when not tied to a line.
class IngestionError : public Error {
 public:
  IngestionError(const std::string& what, std::size_t line = 0)
      : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class AdapterError : public Error {
 public:
  using Error::Error;
};

class PersistenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace dpenet

#endif  // DPENET_ERROR_HPP_
