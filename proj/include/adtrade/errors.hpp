#pragma once

#include <stdexcept>
#include <string>

namespace adtrade {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the domain of an operation (e.g. z outside the support).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Density vanishes where a virtual value is requested.
class SingularityError : public Error {
 public:
  using Error::Error;
};

// psi is not monotone where monotonicity is required.
class RegularityError : public Error {
 public:
  using Error::Error;
};

// Rule / pricing combination that is not supported.
class UnsupportedRule : public Error {
 public:
  using Error::Error;
};

// Malformed configuration or input data.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Enumeration would exceed the configured budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

// Broken internal contract (a result that should be impossible).
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace adtrade
