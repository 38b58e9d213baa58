#pragma once

#include <stdexcept>
#include <string>

namespace hilra {

// Every failure the library reports derives from Error. The CLI maps the
// category to an exit code (usage/config -> 2, numerical -> 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Broken internal invariant, e.g. an interaction list that references a
// transfer vector the operator table never built.
class InternalError : public Error {
 public:
  using Error::Error;
};

}  // namespace hilra
