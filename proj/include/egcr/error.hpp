#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace egcr {

/// Base of every error the engine raises.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A line of an input file could not be parsed. `line()` is 1-based.
class ParseError : public Error {
public:
  ParseError(std::string source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what),
        source_(std::move(source)), line_(line) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }

private:
  std::string source_;
  std::size_t line_;
};

/// Referential integrity violated (dangling id, duplicate name, mixed items).
class IntegrityError : public Error {
public:
  using Error::Error;
};

/// Unregistered id looked up.
class LookupError : public Error {
public:
  using Error::Error;
};

/// Vector/matrix shapes do not agree.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// Invalid or incomplete configuration.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A precondition of an operation was not met by the caller.
class ContractViolation : public Error {
public:
  using Error::Error;
};

/// Template placeholder could not be resolved.
class TemplateError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Input data rejected as a whole (e.g. too many malformed records).
class DataError : public Error {
public:
  using Error::Error;
};

class NotFoundError : public Error {
public:
  using Error::Error;
};

class ValidationError : public Error {
public:
  using Error::Error;
};

}  // namespace egcr
