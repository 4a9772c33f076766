#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dataengine {

// Base for every error raised by the library. Callers that only need to
// report a failure can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Kabsch input whose model points span fewer than two dimensions.
class DegenerateConfiguration : public Error {
 public:
  using Error::Error;
};

// RANSAC could not find a model supported by at least three inliers.
class NoConsensus : public Error {
 public:
  using Error::Error;
};

// A parent reference that does not resolve, or a chain that does not close.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// A parent reference that resolves to a record of the wrong level.
class SchemaError : public Error {
 public:
  using Error::Error;
};

class NotFound : public Error {
 public:
  using Error::Error;
};

class WouldOverwrite : public Error {
 public:
  using Error::Error;
};

class OverfullBin : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Configuration rejected before any side effect. field() is the dotted path
// of the offending key, e.g. "thresholds.adi_mm".
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace dataengine
