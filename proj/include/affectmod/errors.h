#pragma once

#include <stdexcept>
#include <string>

namespace affectmod {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed trajectory file; the message names the offending line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  [[nodiscard]] size_t line() const {
    return line_;
  }

 private:
  size_t line_;
};

/// Manifest or dataset consistency failure.
class LoadError : public Error {
 public:
  using Error::Error;
};

/// Precondition violation on an operation's arguments.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Numerical breakdown (non-finite likelihood, degenerate geometry, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Failure inside one stage of the generation pipeline.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}

  [[nodiscard]] const std::string& stage() const {
    return stage_;
  }

 private:
  std::string stage_;
};

} // namespace affectmod
