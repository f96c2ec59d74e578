#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mslm {

// Base for all domain errors raised by the engine. The CLI maps these to
// exit code 1; anything else escaping is a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class UnsupportedVersion : public FormatError {
 public:
  UnsupportedVersion(unsigned version, std::uint64_t offset)
      : FormatError("unsupported version " + std::to_string(version), offset),
        version_(version) {}

  unsigned version() const noexcept { return version_; }

 private:
  unsigned version_;
};

class ProviderError : public Error {
 public:
  using Error::Error;
};

/// The rule-based plan generator has no template for an instruction.
class UnsupportedInstruction : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line, int column)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + msg),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace mslm
