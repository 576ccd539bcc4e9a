#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace relic {

// Base class for all errors raised by the toolkit. Every category below maps
// onto one CLI exit code (see tools/relic_lab.cpp).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Operand shapes do not conform; the message names both shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Mathematical domain violation (log of a nonpositive value, division by
// zero, pixel outside [0,1], ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A precondition of an operation was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// An object was used in a state that forbids the operation (e.g. a tape
// that was already replayed).
class StateError : public Error {
 public:
  using Error::Error;
};

// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed file content; carries the byte offset where parsing failed
// when it is known.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::size_t byte_offset = npos)
      : Error(what), byte_offset_(byte_offset) {}

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::size_t byte_offset() const { return byte_offset_; }

 private:
  std::size_t byte_offset_;
};

// A numeric result became nonfinite. `index` identifies the offending
// layer/tensor when applicable.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what, std::ptrdiff_t index = -1)
      : Error(what), index_(index) {}

  std::ptrdiff_t index() const { return index_; }

 private:
  std::ptrdiff_t index_;
};

}  // namespace relic
