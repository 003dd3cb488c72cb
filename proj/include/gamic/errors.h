#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gamic {

/// Base of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed SMILES text. `position` is the 0-based character offset at
/// which the problem was detected.
class ParseError : public Error {
 public:
  ParseError(std::size_t position, const std::string& what)
      : Error("parse error at position " + std::to_string(position) + ": " + what), position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

class UnsupportedElement : public Error {
 public:
  UnsupportedElement(std::size_t position, const std::string& symbol)
      : Error("unsupported element '" + symbol + "' at position " + std::to_string(position)), symbol_(symbol) {}
  const std::string& symbol() const noexcept { return symbol_; }

 private:
  std::string symbol_;
};

class RingClosureError : public Error {
 public:
  using Error::Error;
};

class ValenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ConfigMismatch : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NonFiniteLoss : public Error {
 public:
  using Error::Error;
};

class EmptyGraphError : public Error {
 public:
  using Error::Error;
};

class StrategyError : public Error {
 public:
  using Error::Error;
};

/// Transport-level failure that survived the configured retry budget.
class RetryableError : public Error {
 public:
  using Error::Error;
};

class BackendError : public Error {
 public:
  using Error::Error;
};

class EmptyCompletion : public Error {
 public:
  using Error::Error;
};

}  // namespace gamic
