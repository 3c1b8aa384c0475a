#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace factcloze {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Precondition or invariant violation on caller-supplied values.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class ExtractionError : public Error {
 public:
  ExtractionError(const std::string& what, std::string diagnostics)
      : Error(what), diagnostics_(std::move(diagnostics)) {}

  const std::string& diagnostics() const noexcept { return diagnostics_; }

 private:
  std::string diagnostics_;
};

class MergeError : public Error {
 public:
  MergeError(std::size_t expected, std::size_t actual)
      : Error("fill count mismatch: expected " + std::to_string(expected) +
              " fills, got " + std::to_string(actual)),
        expected_(expected),
        actual_(actual) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t actual() const noexcept { return actual_; }

 private:
  std::size_t expected_;
  std::size_t actual_;
};

// Transport or model failure inside a cloze backend or metric adapter.
class BackendError : public Error {
 public:
  BackendError(const std::string& what, bool retryable)
      : Error(what), retryable_(retryable) {}

  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

// A backend answered, but the answer breaks the wire contract.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace factcloze
