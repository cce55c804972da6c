#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace commitgate {

// Process exit codes double as error categories.
enum class ErrorCode : int {
  kInternal = 1,
  kInput = 2,
  kNonConvergence = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Bad user-supplied data or configuration.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorCode::kInput, what) {}
};

// Malformed git log record. Carries the byte offset of the offending line,
// the zero-based record index and, when known, the field name.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t offset, std::size_t record,
             std::string field = {})
      : InputError(what), offset_(offset), record_(record), field_(std::move(field)) {}
  std::size_t offset() const noexcept { return offset_; }
  std::size_t record() const noexcept { return record_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t offset_;
  std::size_t record_;
  std::string field_;
};

// Statistical failure that is a property of the data (no events, singular
// information, zero exposure).
class DataError : public InputError {
 public:
  explicit DataError(const std::string& what) : InputError(what) {}
};

class NonConvergenceError : public Error {
 public:
  explicit NonConvergenceError(const std::string& what)
      : Error(ErrorCode::kNonConvergence, what) {}
};

}  // namespace commitgate
