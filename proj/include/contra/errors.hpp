#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace contra {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A violated operation precondition (empty input, invalid config, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Rejection of a single input record or generated sequence. Carries the
// 1-based line number when the source is a file, -1 otherwise.
class ParseError : public Error {
 public:
  explicit ParseError(const std::string& msg, long line = -1)
      : Error(line >= 0 ? "line " + std::to_string(line) + ": " + msg : msg),
        line_(line) {}

  long line() const { return line_; }

 private:
  long line_;
};

// Decoding produced no usable candidates after retries.
class GenerationError : public Error {
 public:
  using Error::Error;
};

// Id join between generated outputs and gold data failed.
class JoinError : public Error {
 public:
  JoinError(const std::string& msg, std::vector<std::string> missing_ids)
      : Error(msg), missing_ids_(std::move(missing_ids)) {}

  const std::vector<std::string>& missing_ids() const { return missing_ids_; }

 private:
  std::vector<std::string> missing_ids_;
};

}  // namespace contra
