#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace ragsynth {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was violated by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Malformed input data. `line()` is 1-based, 0 when not line-oriented.
class DataError : public Error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DegenerateEmbedding : public Error {
 public:
  DegenerateEmbedding() : Error("degenerate embedding") {}
};

class DimensionMismatch : public Error {
 public:
  DimensionMismatch(std::size_t expected, std::size_t got)
      : Error("dimension mismatch: expected " + std::to_string(expected) + ", got " +
              std::to_string(got)),
        expected_(expected),
        got_(got) {}

  std::size_t expected() const noexcept { return expected_; }
  std::size_t got() const noexcept { return got_; }

 private:
  std::size_t expected_;
  std::size_t got_;
};

/// Remote call failed after exhausting retries.
class TransportError : public Error {
 public:
  explicit TransportError(const std::string& what, std::vector<std::size_t> failed_batches = {})
      : Error(what), failed_batches_(std::move(failed_batches)) {}

  const std::vector<std::size_t>& failed_batches() const noexcept { return failed_batches_; }

 private:
  std::vector<std::size_t> failed_batches_;
};

/// Provider answered, but the answer is unusable (refusal, empty body, bad shape).
class ProviderError : public Error {
 public:
  using Error::Error;
};

/// A structured reply could not be parsed even after the repair reprompt.
class StructuredOutputError : public Error {
 public:
  StructuredOutputError(std::string schema, const std::string& reason, std::string raw_text)
      : Error(schema + ": " + reason), schema_(std::move(schema)), raw_text_(std::move(raw_text)) {}

  const std::string& schema() const noexcept { return schema_; }
  const std::string& raw_text() const noexcept { return raw_text_; }

 private:
  std::string schema_;
  std::string raw_text_;
};

/// A parsed score fell outside its rating scale.
class ScaleError : public Error {
 public:
  using Error::Error;
};

/// Pipeline failure qualified by the stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}

  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace ragsynth
