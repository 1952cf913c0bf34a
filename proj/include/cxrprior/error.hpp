#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cxrprior {

// Base for every error the toolkit raises on bad input data. The CLI maps
// these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A corpus line or row that cannot be turned into a record.
class CorpusError : public DataError {
 public:
  CorpusError(std::size_t line, std::size_t byte_offset, const std::string& what)
      : DataError("line " + std::to_string(line) + " (byte " + std::to_string(byte_offset) +
                  "): " + what),
        line_(line),
        byte_offset_(byte_offset) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::size_t line_;
  std::size_t byte_offset_;
};

class RulesError : public DataError {
 public:
  RulesError(std::size_t line, const std::string& what)
      : DataError(line == 0 ? what : "rules line " + std::to_string(line) + ": " + what),
        line_(line) {}

  // 0 when the problem is not tied to a single line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace cxrprior
