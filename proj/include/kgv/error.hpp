#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kgv {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed line-delimited input. `line` is 1-based.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Corrupt or truncated binary file. `offset` is the byte position where
// decoding failed.
class FormatError : public Error {
 public:
  FormatError(std::size_t offset, const std::string& what)
      : Error("offset " + std::to_string(offset) + ": " + what), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace kgv
