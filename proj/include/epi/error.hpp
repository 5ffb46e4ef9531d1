#pragma once

#include <stdexcept>
#include <string>

namespace epi {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-level parse failure; line is 1-based and counts the header row.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace epi
