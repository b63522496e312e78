#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace profvec {

/// Base of every error raised by the library. Carries a one-line message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  IoError(const std::string& path, const std::string& what)
      : Error(what + ": " + path), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

/// Malformed input. `line` is 1-based; 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class OutOfVocabularyError : public Error {
 public:
  explicit OutOfVocabularyError(const std::string& token)
      : Error("token not in vocabulary: " + token), token_(token) {}
  const std::string& token() const { return token_; }

 private:
  std::string token_;
};

/// Raised by the cross-validation harness when a fold's fitted tables
/// contain a token seen only in that fold's test profiles.
class LeakageError : public Error {
 public:
  using Error::Error;
};

}  // namespace profvec
