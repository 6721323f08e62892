#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace dfl {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file; carries the 1-based line number of the offending row.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Column-role description does not match the file (missing column,
/// non-binarizable sensitive values, ...).
class SchemaError : public Error {
 public:
  using Error::Error;
};

class SplitError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A linear system could not be solved; carries the numerical rank found.
class SingularSystemError : public Error {
 public:
  SingularSystemError(const std::string& msg, std::ptrdiff_t rank)
      : Error(msg + " (rank " + std::to_string(rank) + ")"), rank_(rank) {}
  std::ptrdiff_t rank() const { return rank_; }

 private:
  std::ptrdiff_t rank_;
};

/// Iterative solver diverged; carries the last iterate for diagnosis.
class NonconvergenceError : public Error {
 public:
  NonconvergenceError(const std::string& msg, std::vector<double> last_iterate)
      : Error(msg), last_iterate_(std::move(last_iterate)) {}
  const std::vector<double>& last_iterate() const { return last_iterate_; }

 private:
  std::vector<double> last_iterate_;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace dfl
