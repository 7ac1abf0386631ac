#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace paroc {

/// Base class for all toolkit errors that indicate misuse or bad input
/// (malformed expressions, inconsistent meshes, invalid configs).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Hard numerical failure inside a PDE solve: singular step matrix, stalled
/// or non-converged inner Newton, NaN contamination. The outer optimal
/// control iteration reports soft failures through a status enum instead.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Expression syntax or variable-scope error; offset is a 0-based byte
/// position into the original text.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, std::size_t offset)
      : Error(msg + " at offset " + std::to_string(offset)), offset_(offset) {}

  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Bad key, bad value, or unknown key in a config file.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace paroc
