#pragma once

#include <stdexcept>
#include <string>

namespace maskvae {

// Input that violates an operation's preconditions (shape, range, index).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A file or payload that cannot be decoded as the expected format.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration that is malformed or incompatible with a checkpoint.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A checkpoint whose parameters or config do not fit what is asked of it.
class MismatchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace maskvae
