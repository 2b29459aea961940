#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mfgrow {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

// Inconsistent architecture description (bad usages, width conflicts).
class StructuralError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents: checkpoints, dataset batches, JSON documents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataUnavailableError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t step)
      : Error(what + " (divergence at step " + std::to_string(step) + ")"), step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace mfgrow
