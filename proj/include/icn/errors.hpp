#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace icn {

/// Extents of two operands (or of an input and a layer) do not agree.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A precondition on call order or argument state was violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A class label lies outside [0, classes).
class LabelError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// A loss or gradient evaluated to NaN/Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training diverged; carries the epoch at which the loss became non-finite.
class DivergenceError : public NumericError {
 public:
  DivergenceError(std::size_t epoch, const std::string& what)
      : NumericError(what), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

/// Malformed dataset or parameter file. `location` is a byte offset or a
/// 1-based line number, depending on the format.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t location)
      : std::runtime_error(what), location_(location) {}
  std::size_t location() const { return location_; }

 private:
  std::size_t location_;
};

/// A categorical value that is not in the field's known vocabulary.
class VocabularyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid experiment configuration; `key_path` points at the offending key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& key_path, const std::string& what)
      : std::runtime_error(key_path + ": " + what), key_path_(key_path) {}
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

}  // namespace icn
