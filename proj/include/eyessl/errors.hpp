#pragma once

#include <stdexcept>
#include <string>

namespace eyessl {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unknown configuration entry. key() names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string key, const std::string& message)
      : Error("config key '" + key + "': " + message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// A well-formed value that violates a domain invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

// Shape / structure mismatch between operands.
class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  IoError(std::string path, const std::string& message)
      : Error(path + ": " + message), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Non-finite value produced during training. term() names the loss component.
class NumericError : public Error {
 public:
  NumericError(std::string term, const std::string& message)
      : Error("non-finite " + term + ": " + message), term_(std::move(term)) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

}  // namespace eyessl
