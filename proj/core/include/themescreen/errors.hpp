#pragma once

#include <stdexcept>
#include <string>

namespace themescreen {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or invariant-violating transcript data.
class CorpusError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration; raised before any side effect happens.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class UnknownConfigKey : public ConfigError {
 public:
  explicit UnknownConfigKey(std::string key)
      : ConfigError("unknown config key: " + key), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

// Failure talking to a chat/embedding backend.
class GatewayError : public Error {
 public:
  GatewayError(const std::string& what, bool retryable)
      : Error(what), retryable_(retryable) {}
  bool retryable() const noexcept { return retryable_; }

 private:
  bool retryable_;
};

// Text that could not be turned into the structure we asked the LLM for.
class ParseError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

}  // namespace themescreen
