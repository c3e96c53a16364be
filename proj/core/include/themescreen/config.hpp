#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "themescreen/corpus.hpp"
#include "themescreen/gateway.hpp"
#include "themescreen/train.hpp"

namespace themescreen {

struct ServiceSettings {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_dir = "service-data";
  std::filesystem::path checkpoint;
  std::string cors_origin = "*";
};

// Namespaced run settings (corpus.*, gateway.*, train.*, eval.*, service.*).
// Every key must exist in the shipped defaults; anything else is rejected.
class RunConfig {
 public:
  RunConfig();

  static const nlohmann::json& defaults();

  // Throws UnknownConfigKey or ConfigError (wrong type).
  void merge(const nlohmann::json& overrides);
  void merge_file(const std::filesystem::path& path);
  // "train.epochs=10". The value is read as JSON, falling back to a string.
  void set(std::string_view assignment);
  void set(std::string_view key, const nlohmann::json& value);

  const nlohmann::json& values() const { return values_; }
  const nlohmann::json& at(std::string_view dotted) const;

  corpus::SyntheticSpec synthetic_spec() const;
  corpus::SplitFractions split_fractions() const;
  std::uint64_t split_seed() const;
  gateway::BackendConfig backend_config() const;
  int extraction_retries() const;
  int feedback_retries() const;
  train::TrainConfig train_config() const;
  ServiceSettings service_settings() const;

 private:
  nlohmann::json values_;
};

}  // namespace themescreen
