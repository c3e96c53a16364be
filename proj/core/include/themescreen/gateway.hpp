#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "themescreen/numeric/matrix.hpp"

namespace themescreen::gateway {

struct ChatRequest {
  std::string system_prompt;
  std::string user_content;
  double temperature = 0.0;
  int max_tokens = 1024;
};

struct ChatResponse {
  std::string text;
  std::string backend_id;
  bool cached = false;
};

// One row per whitespace token of the embedded text.
struct EmbeddingMatrix {
  std::vector<std::string> tokens;
  numeric::Matrix values;
};

enum class BackendKind { kRemote, kMock };

struct BackendConfig {
  BackendKind kind = BackendKind::kMock;
  std::string endpoint_url;  // remote only, e.g. http://localhost:8000
  std::string api_key_env;   // remote only: name of the env var holding the key
  std::string chat_model;
  std::string embedding_model;
  std::size_t embedding_dim = 64;
  std::uint64_t mock_seed = 1234;
  int max_attempts = 3;
  int backoff_ms = 200;
  std::size_t parallelism = 4;
  std::optional<std::filesystem::path> cache_dir;
  int timeout_seconds = 60;

  // Throws ConfigError. For remote backends this also checks that the key
  // variable is set, so misconfiguration surfaces before any network call.
  void validate() const;
};

std::string_view backend_kind_name(BackendKind kind);

// Stable identity of the configured backend; part of every cache key.
std::string backend_id(const BackendConfig& config);

// Chat and embedding transport. Implementations may throw GatewayError.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string id() const = 0;
  virtual std::string chat(const ChatRequest& request) = 0;
  // One row per token; dimension is checked by the caller.
  virtual numeric::Matrix embed_tokens(std::span<const std::string> tokens) = 0;
};

std::unique_ptr<Backend> make_mock_backend(const BackendConfig& config);
std::unique_ptr<Backend> make_remote_backend(const BackendConfig& config);

// Hex SHA-256 over the backend identity and every request field.
std::string cache_key(const ChatRequest& request, std::string_view backend_id);
std::string cache_key(const ChatRequest& request, const BackendConfig& config);

// Whitespace tokenization used for embeddings.
std::vector<std::string> tokenize(std::string_view text);

struct CallOptions {
  // Skip cache reads (the fresh response still overwrites the cache entry).
  bool bypass_cache = false;
};

struct GatewayStats {
  std::uint64_t backend_chat_calls = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t backend_embed_calls = 0;
};

// Thread-safe client over one backend with an in-memory response cache and an
// optional on-disk cache (one digest-named JSON file per request).
class Gateway {
 public:
  explicit Gateway(BackendConfig config);
  Gateway(BackendConfig config, std::unique_ptr<Backend> backend);

  ChatResponse chat(const ChatRequest& request, CallOptions options = {});
  std::vector<EmbeddingMatrix> embed(std::span<const std::string> texts);

  const BackendConfig& config() const { return config_; }
  std::string backend_id() const { return backend_->id(); }
  GatewayStats stats() const;

 private:
  std::optional<std::string> read_cache(const std::string& key);
  void write_cache(const std::string& key, const nlohmann::json& request, const nlohmann::json& response);

  BackendConfig config_;
  std::unique_ptr<Backend> backend_;
  mutable std::mutex mutex_;
  std::map<std::string, std::string> memory_;
  std::atomic<std::uint64_t> chat_calls_{0};
  std::atomic<std::uint64_t> cache_hits_{0};
  std::atomic<std::uint64_t> embed_calls_{0};
};

}  // namespace themescreen::gateway
