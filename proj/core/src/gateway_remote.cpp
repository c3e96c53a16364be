// OpenAI-compatible HTTP backend.

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "themescreen/errors.hpp"
#include "themescreen/gateway.hpp"

namespace themescreen::gateway {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path below the origin, without trailing slash
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("gateway.endpoint_url has no scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  e.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) e.prefix = url.substr(path_start);
  while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
  // Accept both http://host and http://host/v1 as the configured endpoint.
  if (e.prefix.ends_with("/v1")) e.prefix.resize(e.prefix.size() - 3);
  return e;
}

class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(const BackendConfig& config)
      : config_(config), endpoint_(split_url(config.endpoint_url)), id_(backend_id(config)) {
    const char* key = std::getenv(config.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("environment variable " + config.api_key_env + " (gateway.api_key_env) is not set");
    }
    api_key_ = key;
  }

  std::string id() const override { return id_; }

  std::string chat(const ChatRequest& request) override {
    json body{{"model", config_.chat_model},
              {"temperature", request.temperature},
              {"max_tokens", request.max_tokens},
              {"messages", json::array()}};
    if (!request.system_prompt.empty()) {
      body["messages"].push_back({{"role", "system"}, {"content", request.system_prompt}});
    }
    body["messages"].push_back({{"role", "user"}, {"content", request.user_content}});
    const json reply = post("/v1/chat/completions", body);
    try {
      return reply.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
      throw GatewayError(std::string("malformed chat completion response: ") + e.what(), false);
    }
  }

  // Each whitespace token is sent as its own input so the endpoint returns one
  // vector per token.
  numeric::Matrix embed_tokens(std::span<const std::string> tokens) override {
    const json body{{"model", config_.embedding_model}, {"input", std::vector<std::string>(tokens.begin(), tokens.end())}};
    const json reply = post("/v1/embeddings", body);
    try {
      const json& data = reply.at("data");
      if (data.size() != tokens.size()) {
        throw GatewayError("embedding row count mismatch: expected " + std::to_string(tokens.size()) + ", got " +
                               std::to_string(data.size()),
                           false);
      }
      std::vector<json> rows(data.size());
      for (std::size_t i = 0; i < data.size(); ++i) {
        const std::size_t idx = data[i].value("index", i);
        if (idx >= rows.size()) throw GatewayError("embedding index out of range", false);
        rows[idx] = data[i].at("embedding");
      }
      const std::size_t d = rows.front().size();
      std::vector<double> values;
      values.reserve(rows.size() * d);
      for (const auto& r : rows) {
        if (r.size() != d) {
          throw GatewayError("embedding dimension mismatch: expected d=" + std::to_string(d) + ", got d=" +
                                 std::to_string(r.size()),
                             false);
        }
        for (const auto& v : r) values.push_back(v.get<double>());
      }
      return numeric::Matrix(rows.size(), d, std::move(values));
    } catch (const json::exception& e) {
      throw GatewayError(std::string("malformed embeddings response: ") + e.what(), false);
    }
  }

 private:
  json post(const std::string& path, const json& body) {
    std::string last_error;
    for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
      if (attempt > 0) {
        const auto delay = std::chrono::milliseconds(static_cast<long long>(config_.backoff_ms) << (attempt - 1));
        std::this_thread::sleep_for(delay);
      }
      httplib::Client client(endpoint_.origin);
      client.set_connection_timeout(config_.timeout_seconds);
      client.set_read_timeout(config_.timeout_seconds);
      client.set_bearer_token_auth(api_key_);
      auto res = client.Post(endpoint_.prefix + path, body.dump(), "application/json");
      if (!res) {
        last_error = "request to " + endpoint_.origin + endpoint_.prefix + path + " failed: " + httplib::to_string(res.error());
      } else if (res->status == 429 || res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status) + " from " + path;
      } else if (res->status >= 400) {
        throw GatewayError("HTTP " + std::to_string(res->status) + " from " + path + ": " + res->body, false);
      } else {
        try {
          return json::parse(res->body);
        } catch (const json::exception& e) {
          throw GatewayError("response from " + path + " is not JSON: " + e.what(), false);
        }
      }
      spdlog::warn("gateway attempt {}/{} failed: {}", attempt + 1, config_.max_attempts, last_error);
    }
    throw GatewayError(last_error + " (after " + std::to_string(config_.max_attempts) + " attempts)", true);
  }

  BackendConfig config_;
  Endpoint endpoint_;
  std::string id_;
  std::string api_key_;
};

}  // namespace

std::unique_ptr<Backend> make_remote_backend(const BackendConfig& config) {
  return std::make_unique<RemoteBackend>(config);
}

}  // namespace themescreen::gateway
