#include "themescreen/gateway.hpp"

#include <cctype>
#include <chrono>
#include <ctime>
#include <thread>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "themescreen/digest.hpp"
#include "themescreen/errors.hpp"

namespace themescreen::gateway {

using nlohmann::json;

std::string_view backend_kind_name(BackendKind kind) {
  return kind == BackendKind::kMock ? "mock" : "remote";
}

void BackendConfig::validate() const {
  if (embedding_dim == 0) throw ConfigError("gateway.embedding_dim must be positive");
  if (max_attempts < 1) throw ConfigError("gateway.max_attempts must be at least 1");
  if (parallelism == 0) throw ConfigError("gateway.parallelism must be positive");
  if (kind == BackendKind::kRemote) {
    if (endpoint_url.empty()) throw ConfigError("gateway.endpoint_url is required for the remote backend");
    if (api_key_env.empty()) throw ConfigError("gateway.api_key_env is required for the remote backend");
    const char* key = std::getenv(api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("environment variable " + api_key_env + " (gateway.api_key_env) is not set");
    }
  }
}

std::string cache_key(const ChatRequest& request, std::string_view backend_id) {
  const json canonical{{"backend", backend_id},
                       {"system_prompt", request.system_prompt},
                       {"user_content", request.user_content},
                       {"temperature", request.temperature},
                       {"max_tokens", request.max_tokens}};
  return sha256_hex(canonical.dump());
}

std::string backend_id(const BackendConfig& config) {
  if (config.kind == BackendKind::kMock) return "mock:seed=" + std::to_string(config.mock_seed);
  return "remote:" + config.endpoint_url + "|chat=" + config.chat_model + "|embed=" + config.embedding_model;
}

std::string cache_key(const ChatRequest& request, const BackendConfig& config) {
  return cache_key(request, backend_id(config));
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) tokens.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return tokens;
}

namespace {

std::string rstrip(std::string s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
  return s;
}

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json request_json(const ChatRequest& r) {
  return json{{"system_prompt", r.system_prompt},
              {"user_content", r.user_content},
              {"temperature", r.temperature},
              {"max_tokens", r.max_tokens}};
}

}  // namespace

Gateway::Gateway(BackendConfig config) : config_(std::move(config)) {
  config_.validate();
  backend_ = config_.kind == BackendKind::kMock ? make_mock_backend(config_) : make_remote_backend(config_);
}

Gateway::Gateway(BackendConfig config, std::unique_ptr<Backend> backend)
    : config_(std::move(config)), backend_(std::move(backend)) {}

GatewayStats Gateway::stats() const {
  return {chat_calls_.load(), cache_hits_.load(), embed_calls_.load()};
}

std::optional<std::string> Gateway::read_cache(const std::string& key) {
  {
    std::lock_guard lock(mutex_);
    if (auto it = memory_.find(key); it != memory_.end()) return it->second;
  }
  if (!config_.cache_dir) return std::nullopt;
  std::ifstream in(*config_.cache_dir / (key + ".json"), std::ios::binary);
  if (!in) return std::nullopt;
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    const json j = json::parse(buf.str());
    std::string payload = j.at("response").dump();
    std::lock_guard lock(mutex_);
    memory_.emplace(key, payload);
    return payload;
  } catch (const json::exception&) {
    return std::nullopt;  // unreadable entries are refetched and overwritten
  }
}

void Gateway::write_cache(const std::string& key, const json& request, const json& response) {
  {
    std::lock_guard lock(mutex_);
    memory_[key] = response.dump();
  }
  if (!config_.cache_dir) return;
  std::filesystem::create_directories(*config_.cache_dir);
  const json entry{{"request", request}, {"response", response}, {"created_at", utc_now_iso8601()}};
  const auto final_path = *config_.cache_dir / (key + ".json");
  std::ostringstream tmp_name;
  tmp_name << key << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id());
  const auto tmp_path = *config_.cache_dir / tmp_name.str();
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw GatewayError("cannot write cache entry " + tmp_path.string(), false);
    out << entry.dump(2) << '\n';
  }
  std::filesystem::rename(tmp_path, final_path);
}

ChatResponse Gateway::chat(const ChatRequest& request, CallOptions options) {
  if (request.user_content.empty()) throw ConfigError("chat request user_content must be non-empty");
  const std::string id = backend_->id();
  const std::string key = cache_key(request, id);
  if (!options.bypass_cache) {
    if (auto hit = read_cache(key)) {
      ++cache_hits_;
      const json r = json::parse(*hit);
      return {r.at("text").get<std::string>(), r.at("backend_id").get<std::string>(), true};
    }
  }
  ++chat_calls_;
  std::string text = rstrip(backend_->chat(request));
  json req = request_json(request);
  req["backend"] = id;
  write_cache(key, req, json{{"text", text}, {"backend_id", id}});
  return {std::move(text), id, false};
}

std::vector<EmbeddingMatrix> Gateway::embed(std::span<const std::string> texts) {
  std::vector<EmbeddingMatrix> out;
  out.reserve(texts.size());
  const std::string id = backend_->id();
  for (const auto& text : texts) {
    auto tokens = tokenize(text);
    if (tokens.empty()) throw ConfigError("embed: text must contain at least one token");

    const json req{{"backend", id}, {"kind", "embedding"}, {"dim", config_.embedding_dim}, {"tokens", tokens}};
    const std::string key = sha256_hex(req.dump());
    if (auto hit = read_cache(key)) {
      ++cache_hits_;
      const json r = json::parse(*hit);
      out.push_back({std::move(tokens), numeric::Matrix(r.at("rows").get<std::size_t>(), r.at("cols").get<std::size_t>(),
                                                        decode_f64_le(r.at("data").get<std::string>()))});
      continue;
    }

    ++embed_calls_;
    numeric::Matrix m = backend_->embed_tokens(tokens);
    if (m.cols() != config_.embedding_dim) {
      throw GatewayError("embedding dimension mismatch: expected d=" + std::to_string(config_.embedding_dim) +
                             ", got d=" + std::to_string(m.cols()),
                         false);
    }
    if (m.rows() != tokens.size()) {
      throw GatewayError("embedding row count mismatch: expected " + std::to_string(tokens.size()) + ", got " +
                             std::to_string(m.rows()),
                         false);
    }
    if (!m.all_finite()) throw GatewayError("embedding contains non-finite values", false);
    write_cache(key, req, json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", encode_f64_le(m.values())}});
    out.push_back({std::move(tokens), std::move(m)});
  }
  return out;
}

}  // namespace themescreen::gateway
