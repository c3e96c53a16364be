#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "themescreen/gateway.hpp"
#include "themescreen/itas.hpp"
#include "themescreen/model.hpp"
#include "themescreen/ticl.hpp"

namespace themescreen::service {

struct Response {
  int status = 200;
  nlohmann::json body;
  std::optional<int> retry_after_seconds;
};

struct ServiceOptions {
  std::filesystem::path data_dir = "service-data";
  ticl::InContextTemplate extraction_template = ticl::InContextTemplate::builtin();
  itas::FeedbackPrompt feedback_prompt = itas::FeedbackPrompt::builtin();
  int extraction_retries = 2;
  int feedback_retries = 2;
};

struct ReplayReport {
  std::size_t entries = 0;
  std::size_t mismatches = 0;
};

// Session store and pipeline operations behind the REST API. Each session
// lives in its own directory (transcript.json, features.json, analysis.json,
// feedback_log.jsonl); writes to one session are serialized.
class SessionService {
 public:
  SessionService(ServiceOptions options, std::shared_ptr<gateway::Gateway> gateway,
                 std::optional<model::DetectionModel> model);
  ~SessionService();

  Response create_session(const nlohmann::json& body);
  Response list_sessions();
  Response get_session(const std::string& id);
  Response run_pipeline(const std::string& id);
  Response whatif(const std::string& id, const nlohmann::json& body);
  Response figures(const std::string& id);
  Response feedback_log(const std::string& id);
  Response health();

  // Recomputes every logged prediction from the cached pooled vectors and
  // counts exact mismatches.
  ReplayReport replay_feedback_log(const std::string& id);
  // SHA-256 over the stored features and pooled stage outputs.
  std::optional<std::string> features_digest(const std::string& id);

  struct Session;

 private:
  std::shared_ptr<Session> find(const std::string& id);

  ServiceOptions options_;
  std::shared_ptr<gateway::Gateway> gateway_;
  std::optional<model::DetectionModel> model_;
  std::string model_fingerprint_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

// REST front end: POST /sessions, GET /sessions, GET /sessions/{id},
// POST /sessions/{id}/pipeline, POST /sessions/{id}/whatif,
// GET /sessions/{id}/figures, GET /sessions/{id}/feedback-log, GET /healthz.
class HttpServer {
 public:
  HttpServer(SessionService& service, std::string cors_origin = "*");
  ~HttpServer();

  // Binds to port (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace themescreen::service
