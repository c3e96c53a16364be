#include "themescreen/service.hpp"

#include <chrono>
#include <ctime>
#include <fstream>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "themescreen/corpus.hpp"
#include "themescreen/digest.hpp"
#include "themescreen/errors.hpp"
#include "themescreen/features.hpp"
#include "themescreen/io.hpp"
#include "themescreen/pipeline.hpp"

namespace themescreen::service {

using nlohmann::json;
using numeric::Matrix;

struct SessionService::Session {
  std::string id;
  std::filesystem::path dir;
  std::mutex mutex;
  corpus::Transcript transcript;
  std::string created_at;

  std::optional<features::SessionFeatures> features;
  std::vector<Matrix> pooled;
  json payload;  // pipeline response, figures included
  std::string model_fingerprint;
  std::optional<double> last_probability;
  long long last_timestamp_us = 0;
};

namespace {

Response error(int status, std::string code, std::string detail) {
  return {status, json{{"error", std::move(code)}, {"detail", std::move(detail)}}, std::nullopt};
}

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 128 || id.front() == '.') return false;
  for (char c : id) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.')) return false;
  }
  return true;
}

std::string iso8601_us(long long us) {
  const std::time_t secs = static_cast<std::time_t>(us / 1000000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[40];
  const auto n = std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
  std::snprintf(buf + n, sizeof buf - n, ".%06lldZ", us % 1000000);
  return buf;
}

long long now_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

json matrix_blob(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", encode_f64_le(m.values())}};
}

Matrix matrix_from_blob(const json& j) {
  return Matrix(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>(),
                decode_f64_le(j.at("data").get<std::string>()));
}

json theme_scores_json(const ThemeArray<double>& s) {
  json j = json::object();
  for (ThemeId id : kAllThemes) j[std::string(theme_name(id))] = s[index_of(id)];
  return j;
}

std::string model_fingerprint(const std::optional<model::DetectionModel>& m) {
  if (!m) return {};
  return sha256_hex(numeric::checkpoint_to_json(m->to_checkpoint()).dump());
}

}  // namespace

SessionService::SessionService(ServiceOptions options, std::shared_ptr<gateway::Gateway> gateway,
                               std::optional<model::DetectionModel> model)
    : options_(std::move(options)),
      gateway_(std::move(gateway)),
      model_(std::move(model)),
      model_fingerprint_(model_fingerprint(model_)) {
  std::filesystem::create_directories(options_.data_dir / "sessions");
}

SessionService::~SessionService() = default;

std::shared_ptr<SessionService::Session> SessionService::find(const std::string& id) {
  if (!valid_session_id(id)) return nullptr;
  std::lock_guard lock(sessions_mutex_);
  if (auto it = sessions_.find(id); it != sessions_.end()) return it->second;

  const auto dir = options_.data_dir / "sessions" / id;
  if (!std::filesystem::exists(dir / "transcript.json")) return nullptr;
  auto s = std::make_shared<Session>();
  s->id = id;
  s->dir = dir;
  const json stored = json::parse(read_text_file(dir / "transcript.json"));
  s->transcript = corpus::transcript_from_json(stored.at("transcript"));
  s->created_at = stored.value("created_at", std::string());
  if (std::filesystem::exists(dir / "analysis.json")) {
    const json a = json::parse(read_text_file(dir / "analysis.json"));
    s->features = features::session_features_from_json(json::parse(read_text_file(dir / "features.json")));
    for (const auto& p : a.at("pooled")) s->pooled.push_back(matrix_from_blob(p));
    s->payload = a.at("payload");
    s->model_fingerprint = a.value("model", std::string());
    s->last_probability = s->payload.at("probability").get<double>();
  }
  if (std::ifstream log(dir / "feedback_log.jsonl"); log) {
    std::string line;
    while (std::getline(log, line)) {
      if (line.empty()) continue;
      const json e = json::parse(line);
      s->last_probability = e.at("probability").get<double>();
      s->last_timestamp_us = e.value("timestamp_us", 0LL);
    }
  }
  sessions_.emplace(id, s);
  return s;
}

Response SessionService::health() {
  return {200,
          {{"status", "ok"},
           {"backend", gateway_ ? gateway_->backend_id() : std::string()},
           {"checkpoint_loaded", model_.has_value()}},
          std::nullopt};
}

Response SessionService::create_session(const json& body) {
  if (!body.is_object()) return error(400, "invalid_transcript", "body must be a JSON object");
  json doc = body;
  if (!doc.contains("session_id")) doc["session_id"] = "s-" + sha256_hex(body.dump()).substr(0, 12);
  corpus::Transcript t;
  try {
    t = corpus::transcript_from_json(doc);
    corpus::validate(t);
  } catch (const CorpusError& e) {
    return error(400, "invalid_transcript", e.what());
  }
  if (!valid_session_id(t.session_id)) {
    return error(400, "invalid_transcript",
                 "field session_id: use letters, digits, '-', '_' or '.', at most 128 characters");
  }
  if (find(t.session_id)) return error(409, "duplicate_session", "session " + t.session_id + " already exists");

  auto s = std::make_shared<Session>();
  s->id = t.session_id;
  s->dir = options_.data_dir / "sessions" / t.session_id;
  s->transcript = t;
  s->created_at = iso8601_us(now_us());
  {
    std::lock_guard lock(sessions_mutex_);
    if (!sessions_.emplace(s->id, s).second) {
      return error(409, "duplicate_session", "session " + t.session_id + " already exists");
    }
  }
  write_text_file(s->dir / "transcript.json",
                  json{{"transcript", corpus::to_json(t)}, {"created_at", s->created_at}}.dump(2));
  return {201, {{"session_id", s->id}, {"created_at", s->created_at}}, std::nullopt};
}

Response SessionService::list_sessions() {
  json out = json::array();
  std::error_code ec;
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(options_.data_dir / "sessions", ec)) {
    if (entry.is_directory()) ids.push_back(entry.path().filename().string());
  }
  std::sort(ids.begin(), ids.end());
  for (const auto& id : ids) {
    auto s = find(id);
    if (!s) continue;
    std::lock_guard lock(s->mutex);
    out.push_back({{"session_id", s->id}, {"created_at", s->created_at}, {"has_analysis", s->features.has_value()}});
  }
  return {200, {{"sessions", out}}, std::nullopt};
}

Response SessionService::get_session(const std::string& id) {
  auto s = find(id);
  if (!s) return error(404, "not_found", "no session " + id);
  std::lock_guard lock(s->mutex);
  json j{{"session_id", s->id},
         {"created_at", s->created_at},
         {"transcript", corpus::to_json(s->transcript)},
         {"has_analysis", s->features.has_value()}};
  if (s->features) {
    j["themes"] = s->payload.at("themes");
    j["scores"] = s->payload.at("scores");
    j["last_probability"] = *s->last_probability;
  }
  return {200, j, std::nullopt};
}

Response SessionService::run_pipeline(const std::string& id) {
  auto s = find(id);
  if (!s) return error(404, "not_found", "no session " + id);
  if (!model_) return error(409, "no_checkpoint", "the service was started without a checkpoint");
  std::lock_guard lock(s->mutex);
  const std::string& fingerprint = model_fingerprint_;
  if (s->features && s->model_fingerprint == fingerprint) {
    json cached = s->payload;
    cached["cached"] = true;
    return {200, cached, std::nullopt};
  }

  auto ex = ticl::extract_themes(s->transcript, options_.extraction_template, *gateway_, options_.extraction_retries);
  if (ex.gateway_failed) {
    return {503, {{"error", "gateway_unavailable"}, {"detail", "theme extraction could not reach the LLM backend"}}, 30};
  }
  features::ThemeRecord record;
  record.session_id = s->id;
  record.label = s->transcript.label;
  record.split = s->transcript.split;
  record.themes = std::move(ex.themes);
  record.extraction_attempts = ex.attempts;
  record.extraction_fallback = ex.fallback;
  record.feedback = itas::request_feedback(record.themes, options_.feedback_prompt, *gateway_, options_.feedback_retries);
  if (record.feedback.gateway_failed) {
    return {503, {{"error", "gateway_unavailable"}, {"detail", "feedback scoring could not reach the LLM backend"}}, 30};
  }
  features::SessionFeatures f;
  try {
    f = features::embed_record(record, *gateway_);
  } catch (const GatewayError& e) {
    return {503, {{"error", "gateway_unavailable"}, {"detail", e.what()}}, 30};
  }

  auto analysis = pipeline::analyze(*model_, std::move(f));
  analysis.degraded = analysis.degraded || ex.fallback;
  json payload = pipeline::prediction_json(analysis);

  json pooled = json::array();
  for (const auto& p : analysis.pooled) pooled.push_back(matrix_blob(p));
  write_text_file(s->dir / "features.json", features::to_json(analysis.features).dump());
  write_text_file(s->dir / "analysis.json",
                  json{{"payload", payload}, {"pooled", pooled}, {"model", fingerprint}}.dump());
  // A new analysis starts a new log.
  std::filesystem::remove(s->dir / "feedback_log.jsonl");

  s->features = std::move(analysis.features);
  s->pooled = std::move(analysis.pooled);
  s->payload = payload;
  s->model_fingerprint = fingerprint;
  s->last_probability = analysis.prediction.probability;

  const long long ts = std::max(now_us(), s->last_timestamp_us + 1);
  s->last_timestamp_us = ts;
  const json entry{{"session_id", s->id},
                   {"actor", "llm"},
                   {"scores", payload.at("scores")},
                   {"alpha", payload.at("alpha")},
                   {"probability", analysis.prediction.probability},
                   {"label", analysis.prediction.label},
                   {"timestamp", iso8601_us(ts)},
                   {"timestamp_us", ts}};
  std::ofstream(s->dir / "feedback_log.jsonl", std::ios::app) << entry.dump() << '\n';

  payload["cached"] = false;
  return {200, payload, std::nullopt};
}

Response SessionService::whatif(const std::string& id, const json& body) {
  auto s = find(id);
  if (!s) return error(404, "not_found", "no session " + id);
  if (!model_) return error(409, "no_checkpoint", "the service was started without a checkpoint");
  if (!body.is_object() || !body.contains("scores") || !body["scores"].is_object()) {
    return error(400, "invalid_scores", "body must be {\"scores\": {theme: number}}");
  }
  ThemeArray<double> scores{};
  for (ThemeId t : kAllThemes) {
    const std::string name(theme_name(t));
    const auto it = body["scores"].find(name);
    if (it == body["scores"].end() || !it->is_number()) {
      return error(400, "invalid_scores", "scores." + name + " is missing or not a number");
    }
    const double v = it->get<double>();
    if (!(v >= itas::kMinScore && v <= itas::kMaxScore)) {
      return error(400, "invalid_scores", "scores." + name + " = " + it->dump() + " is outside [0, 10]");
    }
    scores[index_of(t)] = v;
  }

  std::lock_guard lock(s->mutex);
  if (!s->features || s->model_fingerprint != model_fingerprint_) {
    return error(409, "stale_session", "run the pipeline for this session first");
  }
  const auto weights = model_->weights_for(scores);
  const auto prediction = model_->predict_from_pooled(s->pooled, weights);
  const double delta = prediction.probability - s->last_probability.value_or(prediction.probability);
  s->last_probability = prediction.probability;

  const json alpha = theme_scores_json(weights.alpha);
  const long long ts = std::max(now_us(), s->last_timestamp_us + 1);
  s->last_timestamp_us = ts;
  const json entry{{"session_id", s->id},
                   {"actor", "clinician"},
                   {"scores", theme_scores_json(scores)},
                   {"alpha", alpha},
                   {"probability", prediction.probability},
                   {"label", prediction.label},
                   {"timestamp", iso8601_us(ts)},
                   {"timestamp_us", ts}};
  std::ofstream(s->dir / "feedback_log.jsonl", std::ios::app) << entry.dump() << '\n';

  json out{{"session_id", s->id},
           {"probability", prediction.probability},
           {"label", prediction.label},
           {"threshold", prediction.threshold},
           {"delta", delta},
           {"scores", theme_scores_json(scores)},
           {"alpha", alpha},
           {"weights", pipeline::weights_json(weights)},
           {"contribution_norms", theme_scores_json(prediction.contribution_norms)},
           {"timestamp", entry["timestamp"]}};
  return {200, out, std::nullopt};
}

Response SessionService::figures(const std::string& id) {
  auto s = find(id);
  if (!s) return error(404, "not_found", "no session " + id);
  std::lock_guard lock(s->mutex);
  if (!s->features) return error(409, "stale_session", "run the pipeline for this session first");
  return {200, s->payload.at("figures"), std::nullopt};
}

Response SessionService::feedback_log(const std::string& id) {
  auto s = find(id);
  if (!s) return error(404, "not_found", "no session " + id);
  std::lock_guard lock(s->mutex);
  json entries = json::array();
  if (std::ifstream log(s->dir / "feedback_log.jsonl"); log) {
    std::string line;
    while (std::getline(log, line)) {
      if (!line.empty()) entries.push_back(json::parse(line));
    }
  }
  return {200, {{"session_id", s->id}, {"entries", entries}}, std::nullopt};
}

ReplayReport SessionService::replay_feedback_log(const std::string& id) {
  auto s = find(id);
  if (!s) throw Error("no session " + id);
  if (!model_) throw Error("replay needs a checkpoint");
  std::lock_guard lock(s->mutex);
  if (!s->features) throw Error("session " + id + " has no analysis");
  ReplayReport report;
  std::ifstream log(s->dir / "feedback_log.jsonl");
  std::string line;
  while (std::getline(log, line)) {
    if (line.empty()) continue;
    const json e = json::parse(line);
    ThemeArray<double> scores{};
    for (ThemeId t : kAllThemes) scores[index_of(t)] = e.at("scores").at(std::string(theme_name(t))).get<double>();
    const auto p = pipeline::reweight(*model_, s->pooled, scores);
    ++report.entries;
    if (p.probability != e.at("probability").get<double>()) ++report.mismatches;
  }
  return report;
}

std::optional<std::string> SessionService::features_digest(const std::string& id) {
  auto s = find(id);
  if (!s) return std::nullopt;
  std::lock_guard lock(s->mutex);
  if (!s->features) return std::nullopt;
  std::string bytes = features::to_json(*s->features).dump();
  for (const auto& p : s->pooled) bytes += encode_f64_le(p.values());
  return sha256_hex(bytes);
}

struct HttpServer::Impl {
  httplib::Server server;
  SessionService& service;

  explicit Impl(SessionService& s) : service(s) {}
};

namespace {

void send(httplib::Response& res, const Response& r) {
  res.status = r.status;
  if (r.retry_after_seconds) res.set_header("Retry-After", std::to_string(*r.retry_after_seconds));
  res.set_content(r.body.dump(), "application/json");
}

std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded()) {
    send(res, error(400, "invalid_json", "request body is not valid JSON"));
    return std::nullopt;
  }
  return j;
}

}  // namespace

HttpServer::HttpServer(SessionService& service, std::string cors_origin) : impl_(std::make_unique<Impl>(service)) {
  auto& srv = impl_->server;
  auto& svc = impl_->service;
  srv.set_default_headers({{"Access-Control-Allow-Origin", cors_origin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  srv.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.Get("/healthz", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.health()); });
  srv.Get("/sessions", [&svc](const httplib::Request&, httplib::Response& res) { send(res, svc.list_sessions()); });
  srv.Post("/sessions", [&svc](const httplib::Request& req, httplib::Response& res) {
    if (auto body = parse_body(req, res)) send(res, svc.create_session(*body));
  });
  srv.Get(R"(/sessions/([^/]+))", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.get_session(req.matches[1]));
  });
  srv.Post(R"(/sessions/([^/]+)/pipeline)", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.run_pipeline(req.matches[1]));
  });
  srv.Post(R"(/sessions/([^/]+)/whatif)", [&svc](const httplib::Request& req, httplib::Response& res) {
    if (auto body = parse_body(req, res)) send(res, svc.whatif(req.matches[1], *body));
  });
  srv.Get(R"(/sessions/([^/]+)/figures)", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.figures(req.matches[1]));
  });
  srv.Get(R"(/sessions/([^/]+)/feedback-log)", [&svc](const httplib::Request& req, httplib::Response& res) {
    send(res, svc.feedback_log(req.matches[1]));
  });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string detail = "unknown error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      detail = e.what();
    } catch (...) {
    }
    spdlog::error("request failed: {}", detail);
    send(res, error(500, "internal_error", detail));
  });
  srv.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.body.empty()) send(res, error(res.status, res.status == 404 ? "not_found" : "error", req.method + " " + req.path));
  });
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) return impl_->server.bind_to_any_port(host);
  if (!impl_->server.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

}  // namespace themescreen::service
