#include <gtest/gtest.h>

#include <httplib.h>

#include <thread>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "themescreen/corpus.hpp"
#include "themescreen/errors.hpp"
#include "themescreen/service.hpp"
#include "themescreen/train.hpp"

using namespace themescreen;
using namespace themescreen::service;
using nlohmann::json;

namespace {

constexpr std::size_t kDim = 16;

// Trained once on a small marker-dense corpus; good enough to separate
// marker-heavy sessions from controls.
const model::DetectionModel& trained_model() {
  static const model::DetectionModel m = [] {
    corpus::SyntheticSpec spec;
    spec.num_sessions = 60;
    spec.marker_density = 1.0;
    spec.seed = 21;
    std::vector<features::SessionFeatures> tr, dev;
    for (auto& f : testkit::synthetic_features(spec, kDim)) {
      (f.split == corpus::Split::kTrain ? tr : dev).push_back(std::move(f));
    }
    auto cfg = train::TrainConfig::preset_named("desk");
    cfg.epochs = 20;
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 8;
    cfg.model.d = kDim;
    return train::train(tr, dev, cfg).model;
  }();
  return m;
}

corpus::Transcript marker_session() {
  corpus::SyntheticSpec spec;
  spec.num_sessions = 10;
  spec.marker_density = 1.0;
  spec.seed = 99;
  for (auto& t : corpus::generate_synthetic(spec)) {
    if (t.label == 1) {
      t.session_id = "marker-1";
      return t;
    }
  }
  throw std::runtime_error("no label-1 session");
}

json scores_body(double family, double work, double mental, double medical, double overall) {
  return {{"scores", {{"family", family}, {"work", work}, {"mental", mental}, {"medical", medical}, {"overall", overall}}}};
}

class ServiceTest : public ::testing::Test {
 protected:
  explicit ServiceTest(bool with_model = true) : dir_("service") {
    ServiceOptions opts;
    opts.data_dir = dir_.path();
    std::optional<model::DetectionModel> m;
    if (with_model) m = trained_model();
    svc_ = std::make_unique<SessionService>(opts, std::make_shared<gateway::Gateway>(testkit::mock_config(kDim)), m);
  }

  Response create(const corpus::Transcript& t) { return svc_->create_session(corpus::to_json(t)); }

  testkit::TempDir dir_;
  std::unique_ptr<SessionService> svc_;
};

class NoModelServiceTest : public ServiceTest {
 protected:
  NoModelServiceTest() : ServiceTest(false) {}
};

}  // namespace

TEST_F(ServiceTest, CreateGetAndDuplicate) {
  const json body = json::parse(R"({"session_id":"two","turns":[
      {"speaker":"interviewer","text":"How are you?"},{"speaker":"participant","text":"Fine."}]})");
  const auto r = svc_->create_session(body);
  EXPECT_EQ(r.status, 201);
  const auto g = svc_->get_session("two");
  EXPECT_EQ(g.status, 200);
  EXPECT_EQ(g.body["transcript"]["turns"].size(), 2u);
  EXPECT_FALSE(g.body["has_analysis"].get<bool>());
  EXPECT_EQ(svc_->create_session(body).status, 409);
  EXPECT_EQ(svc_->list_sessions().body["sessions"].size(), 1u);
}

TEST_F(ServiceTest, InvalidTranscriptNamesField) {
  const auto r = svc_->create_session(json{{"session_id", "x"}});
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["error"], "invalid_transcript");
  EXPECT_NE(r.body["detail"].get<std::string>().find("turns"), std::string::npos);
  EXPECT_EQ(svc_->create_session(json::array()).status, 400);
}

TEST_F(ServiceTest, UnknownSessionIs404) {
  EXPECT_EQ(svc_->get_session("nope").status, 404);
  EXPECT_EQ(svc_->run_pipeline("nope").status, 404);
  EXPECT_EQ(svc_->whatif("nope", scores_body(5, 5, 5, 5, 5)).status, 404);
  EXPECT_EQ(svc_->figures("nope").status, 404);
}

TEST_F(ServiceTest, PipelineOnMarkerSessionThenCached) {
  ASSERT_EQ(create(marker_session()).status, 201);
  const auto first = svc_->run_pipeline("marker-1");
  ASSERT_EQ(first.status, 200) << first.body.dump();
  EXPECT_EQ(first.body["label"], 1);
  EXPECT_EQ(first.body["themes"].size(), 5u);
  EXPECT_FALSE(first.body["cached"].get<bool>());
  for (const char* key : {"probability", "scores", "alpha", "figures", "weights"}) EXPECT_TRUE(first.body.contains(key));
  const auto second = svc_->run_pipeline("marker-1");
  EXPECT_TRUE(second.body["cached"].get<bool>());
  EXPECT_EQ(second.body["probability"], first.body["probability"]);
  EXPECT_EQ(svc_->feedback_log("marker-1").body["entries"].size(), 1u);
  EXPECT_EQ(svc_->figures("marker-1").status, 200);
}

TEST_F(ServiceTest, WhatIfBeforePipelineIsStale) {
  ASSERT_EQ(create(marker_session()).status, 201);
  const auto r = svc_->whatif("marker-1", scores_body(5, 5, 5, 5, 5));
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(r.body["error"], "stale_session");
}

TEST_F(ServiceTest, WhatIfContracts) {
  ASSERT_EQ(create(marker_session()).status, 201);
  const auto base = svc_->run_pipeline("marker-1");
  ASSERT_EQ(base.status, 200);
  const auto digest = svc_->features_digest("marker-1");
  ASSERT_TRUE(digest.has_value());

  // Equal scores reduce to uniform fusion.
  const auto eq = svc_->whatif("marker-1", scores_body(7, 7, 7, 7, 7));
  ASSERT_EQ(eq.status, 200);
  for (const auto& [k, v] : eq.body["alpha"].items()) EXPECT_EQ(v.get<double>(), 0.2) << k;
  EXPECT_EQ(eq.body["delta"].get<double>(),
            eq.body["probability"].get<double>() - base.body["probability"].get<double>());

  const auto low = svc_->whatif("marker-1", scores_body(5, 5, 2, 5, 5));
  const auto high = svc_->whatif("marker-1", scores_body(5, 5, 10, 5, 5));
  EXPECT_GT(high.body["alpha"]["mental"].get<double>(), low.body["alpha"]["mental"].get<double>());

  const auto again = svc_->whatif("marker-1", scores_body(5, 5, 10, 5, 5));
  EXPECT_EQ(again.body["probability"], high.body["probability"]);
  EXPECT_EQ(again.body["delta"].get<double>(), 0.0);

  const auto log = svc_->feedback_log("marker-1").body["entries"];
  ASSERT_EQ(log.size(), 5u);
  EXPECT_EQ(log[0]["actor"], "llm");
  EXPECT_EQ(log[4]["actor"], "clinician");
  for (std::size_t i = 1; i < log.size(); ++i)
    EXPECT_GT(log[i]["timestamp_us"].get<long long>(), log[i - 1]["timestamp_us"].get<long long>());

  EXPECT_EQ(svc_->features_digest("marker-1"), digest);
  const auto replay = svc_->replay_feedback_log("marker-1");
  EXPECT_EQ(replay.entries, 5u);
  EXPECT_EQ(replay.mismatches, 0u);
}

TEST_F(ServiceTest, WhatIfRejectsBadScores) {
  ASSERT_EQ(create(marker_session()).status, 201);
  ASSERT_EQ(svc_->run_pipeline("marker-1").status, 200);
  auto r = svc_->whatif("marker-1", scores_body(5, 5, 11, 5, 5));
  EXPECT_EQ(r.status, 400);
  EXPECT_EQ(r.body["error"], "invalid_scores");
  EXPECT_NE(r.body["detail"].get<std::string>().find("mental"), std::string::npos);
  EXPECT_EQ(svc_->whatif("marker-1", json{{"scores", {{"family", 1}}}}).status, 400);
  EXPECT_EQ(svc_->whatif("marker-1", json::object()).status, 400);
  EXPECT_EQ(svc_->feedback_log("marker-1").body["entries"].size(), 1u);
}

TEST_F(ServiceTest, StateSurvivesRestart) {
  ASSERT_EQ(create(marker_session()).status, 201);
  const auto base = svc_->run_pipeline("marker-1");
  svc_->whatif("marker-1", scores_body(1, 2, 3, 4, 5));
  ServiceOptions opts;
  opts.data_dir = dir_.path();
  SessionService reopened(opts, std::make_shared<gateway::Gateway>(testkit::mock_config(kDim)), trained_model());
  const auto cached = reopened.run_pipeline("marker-1");
  EXPECT_TRUE(cached.body["cached"].get<bool>());
  EXPECT_EQ(cached.body["probability"], base.body["probability"]);
  EXPECT_EQ(reopened.replay_feedback_log("marker-1").mismatches, 0u);
  EXPECT_EQ(reopened.features_digest("marker-1"), svc_->features_digest("marker-1"));
}

TEST_F(NoModelServiceTest, PipelineWithoutCheckpointIs409) {
  ASSERT_EQ(create(marker_session()).status, 201);
  const auto r = svc_->run_pipeline("marker-1");
  EXPECT_EQ(r.status, 409);
  EXPECT_EQ(r.body["error"], "no_checkpoint");
}

TEST(ServiceGateway, OutageIs503WithRetryAfter) {
  class DownBackend : public gateway::Backend {
   public:
    std::string id() const override { return "down"; }
    std::string chat(const gateway::ChatRequest&) override { throw GatewayError("connection refused", true); }
    numeric::Matrix embed_tokens(std::span<const std::string>) override {
      throw GatewayError("connection refused", true);
    }
  };
  testkit::TempDir dir("outage");
  ServiceOptions opts;
  opts.data_dir = dir.path();
  SessionService svc(opts,
                     std::make_shared<gateway::Gateway>(testkit::mock_config(kDim), std::make_unique<DownBackend>()),
                     trained_model());
  ASSERT_EQ(svc.create_session(corpus::to_json(marker_session())).status, 201);
  const auto r = svc.run_pipeline("marker-1");
  EXPECT_EQ(r.status, 503);
  EXPECT_EQ(r.body["error"], "gateway_unavailable");
  EXPECT_EQ(r.retry_after_seconds, 30);
}

TEST_F(ServiceTest, HttpRoundTrip) {
  HttpServer server(*svc_);
  const int port = server.bind("127.0.0.1", 0);
  ASSERT_GT(port, 0);
  std::thread t([&] { server.listen(); });
  httplib::Client cli("127.0.0.1", port);

  auto res = cli.Get("/healthz");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->get_header_value("Access-Control-Allow-Origin"), "*");

  res = cli.Post("/sessions", corpus::to_json(marker_session()).dump(), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 201);
  res = cli.Post("/sessions", "{not json", "application/json");
  EXPECT_EQ(res->status, 400);
  res = cli.Post("/sessions/marker-1/pipeline", "", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["label"], 1);
  res = cli.Post("/sessions/marker-1/whatif", scores_body(5, 5, 5, 5, 5).dump(), "application/json");
  EXPECT_EQ(res->status, 200);
  res = cli.Post("/sessions/marker-1/whatif", scores_body(-1, 5, 5, 5, 5).dump(), "application/json");
  EXPECT_EQ(res->status, 400);
  res = cli.Get("/sessions/marker-1/feedback-log");
  EXPECT_EQ(json::parse(res->body)["entries"].size(), 2u);
  res = cli.Get("/sessions/missing/figures");
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(json::parse(res->body)["error"], "not_found");
  res = cli.Get("/no/such/route");
  EXPECT_EQ(res->status, 404);
  res = cli.Options("/sessions");
  EXPECT_EQ(res->status, 204);

  server.stop();
  t.join();
}
