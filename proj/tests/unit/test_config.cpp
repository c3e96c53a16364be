#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "themescreen/config.hpp"
#include "themescreen/errors.hpp"
#include "themescreen/io.hpp"

using namespace themescreen;
using nlohmann::json;

TEST(RunConfigTest, DefaultsProduceValidSettings) {
  const RunConfig c;
  EXPECT_EQ(c.synthetic_spec().num_sessions, 200u);
  EXPECT_EQ(c.backend_config().kind, gateway::BackendKind::kMock);
  EXPECT_NO_THROW(c.backend_config().validate());
  const auto t = c.train_config();
  EXPECT_NO_THROW(t.validate());
  EXPECT_EQ(t.preset, "desk");
  EXPECT_EQ(t.learning_rate, 1e-3);
  EXPECT_EQ(t.model.d, 64u);
  EXPECT_EQ(c.service_settings().port, 8080);
}

TEST(RunConfigTest, SetParsesJsonThenString) {
  RunConfig c;
  c.set("train.epochs=7");
  c.set("train.drop_theme=mental");
  c.set("corpus.split=[0.6,0.2,0.2]");
  EXPECT_EQ(c.at("train.epochs"), 7);
  EXPECT_EQ(c.train_config().epochs, 7u);
  EXPECT_EQ(c.train_config().model.drop_theme, ThemeId::kMental);
  EXPECT_EQ(c.split_fractions().train, 0.6);
  EXPECT_THROW(c.set("train.epochs"), ConfigError);
}

TEST(RunConfigTest, UnknownKeyNamesFullPath) {
  RunConfig c;
  try {
    c.set("train.epoch=3");
    FAIL();
  } catch (const UnknownConfigKey& e) {
    EXPECT_EQ(e.key(), "train.epoch");
  }
  EXPECT_THROW(c.merge(json{{"bogus", {{"x", 1}}}}), UnknownConfigKey);
  EXPECT_THROW(c.merge(json{{"gateway", {{"kindd", "mock"}}}}), UnknownConfigKey);
}

TEST(RunConfigTest, WrongTypeRejected) {
  RunConfig c;
  EXPECT_THROW(c.set("train.disable_tcl", json("yes")), ConfigError);
  EXPECT_THROW(c.set("corpus.num_sessions", json("many")), ConfigError);
}

TEST(RunConfigTest, MergeFile) {
  testkit::TempDir dir("config");
  write_text_file(dir.path() / "c.json", R"({"gateway":{"embedding_dim":16},"train":{"preset":"paper"}})");
  RunConfig c;
  c.merge_file(dir.path() / "c.json");
  EXPECT_EQ(c.backend_config().embedding_dim, 16u);
  EXPECT_EQ(c.train_config().model.d, 16u);
  EXPECT_EQ(c.train_config().epochs, 80u);
}

TEST(RunConfigTest, RemoteWithoutKeyFailsValidation) {
  RunConfig c;
  c.set("gateway.kind=remote");
  c.set("gateway.endpoint_url=http://127.0.0.1:9");
  c.set("gateway.api_key_env=THEMESCREEN_TEST_UNSET_KEY");
  EXPECT_THROW(c.backend_config().validate(), ConfigError);
}
