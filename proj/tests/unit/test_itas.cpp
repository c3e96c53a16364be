#include <gtest/gtest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "themescreen/errors.hpp"
#include "themescreen/itas.hpp"
#include "themescreen/numeric/ops.hpp"

using namespace themescreen;
using namespace themescreen::itas;
using themescreen::testkit::random_matrix;

namespace {

class FixedBackend : public gateway::Backend {
 public:
  explicit FixedBackend(std::string reply) : reply_(std::move(reply)) {}
  std::string id() const override { return "fixed"; }
  std::string chat(const gateway::ChatRequest&) override {
    ++calls;
    return reply_;
  }
  numeric::Matrix embed_tokens(std::span<const std::string> tokens) override {
    return numeric::Matrix(tokens.size(), 64, 0.125);
  }
  int calls = 0;

 private:
  std::string reply_;
};

ticl::ThemeSet themes_with(ThemeId id, std::string text) {
  ticl::ThemeSet s;
  s.session_id = "s";
  s.content[index_of(id)].text = std::move(text);
  s.content[index_of(ThemeId::kOverall)].text = "summary";
  return s;
}

}  // namespace

TEST(ItasGuidance, GammaZeroAndOneAreExact) {
  const std::vector<double> u{-1.25, -0.5, -3.0};
  const std::vector<double> c{-0.75, -2.5, -0.125};
  EXPECT_EQ(guidance_combine(u, c, 0.0), u);
  EXPECT_EQ(guidance_combine(u, c, 1.0), c);
}

TEST(ItasGuidance, GammaTwoHandExample) {
  const std::vector<double> u{-1, -2};
  const std::vector<double> c{-2, -1};
  EXPECT_EQ(guidance_combine(u, c, 2.0), (std::vector<double>{-3, 0}));
}

TEST(ItasGuidance, Errors) {
  const std::vector<double> u{-1, -2};
  const std::vector<double> c{-2};
  EXPECT_THROW(guidance_combine(u, c, 1.0), ShapeError);
  EXPECT_THROW(guidance_combine(u, u, -1.0), ConfigError);
}

TEST(ItasWeights, EqualScoresGiveExactlyOneFifth) {
  for (double s : {0.0, 3.7, 5.0, 10.0}) {
    const auto fw = scores_to_weights({s, s, s, s, s}, WeightMode::kNormalized);
    for (double a : fw.alpha) EXPECT_EQ(a, 0.2);
  }
}

TEST(ItasWeights, SoftmaxHandExample) {
  const auto fw = scores_to_weights({10, 0, 0, 0, 0}, WeightMode::kNormalized);
  const double e1 = std::exp(1.0), e2 = std::exp(2.0);
  EXPECT_NEAR(fw.alpha[0], e2 / (e2 + 4 * e1), 1e-15);
  EXPECT_NEAR(fw.alpha[0], 0.4046, 1e-4);
  for (std::size_t i = 1; i < 5; ++i) EXPECT_NEAR(fw.alpha[i], 0.1489, 1e-4);
  EXPECT_EQ(fw.w[0], 1.0);
  EXPECT_EQ(fw.w[1], 0.0);
}

TEST(ItasWeights, LiteralMode) {
  const auto fw = scores_to_weights({10, 0, 0, 0, 0}, WeightMode::kLiteral);
  EXPECT_EQ(fw.alpha, (ThemeArray<double>{2, 1, 1, 1, 1}));
}

TEST(ItasWeights, OutOfRangeRejected) {
  EXPECT_THROW(scores_to_weights({11, 0, 0, 0, 0}, WeightMode::kNormalized), ConfigError);
  EXPECT_THROW(scores_to_weights({0, -0.1, 0, 0, 0}, WeightMode::kNormalized), ConfigError);
  EXPECT_THROW(check_scores({0, 0, NAN, 0, 0}), ConfigError);
}

TEST(ItasWeights, MonotoneInEachScore) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    ThemeArray<double> s;
    for (double& v : s) v = rng.uniform(0, 9);
    const std::size_t k = rng.below(5);
    auto raised = s;
    raised[k] += rng.uniform(0.01, 10 - s[k]);
    const auto a = scores_to_weights(s, WeightMode::kNormalized).alpha;
    const auto b = scores_to_weights(raised, WeightMode::kNormalized).alpha;
    for (std::size_t i = 0; i < 5; ++i) {
      if (i == k) {
        EXPECT_GT(b[i], a[i]);
      } else {
        EXPECT_LT(b[i], a[i]);
      }
    }
  }
}

TEST(ItasWeights, DropThemeRenormalizesOverFour) {
  const auto fw = scores_to_weights({4, 4, 4, 4, 4}, WeightMode::kNormalized, ThemeId::kMental);
  EXPECT_EQ(fw.alpha[index_of(ThemeId::kMental)], 0.0);
  for (ThemeId id : {ThemeId::kFamily, ThemeId::kWork, ThemeId::kMedical, ThemeId::kOverall})
    EXPECT_EQ(fw.alpha[index_of(id)], 0.25);
  const auto u = uniform_weights(ThemeId::kWork);
  EXPECT_EQ(u.alpha[index_of(ThemeId::kWork)], 0.0);
  EXPECT_EQ(u.alpha[0], 0.25);
  EXPECT_EQ(uniform_weights().alpha, scores_to_weights({5, 5, 5, 5, 5}, WeightMode::kNormalized).alpha);
}

TEST(ItasFuse, ConvexIdentity) {
  Rng rng(4);
  const auto v = random_matrix(1, 8, rng);
  const std::vector<Matrix> pooled(5, v);
  const std::vector<double> alpha(5, 0.2);
  EXPECT_LT(numeric::max_abs_diff(fuse_pooled(pooled, alpha), v), 1e-15);
}

TEST(ItasFuse, OneHotSelects) {
  Rng rng(5);
  std::vector<Matrix> pooled;
  for (int i = 0; i < 5; ++i) pooled.push_back(random_matrix(1, 6, rng));
  const std::vector<double> alpha{0, 0, 1, 0, 0};
  EXPECT_EQ(fuse_pooled(pooled, alpha), pooled[2]);
}

TEST(ItasFuse, MatchesLoopOracleAndPools) {
  Rng rng(6);
  std::vector<Matrix> per_theme;
  for (int i = 0; i < 5; ++i) per_theme.push_back(random_matrix(1 + rng.below(4), 5, rng));
  const std::vector<double> alpha{0.1, 0.3, 0.2, 0.15, 0.25};
  const auto r = fuse(per_theme, alpha);
  Matrix expect(1, 5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t c = 0; c < 5; ++c) {
      double mean = 0;
      for (std::size_t t = 0; t < per_theme[i].rows(); ++t) mean += per_theme[i](t, c);
      expect(0, c) += alpha[i] * (mean / static_cast<double>(per_theme[i].rows()));
    }
  }
  EXPECT_LT(numeric::max_abs_diff(r.x_final, expect), 1e-14);
  EXPECT_EQ(r.pooled.size(), 5u);
  EXPECT_EQ(r.contributions[1], numeric::scaled(r.pooled[1], 0.3));
}

TEST(ItasFuse, ShapeErrors) {
  const std::vector<Matrix> pooled{Matrix(1, 3), Matrix(1, 4)};
  const std::vector<double> two{0.5, 0.5};
  const std::vector<double> one{1.0};
  EXPECT_THROW(fuse_pooled(pooled, two), ShapeError);
  EXPECT_THROW(fuse_pooled(pooled, one), ShapeError);
}

TEST(ItasFeedback, ParseClampsAndFillsMissing) {
  const auto f = parse_feedback_response(
      R"(Scores: {"scores":{"family":12,"work":3,"mental":-1,"overall":4.5},"rationales":{"work":"busy"}})");
  EXPECT_EQ(f.items[0].score, 10.0);
  EXPECT_EQ(f.items[1].score, 3.0);
  EXPECT_EQ(f.items[1].rationale, "busy");
  EXPECT_EQ(f.items[2].score, 0.0);
  EXPECT_EQ(f.items[3].score, kNeutralScore);
  EXPECT_EQ(f.items[4].score, 4.5);
  EXPECT_THROW(parse_feedback_response("nothing"), ParseError);
  EXPECT_THROW(parse_feedback_response(R"({"scores":{}})"), ParseError);
}

TEST(ItasFeedback, MockScoresMarkerHeavyMentalHighest) {
  gateway::Gateway gw(testkit::mock_config());
  const auto f = request_feedback(
      themes_with(ThemeId::kMental, "I feel hopeless. I feel worthless. I have no energy. I feel down."),
      FeedbackPrompt::builtin(), gw);
  EXPECT_FALSE(f.fallback);
  const auto s = f.scores();
  for (std::size_t i = 0; i < 5; ++i) {
    if (i != index_of(ThemeId::kMental)) {
      EXPECT_LT(s[i], s[index_of(ThemeId::kMental)]);
    }
  }
}

TEST(ItasFeedback, AllEmptyIsUniform) {
  gateway::Gateway gw(testkit::mock_config());
  ticl::ThemeSet empty;
  const auto f = request_feedback(empty, FeedbackPrompt::builtin(), gw);
  for (double s : f.scores()) EXPECT_EQ(s, kNeutralScore);
  EXPECT_EQ(gw.stats().backend_chat_calls, 0u);
}

TEST(ItasFeedback, ClampFromBackendReply) {
  gateway::Gateway gw(testkit::mock_config(), std::make_unique<FixedBackend>(
                                                  R"({"family":12,"work":1,"mental":2,"medical":3,"overall":4})"));
  const auto f = request_feedback(themes_with(ThemeId::kFamily, "x"), FeedbackPrompt::builtin(), gw);
  EXPECT_EQ(f.items[0].score, 10.0);
  EXPECT_FALSE(f.fallback);
}

TEST(ItasFeedback, UnparseableReplyFallsBackToNeutral) {
  auto backend = std::make_unique<FixedBackend>("no idea");
  auto* raw = backend.get();
  gateway::Gateway gw(testkit::mock_config(), std::move(backend));
  const auto f = request_feedback(themes_with(ThemeId::kWork, "x"), FeedbackPrompt::builtin(), gw, 2);
  EXPECT_TRUE(f.fallback);
  EXPECT_FALSE(f.gateway_failed);
  EXPECT_EQ(f.attempts, 3);
  EXPECT_EQ(raw->calls, 3);
  for (double s : f.scores()) EXPECT_EQ(s, kNeutralScore);
}

TEST(ItasFeedback, JsonRoundTrip) {
  auto f = Feedback::from_scores({1, 2, 3, 4, 5}, FeedbackSource::kClinician);
  f.items[2].rationale = "why";
  const auto back = feedback_from_json(to_json(f));
  EXPECT_EQ(back.items, f.items);
  EXPECT_EQ(source_name(FeedbackSource::kClinician), "clinician");
  EXPECT_EQ(parse_mode("literal"), WeightMode::kLiteral);
  EXPECT_FALSE(parse_source("robot").has_value());
}
