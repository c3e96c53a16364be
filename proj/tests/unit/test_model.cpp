#include <gtest/gtest.h>

#include <cmath>

#include "test_support.hpp"
#include "themescreen/errors.hpp"
#include "themescreen/model.hpp"
#include "themescreen/numeric/gradcheck.hpp"

using namespace themescreen;
using namespace themescreen::model;
using themescreen::testkit::random_matrix;

namespace {

ThemeArray<Matrix> random_embeddings(Rng& rng, std::size_t d, std::size_t max_len = 4) {
  ThemeArray<Matrix> e;
  for (auto& m : e) m = random_matrix(1 + rng.below(max_len), d, rng);
  return e;
}

ModelConfig small_config() {
  ModelConfig c;
  c.d = 8;
  return c;
}

}  // namespace

TEST(ModelHead, ZeroWeightsGiveOneHalf) {
  const std::vector<std::size_t> hidden{4};
  const auto head = DetectionHead::zeros(8, hidden);
  Rng rng(1);
  const auto tr = head.forward(random_matrix(1, 8, rng));
  EXPECT_EQ(tr.logit, 0.0);
  EXPECT_EQ(tr.probability, 0.5);
}

TEST(ModelHead, ShapeMismatchThrows) {
  Rng rng(2);
  const std::vector<std::size_t> hidden{4};
  const DetectionHead head(8, hidden, rng);
  EXPECT_THROW(head.forward(Matrix(1, 7)), ShapeError);
}

TEST(ModelHead, InitWithinFanInBound) {
  Rng rng(3);
  const std::vector<std::size_t> hidden{16, 4};
  const DetectionHead head(32, hidden, rng);
  ASSERT_EQ(head.layers().size(), 3u);
  for (const auto& layer : head.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.w.value.rows()));
    for (double v : layer.w.value.values()) EXPECT_LE(std::abs(v), bound);
    for (double v : layer.b.value.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(ModelLoss, BceValues) {
  EXPECT_NEAR(bce_loss(0.5, 1), std::log(2.0), 1e-15);
  EXPECT_NEAR(bce_loss(0.5, 0), std::log(2.0), 1e-15);
  EXPECT_LT(bce_loss(1.0 - 1e-9, 1), 1e-8);
  EXPECT_LT(bce_loss(1e-9, 0), 1e-8);
  EXPECT_TRUE(std::isfinite(bce_loss(0.0, 1)));
  EXPECT_EQ(sigmoid(0.0), 0.5);
}

TEST(ModelLoss, LogitGradientMatchesFiniteDifference) {
  for (double z : {-3.0, -0.2, 0.0, 1.7}) {
    for (int y : {0, 1}) {
      const double h = 1e-6;
      const double fd = (bce_loss(sigmoid(z + h), y) - bce_loss(sigmoid(z - h), y)) / (2 * h);
      EXPECT_NEAR(bce_grad_logit(sigmoid(z), y), fd, 1e-8);
    }
  }
}

TEST(ModelForward, DeterministicAndSeedSensitive) {
  Rng rng(4);
  const auto e = random_embeddings(rng, 8);
  const ThemeArray<double> s{1, 2, 3, 4, 5};
  const DetectionModel a(small_config(), 7), b(small_config(), 7), c(small_config(), 8);
  EXPECT_EQ(a.forward(e, s).prediction.probability, b.forward(e, s).prediction.probability);
  EXPECT_NE(a.forward(e, s).prediction.probability, c.forward(e, s).prediction.probability);
}

TEST(ModelForward, PredictFromPooledIsBitwiseForward) {
  Rng rng(5);
  const DetectionModel m(small_config(), 3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto e = random_embeddings(rng, 8);
    ThemeArray<double> s;
    for (double& v : s) v = rng.uniform(0, 10);
    const auto tr = m.forward(e, s);
    const auto p = m.predict_from_pooled(tr.pooled, m.weights_for(s));
    EXPECT_EQ(p.probability, tr.prediction.probability);
    EXPECT_EQ(p.logit, tr.prediction.logit);
    EXPECT_EQ(p.contribution_norms, tr.prediction.contribution_norms);
  }
}

TEST(ModelForward, EqualScoresMatchDisabledItas) {
  Rng rng(6);
  auto off = small_config();
  off.disable_itas = true;
  const DetectionModel full(small_config(), 9);
  const auto ablated = DetectionModel::from_checkpoint([&] {
    auto ck = full.to_checkpoint();
    ck.config = off.to_json();
    return ck;
  }());
  for (int trial = 0; trial < 10; ++trial) {
    const auto e = random_embeddings(rng, 8);
    const double v = rng.uniform(0, 10);
    const ThemeArray<double> s{v, v, v, v, v};
    EXPECT_EQ(full.forward(e, s).prediction.probability, ablated.forward(e, s).prediction.probability);
  }
}

TEST(ModelForward, DropThemeExcludesIt) {
  auto cfg = small_config();
  cfg.drop_theme = ThemeId::kMental;
  const DetectionModel m(cfg, 1);
  const auto active = m.active_themes();
  EXPECT_EQ(active.size(), 4u);
  EXPECT_EQ(std::count(active.begin(), active.end(), ThemeId::kMental), 0);

  Rng rng(7);
  auto e = random_embeddings(rng, 8);
  const ThemeArray<double> s{5, 5, 10, 5, 5};
  const auto before = m.forward(e, s);
  EXPECT_EQ(before.pooled.size(), 4u);
  EXPECT_EQ(before.weights.alpha[index_of(ThemeId::kMental)], 0.0);
  EXPECT_EQ(before.prediction.contribution_norms[index_of(ThemeId::kMental)], 0.0);
  e[index_of(ThemeId::kMental)] = random_matrix(3, 8, rng);
  EXPECT_EQ(m.forward(e, s).prediction.probability, before.prediction.probability);
}

TEST(ModelForward, DisableTclDropsItsParameters) {
  auto cfg = small_config();
  DetectionModel full(cfg, 1);
  cfg.disable_tcl = true;
  DetectionModel bare(cfg, 1);
  // Two 8x8 triples for TCL; head 8 -> 4 -> 1.
  EXPECT_EQ(full.parameter_count(), 6u * 64u + 8u * 4u + 4u + 4u + 1u);
  EXPECT_EQ(bare.parameter_count(), 8u * 4u + 4u + 4u + 1u);
  EXPECT_EQ(bare.head().layers()[0].w.value, full.head().layers()[0].w.value);
}

TEST(ModelBackward, CompositeMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(50 + seed);
    DetectionModel m(small_config(), seed);
    const auto e = random_embeddings(rng, 8);
    const ThemeArray<double> s{2, 9, 4, 6, 1};
    const int y = static_cast<int>(seed % 2);
    auto loss = [&](bool grads) {
      const auto tr = m.forward(e, s);
      if (grads) return m.backward(tr, y);
      return bce_loss(tr.prediction.probability, y);
    };
    EXPECT_LT(numeric::finite_difference_check(loss, m.params()), 1e-4) << "seed " << seed;
  }
}

TEST(ModelCheckpoint, RoundTripPreservesPredictions) {
  auto cfg = small_config();
  cfg.itas_mode = itas::WeightMode::kLiteral;
  cfg.drop_theme = ThemeId::kWork;
  const DetectionModel m(cfg, 11);
  testkit::TempDir dir("model");
  numeric::save_checkpoint(dir.path() / "m.json", m.to_checkpoint());
  const auto back = DetectionModel::from_checkpoint(numeric::load_checkpoint(dir.path() / "m.json"));
  EXPECT_EQ(back.config().to_json(), m.config().to_json());
  EXPECT_EQ(back.seed(), 11u);
  Rng rng(12);
  const auto e = random_embeddings(rng, 8);
  const ThemeArray<double> s{3, 1, 4, 1, 5};
  EXPECT_EQ(back.forward(e, s).prediction.probability, m.forward(e, s).prediction.probability);
}

TEST(ModelConfigCheck, Validation) {
  ModelConfig c;
  c.d = 0;
  EXPECT_THROW(DetectionModel(c, 1), ConfigError);
  c = {};
  c.threshold = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = {};
  c.d = 10;
  EXPECT_EQ(c.hidden_sizes(), (std::vector<std::size_t>{5}));
  EXPECT_EQ(ModelConfig::from_json(c.to_json()).to_json(), c.to_json());
}
