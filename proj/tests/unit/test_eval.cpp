#include <gtest/gtest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "test_support.hpp"
#include "themescreen/ablation.hpp"
#include "themescreen/errors.hpp"
#include "themescreen/eval.hpp"

using namespace themescreen;
using namespace themescreen::eval;

namespace {

std::vector<LabelPair> pairs_from(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  std::vector<LabelPair> out;
  out.insert(out.end(), tp, {1, 1});
  out.insert(out.end(), fp, {1, 0});
  out.insert(out.end(), fn, {0, 1});
  out.insert(out.end(), tn, {0, 0});
  return out;
}

const GMeanRow& row_named(const std::vector<GMeanRow>& rows, const std::string& name) {
  for (const auto& r : rows)
    if (r.method == name) return r;
  throw std::runtime_error("no row " + name);
}

}  // namespace

TEST(EvalMetrics, PerfectMixedSet) {
  const auto m = compute_metrics(pairs_from(6, 0, 0, 4));
  for (double v : {m.accuracy, m.precision, m.recall, m.f1, m.wa_precision, m.wa_recall, m.wa_f1, m.g_mean, m.f1_dep,
                   m.f1_nondep, m.macro_f1})
    EXPECT_EQ(v, 1.0);
}

TEST(EvalMetrics, HandExample) {
  const auto pairs = pairs_from(3, 1, 2, 4);
  const auto m = compute_metrics(pairs);
  EXPECT_EQ(m.cm, (ConfusionMatrix{3, 1, 4, 2}));
  EXPECT_DOUBLE_EQ(m.precision, 0.75);
  EXPECT_DOUBLE_EQ(m.recall, 0.6);
  EXPECT_NEAR(m.f1, 2.0 / 3.0, 1e-15);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.7);
  // Non-depressed class: precision 4/6, recall 4/5, F1 8/11; supports 5 and 5.
  EXPECT_NEAR(m.wa_f1, 0.5 * (2.0 / 3.0) + 0.5 * (8.0 / 11.0), 1e-15);
  EXPECT_NEAR(m.g_mean, std::sqrt(0.45), 1e-15);
  EXPECT_EQ(m, testkit::oracle_metrics(pairs));
}

TEST(EvalMetrics, MatchesOracleOnRandomSets) {
  Rng rng(17);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<LabelPair> pairs(1 + rng.below(60));
    for (auto& [p, t] : pairs) {
      p = static_cast<int>(rng.below(2));
      t = static_cast<int>(rng.below(2));
    }
    EXPECT_EQ(compute_metrics(pairs), testkit::oracle_metrics(pairs));
  }
}

TEST(EvalMetrics, ZeroDenominatorsAreZero) {
  const auto m = compute_metrics(pairs_from(0, 0, 0, 5));
  EXPECT_EQ(m.precision, 0.0);
  EXPECT_EQ(m.recall, 0.0);
  EXPECT_EQ(m.f1, 0.0);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.wa_f1, 1.0);
}

TEST(EvalMetrics, Errors) {
  EXPECT_THROW(compute_metrics(std::vector<LabelPair>{}), Error);
  EXPECT_THROW(compute_metrics(std::vector<LabelPair>{{2, 1}}), Error);
}

TEST(EvalMetrics, CsvAndJsonShapes) {
  const auto m = compute_metrics(pairs_from(3, 1, 2, 4));
  const auto header = metrics_csv_header();
  const auto row = metrics_csv_row(m);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
  const auto j = to_json(m);
  EXPECT_EQ(j.at("wa_f1").get<double>(), m.wa_f1);
  EXPECT_EQ(j.at("tp").get<int>(), 3);
}

TEST(EvalGMean, HandExample) {
  EXPECT_NEAR(std::sqrt(0.89 * 0.92), 0.9049, 1e-4);
  const GMeanRow rows[] = {{"x", 0.89, 0.92, 0.905}};
  EXPECT_NEAR(validate_gmean_convention(rows), 0.0001, 5e-5);
}

TEST(EvalGMean, ReferenceRows) {
  const auto rows = reference_gmean_rows();
  EXPECT_EQ(rows.size(), 14u);
  auto dev = [](const GMeanRow& r) { return std::abs(std::sqrt(r.precision * r.recall) - r.g_mean); };
  EXPECT_NEAR(dev(row_named(rows, "TFN")), 0.0046, 2e-4);
  EXPECT_NEAR(dev(row_named(rows, "HiQuE")), 0.0, 1e-4);
  EXPECT_NEAR(dev(row_named(rows, "PDIMC")), 0.0001, 1e-4);
  EXPECT_LE(validate_gmean_convention(rows), 0.006);
}

TEST(EvalGMean, CsvParsing) {
  const auto rows = parse_gmean_csv("method,precision,recall,g_mean\nA,0.5,0.5,0.5\n");
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(validate_gmean_convention(rows), 0.0);
  EXPECT_THROW(parse_gmean_csv("method,precision,recall,g_mean\nA,0.5\n"), ParseError);
}

TEST(EvalAblation, EightVariants) {
  const auto v = ablation::variants(train::TrainConfig::preset_named("desk"));
  ASSERT_EQ(v.size(), 8u);
  EXPECT_EQ(v[0].name, "full");
  std::size_t drops = 0, no_tcl = 0, no_itas = 0;
  for (const auto& x : v) {
    drops += x.config.model.drop_theme.has_value();
    no_tcl += x.config.model.disable_tcl;
    no_itas += x.config.model.disable_itas;
    EXPECT_EQ(x.config.seed, v[0].config.seed);
  }
  EXPECT_EQ(drops, 5u);
  EXPECT_EQ(no_tcl, 1u);
  EXPECT_EQ(no_itas, 1u);
}
