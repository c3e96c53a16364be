#include "test_support.hpp"

#include "themescreen/itas.hpp"
#include "themescreen/ticl.hpp"

namespace themescreen::testkit {

std::vector<features::SessionFeatures> synthetic_features(const corpus::SyntheticSpec& spec, std::size_t d) {
  auto corpus = corpus::split_corpus(corpus::generate_synthetic(spec), {}, 11);
  gateway::Gateway gw(mock_config(d));
  std::vector<features::SessionFeatures> out;
  out.reserve(corpus.size());
  for (const auto& t : corpus) {
    const auto record = features::extract_record(t, ticl::InContextTemplate::builtin(),
                                                 itas::FeedbackPrompt::builtin(), gw, 2, 2);
    out.push_back(features::embed_record(record, gw));
  }
  return out;
}

namespace {

struct ClassStats {
  double precision = 0, recall = 0, f1 = 0;
  std::size_t support = 0;
};

ClassStats class_stats(const std::vector<eval::LabelPair>& pairs, int c) {
  std::size_t hit = 0, predicted = 0, actual = 0;
  for (const auto& [pred, truth] : pairs) {
    if (pred == c) ++predicted;
    if (truth == c) ++actual;
    if (pred == c && truth == c) ++hit;
  }
  ClassStats s;
  s.support = actual;
  if (predicted > 0) s.precision = static_cast<double>(hit) / static_cast<double>(predicted);
  if (actual > 0) s.recall = static_cast<double>(hit) / static_cast<double>(actual);
  if (s.precision + s.recall > 0) s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

}  // namespace

eval::MetricsReport oracle_metrics(const std::vector<eval::LabelPair>& pairs) {
  eval::MetricsReport m;
  for (const auto& [pred, truth] : pairs) {
    if (pred == 1 && truth == 1) ++m.cm.tp;
    if (pred == 1 && truth == 0) ++m.cm.fp;
    if (pred == 0 && truth == 0) ++m.cm.tn;
    if (pred == 0 && truth == 1) ++m.cm.fn;
  }
  const ClassStats pos = class_stats(pairs, 1);
  const ClassStats neg = class_stats(pairs, 0);
  const double n = static_cast<double>(pairs.size());
  std::size_t correct = 0;
  for (const auto& [pred, truth] : pairs) correct += pred == truth;

  m.accuracy = static_cast<double>(correct) / n;
  m.precision = pos.precision;
  m.recall = pos.recall;
  m.f1 = pos.f1;
  m.f1_dep = pos.f1;
  m.f1_nondep = neg.f1;
  const double sp = static_cast<double>(pos.support);
  const double sn = static_cast<double>(neg.support);
  m.wa_precision = (sp * pos.precision + sn * neg.precision) / n;
  m.wa_recall = (sp * pos.recall + sn * neg.recall) / n;
  m.wa_f1 = (sp * pos.f1 + sn * neg.f1) / n;
  m.macro_precision = (pos.precision + neg.precision) / 2.0;
  m.macro_recall = (pos.recall + neg.recall) / 2.0;
  m.macro_f1 = (pos.f1 + neg.f1) / 2.0;
  m.g_mean = std::sqrt(pos.precision * pos.recall);
  return m;
}

}  // namespace themescreen::testkit
