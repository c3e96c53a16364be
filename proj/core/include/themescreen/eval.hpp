#pragma once

#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace themescreen::eval {

struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// (predicted label, true label) pairs.
using LabelPair = std::pair<int, int>;

ConfusionMatrix confusion(std::span<const LabelPair> preds);

// Positive class = depressed. Metrics with a zero denominator are 0.
struct MetricsReport {
  double accuracy = 0;
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  double wa_precision = 0;
  double wa_recall = 0;
  double wa_f1 = 0;
  double g_mean = 0;
  double f1_dep = 0;
  double f1_nondep = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  double macro_f1 = 0;
  ConfusionMatrix cm;

  bool operator==(const MetricsReport&) const = default;
};

// Throws Error on empty input.
MetricsReport compute_metrics(std::span<const LabelPair> preds);
MetricsReport metrics_from_confusion(const ConfusionMatrix& cm);

nlohmann::json to_json(const MetricsReport& m);
std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsReport& m);

struct GMeanRow {
  std::string method;
  double precision = 0;
  double recall = 0;
  double g_mean = 0;
};

// Reported precision/recall/G-mean for the published comparison methods.
std::vector<GMeanRow> reference_gmean_rows();
std::vector<GMeanRow> parse_gmean_csv(std::string_view csv);

// max |√(p·r) − g| over the rows.
double validate_gmean_convention(std::span<const GMeanRow> rows);

}  // namespace themescreen::eval
