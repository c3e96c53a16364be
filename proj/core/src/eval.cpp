#include "themescreen/eval.hpp"

#include <cmath>
#include <sstream>

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "themescreen/embedded_data.hpp"
#include "themescreen/errors.hpp"

namespace themescreen::eval {

namespace {

double ratio(std::size_t num, std::size_t den, const char* what) {
  if (den == 0) {
    spdlog::warn("{} is undefined (zero denominator); reporting 0", what);
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double f1_of(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

}  // namespace

ConfusionMatrix confusion(std::span<const LabelPair> preds) {
  ConfusionMatrix cm;
  for (const auto& [pred, truth] : preds) {
    if ((pred != 0 && pred != 1) || (truth != 0 && truth != 1)) throw Error("labels must be 0 or 1");
    if (pred == 1) {
      truth == 1 ? ++cm.tp : ++cm.fp;
    } else {
      truth == 1 ? ++cm.fn : ++cm.tn;
    }
  }
  return cm;
}

MetricsReport compute_metrics(std::span<const LabelPair> preds) {
  if (preds.empty()) throw Error("compute_metrics: no predictions");
  return metrics_from_confusion(confusion(preds));
}

MetricsReport metrics_from_confusion(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error("compute_metrics: no predictions");
  MetricsReport m;
  m.cm = cm;
  const std::size_t n = cm.total();
  const std::size_t n_pos = cm.tp + cm.fn;
  const std::size_t n_neg = cm.tn + cm.fp;

  m.accuracy = static_cast<double>(cm.tp + cm.tn) / static_cast<double>(n);
  m.precision = ratio(cm.tp, cm.tp + cm.fp, "precision (depressed)");
  m.recall = ratio(cm.tp, n_pos, "recall (depressed)");
  m.f1 = f1_of(m.precision, m.recall);
  m.f1_dep = m.f1;

  const double prec_neg = ratio(cm.tn, cm.tn + cm.fn, "precision (non-depressed)");
  const double rec_neg = ratio(cm.tn, n_neg, "recall (non-depressed)");
  m.f1_nondep = f1_of(prec_neg, rec_neg);

  // Support-weighted means over the two classes.
  const double dn = static_cast<double>(n);
  const double dpos = static_cast<double>(n_pos);
  const double dneg = static_cast<double>(n_neg);
  m.wa_precision = (dpos * m.precision + dneg * prec_neg) / dn;
  m.wa_recall = (dpos * m.recall + dneg * rec_neg) / dn;
  m.wa_f1 = (dpos * m.f1_dep + dneg * m.f1_nondep) / dn;

  m.macro_precision = (m.precision + prec_neg) / 2.0;
  m.macro_recall = (m.recall + rec_neg) / 2.0;
  m.macro_f1 = (m.f1_dep + m.f1_nondep) / 2.0;

  m.g_mean = std::sqrt(m.precision * m.recall);
  return m;
}

nlohmann::json to_json(const MetricsReport& m) {
  return {{"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"wa_precision", m.wa_precision},
          {"wa_recall", m.wa_recall},
          {"wa_f1", m.wa_f1},
          {"g_mean", m.g_mean},
          {"f1_dep", m.f1_dep},
          {"f1_nondep", m.f1_nondep},
          {"macro_precision", m.macro_precision},
          {"macro_recall", m.macro_recall},
          {"macro_f1", m.macro_f1},
          {"tp", m.cm.tp},
          {"fp", m.cm.fp},
          {"tn", m.cm.tn},
          {"fn", m.cm.fn}};
}

std::string metrics_csv_header() {
  return "accuracy,precision,recall,f1,wa_precision,wa_recall,wa_f1,g_mean,f1_dep,f1_nondep,"
         "macro_precision,macro_recall,macro_f1,tp,fp,tn,fn";
}

std::string metrics_csv_row(const MetricsReport& m) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << m.accuracy << ',' << m.precision << ',' << m.recall << ',' << m.f1 << ',' << m.wa_precision
      << ',' << m.wa_recall << ',' << m.wa_f1 << ',' << m.g_mean << ',' << m.f1_dep << ',' << m.f1_nondep << ','
      << m.macro_precision << ',' << m.macro_recall << ',' << m.macro_f1 << ',' << m.cm.tp << ',' << m.cm.fp << ','
      << m.cm.tn << ',' << m.cm.fn;
  return out.str();
}

std::vector<GMeanRow> parse_gmean_csv(std::string_view csv) {
  std::vector<GMeanRow> rows;
  std::istringstream in{std::string(csv)};
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    if (header) {
      header = false;
      continue;
    }
    std::istringstream fields(line);
    GMeanRow r;
    std::string p, rc, g;
    if (!std::getline(fields, r.method, ',') || !std::getline(fields, p, ',') || !std::getline(fields, rc, ',') ||
        !std::getline(fields, g, ',')) {
      throw ParseError("G-mean table: malformed row: " + line);
    }
    r.precision = std::stod(p);
    r.recall = std::stod(rc);
    r.g_mean = std::stod(g);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<GMeanRow> reference_gmean_rows() { return parse_gmean_csv(embedded::gmean_reference_csv()); }

double validate_gmean_convention(std::span<const GMeanRow> rows) {
  double worst = 0.0;
  for (const auto& r : rows) {
    if (!std::isfinite(r.precision) || !std::isfinite(r.recall) || !std::isfinite(r.g_mean)) {
      throw Error("G-mean table: non-finite value in row " + r.method);
    }
    worst = std::max(worst, std::abs(std::sqrt(r.precision * r.recall) - r.g_mean));
  }
  return worst;
}

}  // namespace themescreen::eval
