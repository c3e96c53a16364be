#include "themescreen/ablation.hpp"

#include <cstdio>
#include <sstream>

#include <spdlog/spdlog.h>

namespace themescreen::ablation {

std::vector<Variant> variants(const train::TrainConfig& base) {
  std::vector<Variant> out;
  auto add = [&](std::string name, auto&& edit) {
    train::TrainConfig c = base;
    c.model.drop_theme.reset();
    c.model.disable_tcl = false;
    c.model.disable_itas = false;
    edit(c.model);
    out.push_back({std::move(name), std::move(c)});
  };
  add("full", [](model::ModelConfig&) {});
  for (ThemeId id : kAllThemes) {
    add("w/o " + std::string(theme_name(id)), [id](model::ModelConfig& m) { m.drop_theme = id; });
  }
  add("w/o TCL", [](model::ModelConfig& m) { m.disable_tcl = true; });
  add("w/o ITAS", [](model::ModelConfig& m) { m.disable_itas = true; });
  return out;
}

std::vector<Row> run_ablations(std::span<const features::SessionFeatures> train_set,
                               std::span<const features::SessionFeatures> dev_set,
                               std::span<const features::SessionFeatures> test_set, const train::TrainConfig& base) {
  std::vector<Row> rows;
  for (const auto& v : variants(base)) {
    spdlog::info("ablation variant '{}' (seed {})", v.name, v.config.seed);
    auto result = train::train(train_set, dev_set, v.config);
    const auto test = train::evaluate(result.model, test_set);
    rows.push_back({v.name, v.config.seed, result.model.parameter_count(), result.best_epoch, test.metrics});
  }
  return rows;
}

std::string to_csv(std::span<const Row> rows) {
  std::ostringstream out;
  out << "variant,seed,parameter_count,best_epoch," << eval::metrics_csv_header() << '\n';
  for (const auto& r : rows) {
    out << '"' << r.name << "\"," << r.seed << ',' << r.parameter_count << ',' << r.best_epoch << ','
        << eval::metrics_csv_row(r.test) << '\n';
  }
  return out.str();
}

std::string to_markdown(std::span<const Row> rows) {
  std::ostringstream out;
  out << "| Variant | WA-Prec. | WA-Rec. | WA-F1 | Accuracy | G-Mean | Params |\n";
  out << "|---|---|---|---|---|---|---|\n";
  char buf[160];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "| %s | %.3f | %.3f | %.3f | %.3f | %.3f | %zu |\n", r.name.c_str(),
                  r.test.wa_precision, r.test.wa_recall, r.test.wa_f1, r.test.accuracy, r.test.g_mean,
                  r.parameter_count);
    out << buf;
  }
  return out.str();
}

}  // namespace themescreen::ablation
