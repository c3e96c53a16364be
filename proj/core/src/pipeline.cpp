#include "themescreen/pipeline.hpp"

#include "themescreen/errors.hpp"
#include "themescreen/tcl.hpp"

namespace themescreen::pipeline {

using nlohmann::json;

namespace {

json matrix_rows(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return rows;
}

template <class T>
json theme_map(const ThemeArray<T>& values) {
  json j = json::object();
  for (ThemeId id : kAllThemes) j[std::string(theme_name(id))] = values[index_of(id)];
  return j;
}

}  // namespace

json weights_json(const itas::FeedbackWeights& w) {
  return {{"mode", itas::mode_name(w.mode)},
          {"w", theme_map(w.w)},
          {"alpha", theme_map(w.alpha)},
          {"dropped", w.dropped ? json(theme_name(*w.dropped)) : json(nullptr)}};
}

json figure_bundle(const features::SessionFeatures& f, const model::ForwardTrace& trace,
                   const model::DetectionModel& m) {
  json b{{"session_id", f.session_id}, {"themes", json::array()}};
  for (ThemeId id : trace.active) b["themes"].push_back(theme_name(id));

  json stage1 = json::object();
  if (!trace.tcl.bypassed) {
    for (std::size_t i = 0; i < trace.active.size(); ++i) {
      const ThemeId id = trace.active[i];
      stage1[std::string(theme_name(id))] = {{"tokens", f.embeddings[index_of(id)].tokens},
                                             {"weights", matrix_rows(trace.tcl.s1.themes[i].a)}};
    }
    const Matrix aff = tcl::theme_affinity(trace.tcl.s2.trace.a, trace.tcl.s2.boundaries);
    b["theme_affinity"] = matrix_rows(aff);
    b["stage2_boundaries"] = trace.tcl.s2.boundaries;
    // Mean attention mass each theme receives from all theme segments.
    std::vector<double> mass(aff.cols(), 0.0);
    for (std::size_t r = 0; r < aff.rows(); ++r) {
      for (std::size_t c = 0; c < aff.cols(); ++c) mass[c] += aff(r, c) / static_cast<double>(aff.rows());
    }
    b["tcl_theme_mass"] = mass;
  } else {
    b["theme_affinity"] = nullptr;
    b["tcl_theme_mass"] = nullptr;
  }
  b["stage1"] = std::move(stage1);

  const auto pre = itas::uniform_weights(m.config().drop_theme);
  b["weights"] = {{"pre_itas", std::vector<double>(pre.alpha.begin(), pre.alpha.end())},
                  {"post_itas", std::vector<double>(trace.weights.alpha.begin(), trace.weights.alpha.end())},
                  {"scores", theme_map(f.feedback.scores())},
                  {"mode", itas::mode_name(trace.weights.mode)},
                  {"order", json::array()}};
  for (ThemeId id : kAllThemes) b["weights"]["order"].push_back(theme_name(id));
  return b;
}

SessionAnalysis analyze(const model::DetectionModel& m, features::SessionFeatures f,
                        const std::optional<ThemeArray<double>>& override_scores) {
  if (override_scores) {
    itas::check_scores(*override_scores);
    f.feedback = itas::Feedback::from_scores(*override_scores, itas::FeedbackSource::kClinician);
  }
  SessionAnalysis a;
  const auto trace = m.forward(f.matrices(), f.feedback.scores());
  a.pooled = trace.pooled;
  a.weights = trace.weights;
  a.prediction = trace.prediction;
  a.figures = figure_bundle(f, trace, m);
  a.degraded = f.feedback.fallback;
  a.features = std::move(f);
  return a;
}

model::Prediction reweight(const model::DetectionModel& m, std::span<const Matrix> pooled,
                           const ThemeArray<double>& scores) {
  return m.predict_from_pooled(pooled, m.weights_for(scores));
}

SessionAnalysis predict(const corpus::Transcript& t, const model::DetectionModel& m, gateway::Gateway& gateway,
                        const PredictOptions& options) {
  const auto& tmpl = options.extraction_template ? *options.extraction_template : ticl::InContextTemplate::builtin();
  const auto& prompt = options.feedback_prompt ? *options.feedback_prompt : itas::FeedbackPrompt::builtin();

  features::ThemeRecord record;
  record.session_id = t.session_id;
  record.label = t.label;
  record.split = t.split;
  auto ex = ticl::extract_themes(t, tmpl, gateway, options.extraction_retries);
  record.themes = std::move(ex.themes);
  record.extraction_attempts = ex.attempts;
  record.extraction_fallback = ex.fallback;
  if (options.override_scores) {
    itas::check_scores(*options.override_scores);
    record.feedback = itas::Feedback::from_scores(*options.override_scores, itas::FeedbackSource::kClinician);
  } else {
    record.feedback = itas::request_feedback(record.themes, prompt, gateway, options.feedback_retries);
  }
  SessionAnalysis a = analyze(m, features::embed_record(record, gateway));
  a.degraded = a.degraded || ex.fallback;
  return a;
}

json prediction_json(const SessionAnalysis& a, bool include_figures) {
  const auto& f = a.features;
  json rationales = json::object();
  for (const auto& item : f.feedback.items) rationales[std::string(theme_name(item.theme_id))] = item.rationale;
  json j{{"session_id", f.session_id},
         {"probability", a.prediction.probability},
         {"label", a.prediction.label},
         {"threshold", a.prediction.threshold},
         {"logit", a.prediction.logit},
         {"themes", ticl::to_json(f.themes)["themes"]},
         {"scores", theme_map(f.feedback.scores())},
         {"source", itas::source_name(f.feedback.items[0].source)},
         {"rationales", std::move(rationales)},
         {"weights", weights_json(a.weights)},
         {"alpha", theme_map(a.weights.alpha)},
         {"contribution_norms", theme_map(a.prediction.contribution_norms)},
         {"degraded", a.degraded}};
  if (include_figures) j["figures"] = a.figures;
  return j;
}

}  // namespace themescreen::pipeline
